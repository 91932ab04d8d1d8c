import numpy as np
import pytest

import netadvect as na
from netadvect import BoundarySignal, Edge, Network

from helpers_nets import random_valid_network


def single_edge_net(flow=1.0, area=1.0, length=1.0, g_coeffs=(0.0,)):
    inflow_vertex = "a" if flow > 0 else "b"
    return Network(vertices=("a", "b"),
                   edges=(Edge("e", "a", "b", length, area, flow),),
                   inflow={inflow_vertex: BoundarySignal.polynomial(g_coeffs)})


def constant_coeffs(net, mesh, basis, c):
    return na.nodal_interpolant({e.id: (lambda x: c + 0.0 * np.asarray(x)) for e in net.edges},
                                mesh, basis)


def random_hat_test(rng, system):
    what = rng.normal(size=system.hybrid_map.n_hybrid)
    what[system.hybrid_map.inflow_mask] = 0.0
    return what


class TestReconstruct:
    def test_junction_mixing_value(self, diamond):
        mesh = na.build_mesh(diamond, counts=1)
        system = na.assemble(diamond, mesh, basis=na.Basis(1))
        traces = np.zeros(2 * mesh.n_elements)
        # incoming traces at v4: edge e3 carries 3, edge e4 carries 0
        traces[2 * mesh.offsets["e3"] + 1] = 3.0
        traces[2 * mesh.offsets["e4"] + 1] = 0.0
        uhat = na.reconstruct_hybrid(traces, np.zeros(1), diamond,
                                     system.classification, mesh, system.hybrid_map)
        v4 = system.hybrid_map.vertex_index["v4"]
        assert uhat[v4] == pytest.approx((1.0 * 3.0 + 0.5 * 0.0) / 1.5)
        assert uhat[v4] == pytest.approx(2.0)

    def test_constant_traces_give_constant(self, diamond):
        mesh = na.build_mesh(diamond, counts=3)
        system = na.assemble(diamond, mesh, na.Basis(1))
        c = 4.2
        uhat = system.reconstruct(constant_coeffs(diamond, mesh, na.Basis(1), c),
                                  gvals=np.array([c]))
        np.testing.assert_allclose(uhat, c, atol=1e-12)

    def test_interior_point_takes_upwind_trace(self):
        net = single_edge_net(flow=1.5)
        mesh = na.build_mesh(net, counts=2)
        system = na.assemble(net, mesh, na.Basis(1))
        traces = np.array([0.0, 7.0, 123.0, 0.0])  # left elem right-trace 7
        uhat = na.reconstruct_hybrid(traces, np.zeros(1), net,
                                     system.classification, mesh, system.hybrid_map)
        mid = system.hybrid_map.point_index["e"][1]
        assert uhat[mid] == 7.0

    def test_interior_point_negative_flow(self):
        net = single_edge_net(flow=-1.5)
        mesh = na.build_mesh(net, counts=2)
        system = na.assemble(net, mesh, na.Basis(1))
        traces = np.array([0.0, 7.0, 9.0, 0.0])  # right elem left-trace 9 is upwind
        uhat = na.reconstruct_hybrid(traces, np.zeros(1), net,
                                     system.classification, mesh, system.hybrid_map)
        mid = system.hybrid_map.point_index["e"][1]
        assert uhat[mid] == 9.0

    def test_outflow_vertex_copies_trace(self, diamond):
        mesh = na.build_mesh(diamond, counts=1)
        system = na.assemble(diamond, mesh, na.Basis(1))
        traces = np.zeros(2 * mesh.n_elements)
        traces[2 * mesh.offsets["e7"] + 1] = 5.5
        uhat = na.reconstruct_hybrid(traces, np.zeros(1), diamond,
                                     system.classification, mesh, system.hybrid_map)
        assert uhat[system.hybrid_map.vertex_index["v6"]] == pytest.approx(5.5)

    def test_junction_mass_conservation(self):
        # flux-weighted mixing makes the outgoing flux balance the incoming
        # one exactly at every junction
        rng = np.random.default_rng(17)
        for _ in range(15):
            net = random_valid_network(rng, max_edges=7)
            mesh = na.build_mesh(net, target_h=0.7)
            system = na.assemble(net, mesh, na.Basis(1))
            traces = rng.normal(size=2 * mesh.n_elements)
            gvals = rng.normal(size=len(system.hybrid_map.inflow_vertices))
            uhat = na.reconstruct_hybrid(traces, gvals, net, system.classification,
                                         mesh, system.hybrid_map)
            cls = system.classification
            for v in cls.junctions:
                out_flux = 0.0
                in_flux = 0.0
                for eid in cls.outflow_edges[v]:
                    e = net.edge(eid)
                    out_flux += e.flow * na.incidence(e, v) * uhat[system.hybrid_map.vertex_index[v]]
                for eid in cls.inflow_edges[v]:
                    e = net.edge(eid)
                    col = 2 * (mesh.offsets[eid] + mesh.num_elements[eid] - 1) + 1 \
                        if na.incidence(e, v) > 0 else 2 * mesh.offsets[eid]
                    in_flux += e.flow * na.incidence(e, v) * traces[col]
                assert out_flux == pytest.approx(-in_flux, rel=1e-12, abs=1e-12)


class TestBilinearForm:
    def test_single_edge_diagonal_value(self):
        net = single_edge_net(flow=1.0)
        mesh = na.build_mesh(net, counts=1)
        basis = na.Basis(1)
        system = na.assemble(net, mesh, basis)
        u = constant_coeffs(net, mesh, basis, 1.0)
        uhat = np.zeros(system.hybrid_map.n_hybrid)
        value = na.apply_bilinear_form(system, u, uhat, u, uhat)
        assert value == pytest.approx(1.0, abs=1e-14)

    def test_constant_state_annihilated_by_admissible_tests(self, diamond):
        mesh = na.build_mesh(diamond, counts=2)
        basis = na.Basis(2)
        system = na.assemble(diamond, mesh, basis)
        rng = np.random.default_rng(2)
        c = 3.3
        u = constant_coeffs(diamond, mesh, basis, c)
        uhat = np.full(system.hybrid_map.n_hybrid, c)
        for _ in range(5):
            w = rng.normal(size=system.n_dofs)
            what = random_hat_test(rng, system)
            assert na.apply_bilinear_form(system, u, uhat, w, what) == pytest.approx(0.0, abs=1e-12)

    def test_zero_arguments(self, diamond):
        mesh = na.build_mesh(diamond, counts=1)
        system = na.assemble(diamond, mesh, na.Basis(1))
        z = np.zeros(system.n_dofs)
        zh = np.zeros(system.hybrid_map.n_hybrid)
        assert na.apply_bilinear_form(system, z, zh, z, zh) == 0.0

    def test_semi_ellipticity_identity(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            net = random_valid_network(rng, max_edges=5)
            basis = na.Basis(int(rng.integers(0, 3)))
            mesh = na.build_mesh(net, target_h=float(rng.uniform(0.3, 1.0)))
            system = na.assemble(net, mesh, basis)
            w = rng.normal(size=system.n_dofs)
            what = random_hat_test(rng, system)
            lhs = na.apply_bilinear_form(system, w, what, w, what)
            el = system.elements
            wr = w.reshape(-1, basis.n_dof)
            tl, tr = wr @ basis.at_left, wr @ basis.at_right
            jump = np.sum(np.abs(el.flow) * ((tl - what[el.left_point]) ** 2
                                             + (tr - what[el.right_point]) ** 2))
            out = np.sum(system.boundary.outflow_abs
                         * what[system.boundary.outflow_points] ** 2)
            scale = max(abs(lhs), jump, out, 1.0)
            assert abs(lhs - 0.5 * jump - 0.5 * out) <= 1e-12 * scale

    def test_matches_assembled_operator(self):
        rng = np.random.default_rng(29)
        for _ in range(10):
            net = random_valid_network(rng, max_edges=6)
            basis = na.Basis(int(rng.integers(0, 3)))
            mesh = na.build_mesh(net, target_h=0.6)
            system = na.assemble(net, mesh, basis)
            u = rng.normal(size=system.n_dofs)
            t = float(rng.uniform(0.0, 2.0))
            gvals = system.g_values(t)
            uhat = system.reconstruct(u, gvals=gvals)
            w = rng.normal(size=system.n_dofs)
            via_matrices = float(w @ (system.flux @ u - system.inflow_load @ gvals))
            via_form = na.apply_bilinear_form(system, u, uhat, w, np.zeros_like(uhat))
            assert via_matrices == pytest.approx(via_form, rel=1e-11, abs=1e-11)


class TestAssemble:
    def test_k0_single_cell_in_natural_basis(self):
        # expressed in the elementwise basis {1}: a single upwind cell with
        # unit mass, unit outflow, and unit boundary load
        net = single_edge_net(flow=1.0, g_coeffs=(0.0,))
        mesh = na.build_mesh(net, counts=1)
        basis = na.Basis(0)
        system = na.assemble(net, mesh, basis)
        T = np.sqrt(2.0)  # coefficient of the orthonormal mode representing 1
        m_nat = T * system.mass_diag[0] * T
        b_nat = T * system.flux.toarray()[0, 0] * T
        g_nat = T * system.inflow_load.toarray()[0, 0]
        assert m_nat == pytest.approx(1.0, abs=1e-14)
        assert b_nat == pytest.approx(1.0, abs=1e-14)
        assert g_nat == pytest.approx(1.0, abs=1e-14)

    def test_constant_state_is_steady(self, diamond):
        basis = na.Basis(1)
        mesh = na.build_mesh(diamond, counts=3)
        system = na.assemble(diamond, mesh, basis)
        c = 2.0
        u = constant_coeffs(diamond, mesh, basis, c)
        resid = system.flux @ u - system.inflow_load @ np.array([c])
        np.testing.assert_allclose(resid, 0.0, atol=1e-13)

    def test_zero_input(self, diamond):
        mesh = na.build_mesh(diamond, counts=2)
        system = na.assemble(diamond, mesh, na.Basis(1))
        np.testing.assert_allclose(system.inflow_load @ np.array([0.0]), 0.0)

    def test_mass_operator_spd_block_diagonal(self, diamond):
        mesh = na.build_mesh(diamond, target_h=0.5)
        system = na.assemble(diamond, mesh, na.Basis(2))
        assert np.all(system.mass_diag > 0)

    def test_discrete_conservation_rhs(self):
        # testing the residual with the constant-one function leaves only the
        # signed boundary fluxes of the traces used by the scheme
        rng = np.random.default_rng(31)
        for _ in range(10):
            net = random_valid_network(rng, max_edges=6)
            basis = na.Basis(int(rng.integers(0, 3)))
            mesh = na.build_mesh(net, target_h=0.8)
            system = na.assemble(net, mesh, basis)
            u = rng.normal(size=system.n_dofs)
            t = float(rng.uniform(0.0, 2.0))
            gvals = system.g_values(t)
            uhat = system.reconstruct(u, gvals=gvals)
            ones = constant_coeffs(net, mesh, basis, 1.0)
            tested = float(ones @ (system.flux @ u - system.inflow_load @ gvals))
            bd = system.boundary
            boundary_flux = float(np.sum(bd.signed_flow * uhat[bd.points]))
            assert tested == pytest.approx(boundary_flux, rel=1e-11, abs=1e-11)

    def test_energy_identity_algebraic(self):
        rng = np.random.default_rng(37)
        for _ in range(10):
            net = random_valid_network(rng, max_edges=5)
            basis = na.Basis(int(rng.integers(0, 3)))
            mesh = na.build_mesh(net, target_h=0.7)
            system = na.assemble(net, mesh, basis)
            u = rng.normal(size=system.n_dofs)
            t = float(rng.uniform(0.0, 2.0))
            uhat = system.reconstruct(u, t=t)
            dudt = system.rhs(u, t)
            state = na.State(u=u, uhat=uhat, t=t)
            diag = na.compute_diagnostics(system, state)
            lhs = 2.0 * float((system.mass_diag * dudt) @ u)
            resid = lhs + diag.jump_dissipation + diag.outflow_dissipation - diag.inflow_power
            scale = max(abs(lhs), diag.jump_dissipation, diag.outflow_dissipation,
                        diag.inflow_power, 1.0)
            assert abs(resid) <= 1e-11 * scale

    def test_consistency_single_edge(self):
        # an exact solution that is polynomial along characteristics produces
        # zero residual when inserted with its own traces
        rng = np.random.default_rng(41)
        for flow in (1.7, -0.8):
            for degree in (0, 1, 2):
                basis = na.Basis(degree)
                g_coeffs = rng.normal(size=degree + 1)
                g = np.polynomial.Polynomial(g_coeffs)
                area, length = 1.3, 2.0
                net = single_edge_net(flow=flow, area=area, length=length,
                                      g_coeffs=tuple(g_coeffs))
                mesh = na.build_mesh(net, counts=3)
                system = na.assemble(net, mesh, basis)
                t0 = 9.0  # all characteristics reach back to the boundary signal
                delay = lambda x: (x if flow > 0 else length - x) * area / abs(flow)
                u_fun = lambda x: g(t0 - delay(x))
                du_fun = lambda x: g.deriv()(t0 - delay(x))
                u = na.nodal_interpolant({"e": u_fun}, mesh, basis)
                dudt = na.nodal_interpolant({"e": du_fun}, mesh, basis)
                resid = (system.mass_diag * dudt + system.flux @ u
                         - system.inflow_load @ np.array([float(g(t0))]))
                np.testing.assert_allclose(resid, 0.0, atol=1e-11)


class TestDiagnostics:
    def test_unit_state_mass_energy(self, diamond):
        basis = na.Basis(1)
        mesh = na.build_mesh(diamond, counts=2)
        system = na.assemble(diamond, mesh, basis)
        u = constant_coeffs(diamond, mesh, basis, 1.0)
        uhat = np.ones(system.hybrid_map.n_hybrid)
        diag = na.compute_diagnostics(system, na.State(u=u, uhat=uhat, t=0.0))
        assert diag.mass == pytest.approx(7.0, abs=1e-12)
        assert diag.energy == pytest.approx(7.0, abs=1e-12)
        assert diag.jump_dissipation == pytest.approx(0.0, abs=1e-13)
        assert diag.boundary_fluxes["v1"] == pytest.approx(-2.0)
        assert diag.boundary_fluxes["v6"] == pytest.approx(2.0)

    def test_zero_state(self, diamond):
        mesh = na.build_mesh(diamond, counts=1)
        system = na.assemble(diamond, mesh, na.Basis(1))
        diag = na.compute_diagnostics(system, na.State(
            u=np.zeros(system.n_dofs), uhat=np.zeros(system.hybrid_map.n_hybrid), t=0.0))
        assert diag.mass == diag.energy == diag.jump_dissipation == 0.0
        assert diag.outflow_dissipation == diag.inflow_power == 0.0

    def test_nonnegative_fields(self):
        rng = np.random.default_rng(43)
        net = random_valid_network(rng, max_edges=5)
        mesh = na.build_mesh(net, target_h=0.5)
        system = na.assemble(net, mesh, na.Basis(1))
        u = rng.normal(size=system.n_dofs)
        uhat = system.reconstruct(u, t=1.0)
        diag = na.compute_diagnostics(system, na.State(u=u, uhat=uhat, t=1.0))
        assert diag.energy >= 0
        assert diag.jump_dissipation >= 0
        assert diag.outflow_dissipation >= 0
        assert diag.inflow_power >= 0


class TestCoupledFormulation:
    def test_reconstruction_agrees_with_elimination(self):
        rng = np.random.default_rng(47)
        for _ in range(10):
            net = random_valid_network(rng, max_edges=5)
            basis = na.Basis(int(rng.integers(0, 3)))
            mesh = na.build_mesh(net, target_h=0.6)
            system = na.assemble(net, mesh, basis)
            coupled = na.assemble_coupled(net, mesh, basis)
            u = rng.normal(size=system.n_dofs)
            gvals = rng.normal(size=len(system.hybrid_map.inflow_vertices))
            np.testing.assert_allclose(coupled.reconstruct(u, gvals),
                                       system.reconstruct(u, gvals=gvals),
                                       rtol=1e-11, atol=1e-12)

    def test_step_trajectories_agree(self):
        net = Network(
            vertices=("v1", "v2", "v3", "v4"),
            edges=(Edge("e1", "v1", "v3", 1.0, 1.0, 0.6),
                   Edge("e2", "v2", "v3", 0.8, 1.2, 0.4),
                   Edge("e3", "v3", "v4", 1.2, 1.0, 1.0)),
            inflow={"v1": BoundarySignal.polynomial([0.5, 0.3]),
                    "v2": BoundarySignal.polynomial([0.0, 0.0, 0.2])},
        )
        assert na.validate(net).ok
        basis = na.Basis(1)
        mesh = na.build_mesh(net, counts=2)
        system = na.assemble(net, mesh, basis)
        coupled = na.assemble_coupled(net, mesh, basis)

        tau = 0.05
        state = na.State(u=np.zeros(system.n_dofs),
                         uhat=system.reconstruct(np.zeros(system.n_dofs), t=0.0), t=0.0)
        u_coupled = np.zeros(system.n_dofs)
        for n in range(20):
            state = na.step_implicit_euler(system, state, tau)
            u_coupled, uhat_coupled = coupled.step_implicit_euler(
                u_coupled, tau, system.g_values((n + 1) * tau))
            np.testing.assert_allclose(u_coupled, state.u, rtol=1e-11, atol=1e-13)
            np.testing.assert_allclose(uhat_coupled, state.uhat, rtol=1e-11, atol=1e-13)


class TestOrientationInvariance:
    def test_flipping_an_edge_is_cosmetic(self, diamond):
        flipped_edges = tuple(
            e if e.id != "e4" else Edge("e4", e.head, e.tail, e.length, e.area, -e.flow)
            for e in diamond.edges)
        flipped = Network(vertices=diamond.vertices, edges=flipped_edges,
                          inflow=diamond.inflow)
        assert na.validate(flipped).ok
        basis = na.Basis(1)
        cfg = na.StepperConfig(tau=0.125, t_final=2.0)
        mesh_a = na.build_mesh(diamond, target_h=0.5)
        mesh_b = na.build_mesh(flipped, target_h=0.5)
        sa = na.simulate(diamond, mesh_a, basis, cfg)
        sb = na.simulate(flipped, mesh_b, basis, cfg)
        ua, ub = sa.states[-1].u, sb.states[-1].u
        # stay off the element breakpoints, where the broken solution is
        # two-valued and mirroring flips which side is evaluated
        for eid in ("e1", "e7"):
            for x in (0.1, 0.6):
                assert na.eval_coeffs(ub, mesh_b, basis, eid, x) == pytest.approx(
                    na.eval_coeffs(ua, mesh_a, basis, eid, x), rel=1e-11, abs=1e-12)
        for x in (0.2, 0.45, 0.9):
            assert na.eval_coeffs(ub, mesh_b, basis, "e4", 1.0 - x) == pytest.approx(
                na.eval_coeffs(ua, mesh_a, basis, "e4", x), rel=1e-11, abs=1e-12)
