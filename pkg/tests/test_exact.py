import numpy as np
import pytest

import netadvect as na
from netadvect import BoundarySignal, Edge, Network

from helpers_nets import random_valid_network


def g25(t):
    return t * t / 25.0 if t >= 0.0 else 0.0


class TestVertexValues:
    def test_first_junction_is_delayed_inflow(self, diamond):
        ex = na.ExactSolution(diamond)
        assert ex.travel_time["e1"] == pytest.approx(0.5)
        for t in (0.0, 0.2, 0.499, 0.5, 0.7, 1.3, 4.0):
            expected = g25(t - 0.5) if t >= 0.5 else 0.0
            assert ex.vertex_value("v2", t) == pytest.approx(expected, abs=1e-14)

    def test_second_tier_junctions(self, diamond):
        ex = na.ExactSolution(diamond)
        # travel times: e2 and e3 take 1, e4 takes 2
        assert ex.travel_time["e2"] == pytest.approx(1.0)
        assert ex.travel_time["e4"] == pytest.approx(2.0)
        for t in (0.9, 1.4, 2.6, 3.8, 5.0):
            v2 = lambda s: g25(s - 0.5) if s >= 0.5 else 0.0
            v3 = v2(t - 1.0) if t >= 1.0 else 0.0
            assert ex.vertex_value("v3", t) == pytest.approx(v3, abs=1e-14)
            mix = 0.0
            if t >= 1.0:
                mix += 1.0 * v2(t - 1.0)
            if t >= 2.0:
                mix += 0.5 * (v2(t - 3.0) if t >= 3.0 else 0.0)
            assert ex.vertex_value("v4", t) == pytest.approx(mix / 1.5, abs=1e-14)

    def test_constant_data_everywhere(self):
        rng = np.random.default_rng(61)
        c = 3.25
        for _ in range(5):
            net = random_valid_network(rng, max_edges=6)
            net = Network(vertices=net.vertices, edges=net.edges,
                          inflow={v: BoundarySignal.polynomial([c]) for v in net.inflow},
                          initial={e.id: (c,) for e in net.edges})
            ex = na.ExactSolution(net)
            for e in net.edges:
                for x in np.linspace(0.0, e.length, 5):
                    for t in (0.0, 0.7, 3.0, 11.0):
                        assert ex.evaluate(e.id, float(x), t) == pytest.approx(c, abs=1e-12)

    def test_junction_flux_conservation_sampled(self, diamond):
        ex = na.ExactSolution(diamond)
        cls = na.classify(diamond)
        for t in np.linspace(0.0, 5.0, 100):
            for v in cls.junctions:
                out_flux = in_flux = 0.0
                for eid in cls.outflow_edges[v]:
                    e = diamond.edge(eid)
                    out_flux += e.flow * na.incidence(e, v) * ex.vertex_value(v, float(t))
                for eid in cls.inflow_edges[v]:
                    e = diamond.edge(eid)
                    x_exit = e.length if e.flow > 0 else 0.0
                    in_flux += e.flow * na.incidence(e, v) * ex.evaluate(eid, x_exit, float(t))
                assert out_flux == pytest.approx(-in_flux, abs=1e-12)


class TestEvaluate:
    def test_inflow_endpoint_returns_signal(self, diamond):
        ex = na.ExactSolution(diamond)
        assert ex.evaluate("e1", 0.0, 2.0) == pytest.approx(0.16)

    def test_outflow_endpoint_delays(self, diamond):
        ex = na.ExactSolution(diamond)
        for t in (1.0, 2.0, 5.0):
            assert ex.evaluate("e1", 1.0, t) == pytest.approx(g25(t - 0.5), abs=1e-14)

    def test_before_arrival_transports_initial_data(self):
        net = Network(vertices=("a", "b"), edges=(Edge("e", "a", "b", 2.0, 1.0, 1.0),),
                      inflow={"a": BoundarySignal.polynomial([9.0])},
                      initial={"e": (0.0, 1.0)})  # u0(x) = x
        ex = na.ExactSolution(net)
        # speed 1: before the boundary signal arrives the profile shifts right
        assert ex.evaluate("e", 1.5, 1.0) == pytest.approx(0.5)
        assert ex.evaluate("e", 1.5, 2.0) == pytest.approx(9.0)  # signal arrived

    def test_negative_flow_edge(self):
        net = Network(vertices=("a", "b"), edges=(Edge("e", "a", "b", 1.0, 2.0, -0.5),),
                      inflow={"b": BoundarySignal.polynomial([0.0, 1.0])})
        ex = na.ExactSolution(net)
        # inflow end is x = 1, speed |b|/a = 0.25 toward x = 0
        assert ex.travel_time["e"] == pytest.approx(4.0)
        assert ex.evaluate("e", 0.5, 3.0) == pytest.approx(3.0 - 2.0)

    def test_rejects_out_of_range(self, diamond):
        ex = na.ExactSolution(diamond)
        with pytest.raises(ValueError):
            ex.evaluate("e1", 1.5, 1.0)
        with pytest.raises(ValueError):
            ex.evaluate("e1", 0.5, -0.1)

    def test_series_matches_scalar(self, diamond):
        ex = na.ExactSolution(diamond)
        times = np.linspace(0.0, 5.0, 40)
        for eid, x in (("e1", 0.3), ("e4", 0.8), ("e7", 0.99)):
            got = ex.series(eid, x, times)
            want = [ex.evaluate(eid, x, float(t)) for t in times]
            np.testing.assert_allclose(got, want, atol=1e-14)

    def test_continuity_along_edges(self, diamond):
        ex = na.ExactSolution(diamond)
        xs = np.linspace(0.0, 1.0, 400)
        for eid in ("e2", "e6", "e7"):
            vals = np.array([ex.evaluate(eid, float(x), 4.3) for x in xs])
            assert np.max(np.abs(np.diff(vals))) < 0.02


class TestCycleNetwork:
    def cycle(self):
        return Network(
            vertices=("a", "b", "c"),
            edges=(Edge("ab", "a", "b", 1.0, 1.0, 1.0),
                   Edge("bc", "b", "c", 1.0, 1.0, 1.0),
                   Edge("ca", "c", "a", 1.0, 1.0, 1.0)),
            initial={"ab": (0.0, 1.0), "bc": (0.5,), "ca": (0.25,)})

    def test_cycle_is_valid(self):
        assert na.validate(self.cycle()).ok

    def test_exact_solution_is_periodic(self):
        ex = na.ExactSolution(self.cycle())
        for t in (3.1, 4.7, 6.9):
            for x in (0.2, 0.8):
                assert ex.evaluate("bc", x, t) == pytest.approx(
                    ex.evaluate("bc", x, t - 3.0), abs=1e-12)

    def test_simulated_mass_is_conserved(self):
        net = self.cycle()
        mesh = na.build_mesh(net, target_h=0.25)
        series = na.simulate(net, mesh, na.Basis(1), na.StepperConfig(tau=0.05, t_final=2.0))
        masses = [d.mass for d in series.diagnostics]
        assert max(abs(m - masses[0]) for m in masses) <= 1e-12 * max(1.0, abs(masses[0]))


class TestErrorNorm:
    def test_constant_steady_state_error_is_tiny(self, diamond):
        c = 1.2
        net = Network(vertices=diamond.vertices, edges=diamond.edges,
                      inflow={"v1": BoundarySignal.polynomial([c])},
                      initial={e.id: (c,) for e in diamond.edges})
        basis = na.Basis(1)
        mesh = na.build_mesh(net, target_h=0.5)
        series = na.simulate(net, mesh, basis, na.StepperConfig(tau=0.25, t_final=2.0))
        err = na.error_norm(series, na.ExactSolution(net), mesh, basis)
        assert err <= 1e-12

    def test_solver_converges_to_oracle(self):
        # independently computed exact solution and simulated solution approach
        # each other at the expected spatial order
        rng = np.random.default_rng(67)
        net = random_valid_network(rng, max_edges=4, flip=True)
        # compatible smooth data: zero initial state, signals flat at t = 0
        net = Network(vertices=net.vertices, edges=net.edges,
                      inflow={v: BoundarySignal.polynomial([0.0, 0.0, 0.0, 0.25])
                              for v in net.inflow})
        for degree in (0, 1):
            report = na.run_convergence_study(
                net, degree, [0.4, 0.2, 0.1, 0.05], t_final=2.0,
                tau_rule=lambda h, d=degree: h ** (d + 1) / 32)
            assert report.levels[-1].rate >= degree + 0.9, report.table()

    def test_rates_definition(self, diamond):
        report = na.run_convergence_study(diamond, 1, [1.0, 0.5], t_final=1.0)
        lv0, lv1 = report.levels
        assert lv0.rate is None
        assert lv1.rate == pytest.approx(np.log2(lv0.err / lv1.err))

    def test_rejects_non_halving_levels(self, diamond):
        with pytest.raises(ValueError):
            na.run_convergence_study(diamond, 1, [1.0, 0.7], t_final=1.0)
