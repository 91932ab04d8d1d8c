"""Semi-discrete upwind hybrid-DG operators on a meshed network.

The scheme couples elementwise polynomials with one trace unknown per grid
point (grid points meeting at a vertex share one unknown).  Testing with the
trace basis determines every non-inflow trace locally from the upwind side,
so the traces can be eliminated and the evolution reduces to a linear ODE

    M du/dt + B u = G g(t),

with a diagonal mass operator M, a sparse flux operator B (element-local
plus upwind-neighbor coupling), and a boundary input map G.  A coupled
formulation that keeps the trace unknowns is retained as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .meshing import Basis, HybridIndexMap, Mesh, build_hybrid_map
from .network import Network, VertexClassification, VertexKind, classify, incidence

__all__ = [
    "Diagnostics",
    "OdeSystem",
    "State",
    "CoupledSystem",
    "apply_bilinear_form",
    "assemble",
    "assemble_coupled",
    "compute_diagnostics",
    "reconstruct_hybrid",
]


@dataclass
class State:
    """Element coefficients, trace vector, and the current time."""

    u: np.ndarray
    uhat: np.ndarray
    t: float


@dataclass(frozen=True)
class Diagnostics:
    mass: float
    energy: float
    jump_dissipation: float
    outflow_dissipation: float
    inflow_power: float
    boundary_fluxes: Mapping[str, float]


def _coo(shape: tuple[int, int], entries: list[tuple[int, int, float]]) -> sp.csr_matrix:
    if not entries:
        return sp.csr_matrix(shape)
    rows, cols, vals = zip(*entries)
    return sp.csr_matrix((vals, (rows, cols)), shape=shape)


class _ElementTable:
    """Flat per-element arrays shared by assembly and diagnostics."""

    def __init__(self, network: Network, mesh: Mesh, hmap: HybridIndexMap):
        flows, areas, sizes, left_pt, right_pt = [], [], [], [], []
        for e in network.edges:
            pts = hmap.point_index[e.id]
            hs = mesh.element_sizes[e.id]
            for i in range(mesh.num_elements[e.id]):
                flows.append(e.flow)
                areas.append(e.area)
                sizes.append(hs[i])
                left_pt.append(pts[i])
                right_pt.append(pts[i + 1])
        self.flow = np.array(flows)
        self.area = np.array(areas)
        self.size = np.array(sizes)
        self.left_point = np.array(left_pt, dtype=int)
        self.right_point = np.array(right_pt, dtype=int)


def _trace_operator(n_elements: int, basis: Basis) -> sp.csr_matrix:
    """Maps coefficients to element endpoint values, two rows per element."""
    nd = basis.n_dof
    entries = []
    for j in range(n_elements):
        for n in range(nd):
            entries.append((2 * j, j * nd + n, basis.at_left[n]))
            entries.append((2 * j + 1, j * nd + n, basis.at_right[n]))
    return _coo((2 * n_elements, n_elements * nd), entries)


def _hybrid_matrices(network: Network, cls: VertexClassification, mesh: Mesh,
                     hmap: HybridIndexMap) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Linear maps (traces, inflow values) -> trace vector.

    Junction and outflow values are the flux-weighted mixture of the traces
    carried in by the incoming edges; interior grid points copy the upwind
    element trace; inflow vertices copy the boundary signal.
    """
    edge_map = {e.id: e for e in network.edges}
    tr_entries, g_entries = [], []

    def vertex_side_trace_col(eid: str, v: str) -> int:
        off = mesh.offsets[eid]
        if incidence(edge_map[eid], v) > 0:
            return 2 * (off + mesh.num_elements[eid] - 1) + 1
        return 2 * off

    for v in network.vertices:
        gidx = hmap.vertex_index[v]
        kind = cls.kind[v]
        if kind is VertexKind.INFLOW:
            g_entries.append((gidx, hmap.inflow_column[v], 1.0))
            continue
        if kind is VertexKind.ISOLATED:
            continue
        weights = [(eid, edge_map[eid].flow * incidence(edge_map[eid], v))
                   for eid in cls.inflow_edges[v]]
        wsum = sum(w for _, w in weights)
        if wsum <= 0:
            raise ValueError(f"vertex {v!r} has no incoming flow; mixing value undefined")
        for eid, w in weights:
            tr_entries.append((gidx, vertex_side_trace_col(eid, v), w / wsum))

    for e in network.edges:
        pts = hmap.point_index[e.id]
        off = mesh.offsets[e.id]
        for i in range(1, mesh.num_elements[e.id]):
            # upwind side: left element for positive flow, right otherwise
            col = 2 * (off + i - 1) + 1 if e.flow > 0 else 2 * (off + i)
            tr_entries.append((int(pts[i]), col, 1.0))

    from_traces = _coo((hmap.n_hybrid, 2 * mesh.n_elements), tr_entries)
    from_inflow = _coo((hmap.n_hybrid, len(hmap.inflow_vertices)), g_entries)
    return from_traces, from_inflow


def reconstruct_hybrid(traces: np.ndarray, gvals: np.ndarray, network: Network,
                       classification: VertexClassification, mesh: Mesh,
                       hmap: HybridIndexMap) -> np.ndarray:
    """Trace vector from element endpoint values and inflow boundary values.

    ``traces`` holds (left, right) endpoint values per element, flattened in
    global element order.
    """
    from_traces, from_inflow = _hybrid_matrices(network, classification, mesh, hmap)
    return from_traces @ np.asarray(traces, dtype=float) + from_inflow @ np.asarray(gvals, dtype=float)


class _BoundaryInfo:
    def __init__(self, network: Network, cls: VertexClassification, hmap: HybridIndexMap):
        edge_map = {e.id: e for e in network.edges}
        self.vertices, points, signed = [], [], []
        for v in network.vertices:
            kind = cls.kind[v]
            if kind not in (VertexKind.INFLOW, VertexKind.OUTFLOW):
                continue
            eid = cls.edges_at[v][0]
            bn = edge_map[eid].flow * incidence(edge_map[eid], v)
            self.vertices.append(v)
            points.append(hmap.vertex_index[v])
            signed.append(bn)
        self.points = np.array(points, dtype=int)
        self.signed_flow = np.array(signed)
        out = self.signed_flow > 0
        self.outflow_points = self.points[out]
        self.outflow_abs = np.abs(self.signed_flow[out])
        self.inflow_points = self.points[~out]
        self.inflow_abs = np.abs(self.signed_flow[~out])


class OdeSystem:
    """Assembled semi-discrete system with eliminated trace unknowns."""

    def __init__(self, network: Network, mesh: Mesh, basis: Basis,
                 classification: VertexClassification, hmap: HybridIndexMap):
        self.network = network
        self.mesh = mesh
        self.basis = basis
        self.classification = classification
        self.hybrid_map = hmap
        self.elements = _ElementTable(network, mesh, hmap)
        self.boundary = _BoundaryInfo(network, classification, hmap)

        nd = basis.n_dof
        n_el = mesh.n_elements
        self.n_dofs = n_el * nd
        self.mass_diag = np.repeat(self.elements.area * self.elements.size / 2.0, nd)

        self.trace_op = _trace_operator(n_el, basis)
        self.hybrid_from_traces, self.hybrid_from_inflow = _hybrid_matrices(
            network, classification, mesh, hmap)

        eL, eR = basis.at_left, basis.at_right
        local_entries, coupling_entries = [], []
        for j in range(n_el):
            b = self.elements.flow[j]
            bp, bm = max(b, 0.0), min(b, 0.0)
            base = j * nd
            block = -b * basis.conv + bp * np.outer(eR, eR) - bm * np.outer(eL, eL)
            for m in range(nd):
                for n in range(nd):
                    if block[m, n] != 0.0:
                        local_entries.append((base + m, base + n, block[m, n]))
            if bm != 0.0:
                pr = self.elements.right_point[j]
                for m in range(nd):
                    coupling_entries.append((base + m, pr, bm * eR[m]))
            if bp != 0.0:
                pl = self.elements.left_point[j]
                for m in range(nd):
                    coupling_entries.append((base + m, pl, -bp * eL[m]))

        local = _coo((self.n_dofs, self.n_dofs), local_entries)
        coupling = _coo((self.n_dofs, hmap.n_hybrid), coupling_entries)
        hybrid_of_u = (self.hybrid_from_traces @ self.trace_op).tocsr()
        self.flux = (local + coupling @ hybrid_of_u).tocsr()
        self.inflow_load = (-coupling @ self.hybrid_from_inflow).tocsr()

    def g_values(self, t: float) -> np.ndarray:
        return np.array([float(self.network.inflow[v](t)) for v in self.hybrid_map.inflow_vertices])

    def reconstruct(self, u: np.ndarray, t: float | None = None,
                    gvals: np.ndarray | None = None) -> np.ndarray:
        if gvals is None:
            gvals = self.g_values(0.0 if t is None else t)
        traces = self.trace_op @ u
        return self.hybrid_from_traces @ traces + self.hybrid_from_inflow @ gvals

    def rhs(self, u: np.ndarray, t: float) -> np.ndarray:
        """du/dt = M^{-1} (G g(t) - B u)."""
        return (self.inflow_load @ self.g_values(t) - self.flux @ u) / self.mass_diag


def assemble(network: Network, mesh: Mesh, basis: Basis,
             classification: VertexClassification | None = None,
             hybrid_map: HybridIndexMap | None = None) -> OdeSystem:
    cls = classification if classification is not None else classify(network)
    hmap = hybrid_map if hybrid_map is not None else build_hybrid_map(network, mesh)
    return OdeSystem(network, mesh, basis, cls, hmap)


def apply_bilinear_form(system: OdeSystem, u: np.ndarray, uhat: np.ndarray,
                        w: np.ndarray, what: np.ndarray) -> float:
    """Evaluate the scheme's bilinear form on given trial/test data.

    Computed directly from the definition (volume quadrature, upwind endpoint
    pairing, outflow boundary pairing) rather than through the assembled
    matrices, so it doubles as an independent check on them.
    """
    el = system.elements
    nd = system.basis.n_dof
    u_r = np.asarray(u).reshape(-1, nd)
    w_r = np.asarray(w).reshape(-1, nd)

    conv_u = u_r @ system.basis.conv.T
    value = -float(np.sum(el.flow * np.einsum("jn,jn->j", w_r, conv_u)))

    tl_u = u_r @ system.basis.at_left
    tr_u = u_r @ system.basis.at_right
    tl_w = w_r @ system.basis.at_left
    tr_w = w_r @ system.basis.at_right
    uhat = np.asarray(uhat)
    what = np.asarray(what)

    b = el.flow
    bp, bm = np.maximum(b, 0.0), np.minimum(b, 0.0)
    flux_right = bp * tr_u + bm * uhat[el.right_point]
    flux_left = -bm * tl_u - bp * uhat[el.left_point]
    value += float(np.sum(flux_right * (tr_w - what[el.right_point])))
    value += float(np.sum(flux_left * (tl_w - what[el.left_point])))

    bd = system.boundary
    value += float(np.sum(bd.outflow_abs * uhat[bd.outflow_points] * what[bd.outflow_points]))
    return value


def compute_diagnostics(system: OdeSystem, state: State) -> Diagnostics:
    el = system.elements
    nd = system.basis.n_dof
    u_r = state.u.reshape(-1, nd)
    half = el.area * el.size / 2.0

    mass = float(np.sum(half * u_r[:, 0]) * np.sqrt(2.0))
    energy = float(np.sum(half * np.sum(u_r**2, axis=1)))

    tl = u_r @ system.basis.at_left
    tr = u_r @ system.basis.at_right
    absb = np.abs(el.flow)
    jump = float(np.sum(absb * ((tl - state.uhat[el.left_point]) ** 2
                                + (tr - state.uhat[el.right_point]) ** 2)))

    bd = system.boundary
    outflow = float(np.sum(bd.outflow_abs * state.uhat[bd.outflow_points] ** 2))
    inflow = float(np.sum(bd.inflow_abs * state.uhat[bd.inflow_points] ** 2))
    fluxes = {v: float(bn * state.uhat[p])
              for v, p, bn in zip(bd.vertices, bd.points, bd.signed_flow)}
    return Diagnostics(mass=mass, energy=energy, jump_dissipation=jump,
                       outflow_dissipation=outflow, inflow_power=inflow,
                       boundary_fluxes=fluxes)


class CoupledSystem:
    """Reference formulation keeping the trace unknowns in the system.

    The per-grid-point upwind balance equations are kept as algebraic
    constraints next to the element ODEs, and every implicit step solves the
    full block system.  Used to cross-check the eliminated formulation.
    """

    def __init__(self, network: Network, mesh: Mesh, basis: Basis):
        cls = classify(network)
        hmap = build_hybrid_map(network, mesh)
        self.network = network
        self.mesh = mesh
        self.basis = basis
        self.classification = cls
        self.hybrid_map = hmap
        el = _ElementTable(network, mesh, hmap)
        bd = _BoundaryInfo(network, cls, hmap)

        nd = basis.n_dof
        n_el = mesh.n_elements
        self.n_dofs = n_el * nd
        self.mass_diag = np.repeat(el.area * el.size / 2.0, nd)
        self.g_rows = np.array([hmap.vertex_index[v] for v in hmap.inflow_vertices], dtype=int)
        dirichlet = set(int(p) for p in self.g_rows)

        eL, eR = basis.at_left, basis.at_right
        local_entries, coupling_entries = [], []
        bal_u_entries, bal_hat_entries = [], []
        for j in range(n_el):
            b = el.flow[j]
            bp, bm = max(b, 0.0), min(b, 0.0)
            base = j * nd
            block = -b * basis.conv + bp * np.outer(eR, eR) - bm * np.outer(eL, eL)
            for m in range(nd):
                for n in range(nd):
                    if block[m, n] != 0.0:
                        local_entries.append((base + m, base + n, block[m, n]))
            pr, pl = int(el.right_point[j]), int(el.left_point[j])
            if bm != 0.0:
                for m in range(nd):
                    coupling_entries.append((base + m, pr, bm * eR[m]))
            if bp != 0.0:
                for m in range(nd):
                    coupling_entries.append((base + m, pl, -bp * eL[m]))
            # balance at the endpoints: the upwind fluxes of all incident
            # elements must cancel (plus the boundary pairing at outflow)
            if pr not in dirichlet:
                if bp != 0.0:
                    for m in range(nd):
                        bal_u_entries.append((pr, base + m, -bp * eR[m]))
                if bm != 0.0:
                    bal_hat_entries.append((pr, pr, -bm))
            if pl not in dirichlet:
                if bm != 0.0:
                    for m in range(nd):
                        bal_u_entries.append((pl, base + m, bm * eL[m]))
                if bp != 0.0:
                    bal_hat_entries.append((pl, pl, bp))

        for p, bn in zip(bd.outflow_points, bd.outflow_abs):
            if int(p) not in dirichlet:
                bal_hat_entries.append((int(p), int(p), float(bn)))
        for p in dirichlet:
            bal_hat_entries.append((p, p, 1.0))

        nh = hmap.n_hybrid
        self.local = _coo((self.n_dofs, self.n_dofs), local_entries)
        self.coupling = _coo((self.n_dofs, nh), coupling_entries)
        self.balance_u = _coo((nh, self.n_dofs), bal_u_entries)
        self.balance_hat = _coo((nh, nh), bal_hat_entries)

    def _g_vector(self, gvals: np.ndarray) -> np.ndarray:
        rhs = np.zeros(self.hybrid_map.n_hybrid)
        rhs[self.g_rows] = gvals
        return rhs

    def reconstruct(self, u: np.ndarray, gvals: np.ndarray) -> np.ndarray:
        """Traces solving the balance equations for a given element state."""
        rhs = self._g_vector(gvals) - self.balance_u @ u
        return spla.spsolve(self.balance_hat.tocsc(), rhs)

    def step_implicit_euler(self, u: np.ndarray, tau: float, gvals_next: np.ndarray):
        n = self.n_dofs
        system = sp.bmat([
            [sp.diags(self.mass_diag) + tau * self.local, tau * self.coupling],
            [self.balance_u, self.balance_hat],
        ], format="csc")
        rhs = np.concatenate([self.mass_diag * u, self._g_vector(gvals_next)])
        sol = spla.spsolve(system, rhs)
        return sol[:n], sol[n:]


def assemble_coupled(network: Network, mesh: Mesh, basis: Basis) -> CoupledSystem:
    return CoupledSystem(network, mesh, basis)
