"""Element meshes, Legendre reference basis, quadrature, hybrid numbering.

Every edge carries its own uniform partition; element polynomials are
expressed in the orthonormal Legendre basis on the reference interval
[-1, 1], so element mass matrices with constant cross-section are diagonal.
"""

from __future__ import annotations

import math
from typing import Callable, Mapping

import numpy as np

from .network import Network

__all__ = [
    "Basis",
    "HybridIndexMap",
    "Mesh",
    "build_hybrid_map",
    "build_mesh",
    "element_l2_coeffs",
    "element_nodal_coeffs",
    "eval_coeffs",
    "l2_project_initial",
    "nodal_interpolant",
    "outflow_matching_projection",
]


class Basis:
    """Orthonormal Legendre basis of degree <= k with a Gauss rule.

    phi_n(xi) = sqrt(n + 1/2) * P_n(xi) on [-1, 1], so that
    (phi_m, phi_n)_{[-1,1]} = delta_{mn}.  The quadrature uses k + 2 Gauss
    points, exact for polynomials of degree 2k + 3, which covers every
    integrand assembled here with constant coefficients.
    """

    def __init__(self, degree: int):
        if degree < 0:
            raise ValueError("polynomial degree must be >= 0")
        self.degree = int(degree)
        self.n_dof = self.degree + 1
        q = self.degree + 2
        self.quad_nodes, self.quad_weights = np.polynomial.legendre.leggauss(q)

        scale = np.sqrt(np.arange(self.n_dof) + 0.5)
        self.values = np.polynomial.legendre.legvander(self.quad_nodes, self.degree) * scale

        polys = [np.polynomial.legendre.Legendre.basis(n) for n in range(self.n_dof)]
        self.derivs = np.column_stack(
            [p.deriv()(self.quad_nodes) if n > 0 else np.zeros(q)
             for n, p in enumerate(polys)]) * scale

        self.at_left = np.polynomial.legendre.legvander(np.array([-1.0]), self.degree)[0] * scale
        self.at_right = np.polynomial.legendre.legvander(np.array([1.0]), self.degree)[0] * scale

        # conv[m, n] = int_{-1}^{1} phi_n phi_m' dxi  (reference convection)
        self.conv = self.derivs.T @ (self.quad_weights[:, None] * self.values)

        self.nodes = self._lobatto_nodes()
        vand = np.polynomial.legendre.legvander(self.nodes, self.degree) * scale
        self.node_vand = vand
        self.node_vand_inv = np.linalg.inv(vand)

    def _lobatto_nodes(self) -> np.ndarray:
        # k + 1 interpolation nodes; Gauss-Lobatto includes the endpoints,
        # matching endpoint interpolation for k = 1.  A single node is placed
        # at the midpoint (k = 0).
        k = self.degree
        if k == 0:
            return np.array([0.0])
        if k == 1:
            return np.array([-1.0, 1.0])
        inner = np.polynomial.legendre.Legendre.basis(k).deriv().roots()
        return np.concatenate(([-1.0], np.sort(np.real(inner)), [1.0]))

    def eval_ref(self, coeffs: np.ndarray, xi) -> np.ndarray:
        scale = np.sqrt(np.arange(self.n_dof) + 0.5)
        return np.polynomial.legendre.legval(xi, np.asarray(coeffs) * scale)


class Mesh:
    """Per-edge breakpoints with a global element numbering.

    Elements are numbered edge by edge in the order the edges appear in the
    network, left to right within each edge.
    """

    def __init__(self, breakpoints: Mapping[str, np.ndarray]):
        self.breakpoints = {eid: np.asarray(pts, dtype=float) for eid, pts in breakpoints.items()}
        for eid, pts in self.breakpoints.items():
            if pts.ndim != 1 or len(pts) < 2:
                raise ValueError(f"edge {eid!r}: need at least two breakpoints")
            if not np.all(np.diff(pts) > 0):
                raise ValueError(f"edge {eid!r}: breakpoints must be strictly increasing")
        self.num_elements = {eid: len(pts) - 1 for eid, pts in self.breakpoints.items()}
        self.element_sizes = {eid: np.diff(pts) for eid, pts in self.breakpoints.items()}
        self.h = max(float(np.max(hs)) for hs in self.element_sizes.values())

        self.edge_order = list(self.breakpoints.keys())
        self.offsets = {}
        off = 0
        for eid in self.edge_order:
            self.offsets[eid] = off
            off += self.num_elements[eid]
        self.n_elements = off

    def element_interval(self, edge_id: str, i: int) -> tuple[float, float]:
        pts = self.breakpoints[edge_id]
        return float(pts[i]), float(pts[i + 1])

    def locate(self, edge_id: str, x: float) -> tuple[int, float]:
        """Element index and reference coordinate of a point on an edge."""
        pts = self.breakpoints[edge_id]
        if not (pts[0] - 1e-12 <= x <= pts[-1] + 1e-12):
            raise ValueError(f"x = {x} outside edge {edge_id!r}")
        i = int(np.clip(np.searchsorted(pts, x, side="right") - 1, 0, len(pts) - 2))
        xl, xr = pts[i], pts[i + 1]
        xi = 2.0 * (x - xl) / (xr - xl) - 1.0
        return i, float(np.clip(xi, -1.0, 1.0))


def build_mesh(network: Network, target_h: float | None = None,
               counts: int | Mapping[str, int] | None = None) -> Mesh:
    """Uniform per-edge partitions, ceil(length / target_h) elements each.

    Alternatively fixes the element count per edge (one int for all edges or
    a per-edge mapping).
    """
    if (target_h is None) == (counts is None):
        raise ValueError("give exactly one of target_h or counts")
    breakpoints = {}
    for e in network.edges:
        if counts is not None:
            m = counts if isinstance(counts, int) else counts[e.id]
        else:
            if not target_h > 0:
                raise ValueError("target_h must be positive")
            # guard against float noise in exact divisions (1/0.1 -> 10.000000000000002)
            m = int(math.ceil(e.length / target_h - 1e-12))
        if m < 1:
            raise ValueError(f"edge {e.id!r}: element count must be >= 1")
        breakpoints[e.id] = np.linspace(0.0, e.length, m + 1)
    return Mesh(breakpoints)


class HybridIndexMap:
    """Global numbering of grid-point unknowns with junction identification.

    Indices 0 .. |V|-1 belong to the vertices (in network order); interior
    grid points follow edge by edge.  Every element endpoint that meets a
    vertex shares that vertex's index, so the total count is
    |V| + sum_e (M_e - 1).
    """

    def __init__(self, network: Network, mesh: Mesh):
        self.vertex_index = {v: i for i, v in enumerate(network.vertices)}
        self.point_index = {}
        nxt = len(network.vertices)
        for e in network.edges:
            m = mesh.num_elements[e.id]
            idx = np.empty(m + 1, dtype=int)
            idx[0] = self.vertex_index[e.tail]
            idx[m] = self.vertex_index[e.head]
            for i in range(1, m):
                idx[i] = nxt
                nxt += 1
            self.point_index[e.id] = idx
        self.n_hybrid = nxt

        self.inflow_vertices = tuple(v for v in network.vertices if v in network.inflow)
        self.inflow_column = {v: j for j, v in enumerate(self.inflow_vertices)}
        self.inflow_mask = np.zeros(self.n_hybrid, dtype=bool)
        for v in self.inflow_vertices:
            self.inflow_mask[self.vertex_index[v]] = True


def build_hybrid_map(network: Network, mesh: Mesh) -> HybridIndexMap:
    return HybridIndexMap(network, mesh)


# -- element-level projection and interpolation -------------------------------

def element_l2_coeffs(f: Callable, xl: float, xr: float, basis: Basis,
                      quad_points: int | None = None) -> np.ndarray:
    """L2-orthogonal projection of f onto P_k on [xl, xr].

    Exact whenever f is a polynomial the quadrature integrates exactly
    against P_k (degree <= k + 3 with the built-in rule); pass a larger
    ``quad_points`` to project general smooth functions accurately.
    """
    xm, half = 0.5 * (xl + xr), 0.5 * (xr - xl)
    if quad_points is None:
        nodes, weights, vander = basis.quad_nodes, basis.quad_weights, basis.values
    else:
        nodes, weights = np.polynomial.legendre.leggauss(quad_points)
        vander = np.polynomial.legendre.legvander(nodes, basis.degree) \
            * np.sqrt(np.arange(basis.n_dof) + 0.5)
    fvals = np.asarray(f(xm + half * nodes), dtype=float)
    return vander.T @ (weights * fvals)


def element_nodal_coeffs(f: Callable, xl: float, xr: float, basis: Basis) -> np.ndarray:
    """Nodal interpolation of f at the basis interpolation nodes."""
    xm, half = 0.5 * (xl + xr), 0.5 * (xr - xl)
    fvals = np.asarray(f(xm + half * basis.nodes), dtype=float)
    return basis.node_vand_inv @ fvals


def outflow_matching_projection(f: Callable, xl: float, xr: float, basis: Basis,
                                flow_sign: float, quad_points: int | None = None) -> np.ndarray:
    """Degree-k projection matching f at the element's outflow endpoint.

    The outflow endpoint is xr for positive flow, xl otherwise; the remainder
    f - p is L2-orthogonal to P_{k-1}.  For k = 0 this reduces to endpoint
    interpolation.
    """
    if flow_sign == 0:
        raise ValueError("flow sign must be nonzero")
    coeffs = element_l2_coeffs(f, xl, xr, basis, quad_points=quad_points)
    k = basis.degree
    if flow_sign > 0:
        x_out, phi_out = xr, basis.at_right
    else:
        x_out, phi_out = xl, basis.at_left
    target = float(f(x_out))
    partial = float(phi_out[:k] @ coeffs[:k]) if k > 0 else 0.0
    coeffs = coeffs.copy()
    coeffs[k] = (target - partial) / phi_out[k]
    return coeffs


def l2_project_initial(network: Network, mesh: Mesh, basis: Basis) -> np.ndarray:
    """Elementwise L2 projection of the network's initial data."""
    u = np.zeros(mesh.n_elements * basis.n_dof)
    for e in network.edges:
        coeffs = network.initial_coeffs(e.id)
        if not coeffs:
            continue
        f = lambda x, c=np.asarray(coeffs): np.polynomial.polynomial.polyval(x, c)
        off = mesh.offsets[e.id]
        for i in range(mesh.num_elements[e.id]):
            xl, xr = mesh.element_interval(e.id, i)
            sl = slice((off + i) * basis.n_dof, (off + i + 1) * basis.n_dof)
            u[sl] = element_l2_coeffs(f, xl, xr, basis)
    return u


def nodal_interpolant(funcs: Mapping[str, Callable], mesh: Mesh, basis: Basis) -> np.ndarray:
    """Elementwise nodal interpolant of per-edge functions."""
    u = np.zeros(mesh.n_elements * basis.n_dof)
    for eid in mesh.edge_order:
        f = funcs[eid]
        off = mesh.offsets[eid]
        for i in range(mesh.num_elements[eid]):
            xl, xr = mesh.element_interval(eid, i)
            sl = slice((off + i) * basis.n_dof, (off + i + 1) * basis.n_dof)
            u[sl] = element_nodal_coeffs(f, xl, xr, basis)
    return u


def eval_coeffs(u: np.ndarray, mesh: Mesh, basis: Basis, edge_id: str, x: float) -> float:
    """Point value of an element coefficient vector on an edge."""
    i, xi = mesh.locate(edge_id, x)
    off = mesh.offsets[edge_id]
    sl = slice((off + i) * basis.n_dof, (off + i + 1) * basis.n_dof)
    return float(basis.eval_ref(u[sl], xi))
