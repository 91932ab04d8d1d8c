"""Directed pipe networks: data model, vertex classification, validation.

A network is a finite directed graph whose edges carry a length, a constant
cross-section area, and a constant signed volume flow rate.  Concentration
enters through inflow boundary signals and per-edge polynomial initial data.
All objects are immutable values after construction; the functions here are
pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

__all__ = [
    "BoundarySignal",
    "CheckFailure",
    "CompatibilityReport",
    "ConfigError",
    "Edge",
    "Network",
    "ValidationReport",
    "VertexClassification",
    "VertexKind",
    "check_compatibility",
    "classify",
    "incidence",
    "load_network",
    "network_from_dict",
    "network_to_dict",
    "save_network",
    "validate",
]

# named signals accepted in config files; "quadratic25" is t^2/25
_BUILTIN_COEFFS = {
    "zero": (),
    "quadratic25": (0.0, 0.0, 0.04),
}
_BUILTIN_ALIASES = {"quadratic": "quadratic25"}

DEFAULT_AREA_FLOOR = 1.0e-6


class ConfigError(ValueError):
    """A network config file is malformed (parse or schema error)."""


@dataclass(frozen=True)
class BoundarySignal:
    """Inflow concentration signal g(t) = sum_i coeffs[i] * t**i.

    Built from an explicit coefficient list or a named builtin; the name is
    kept so a config round-trips unchanged.
    """

    coeffs: tuple[float, ...] = ()
    name: str | None = None

    @classmethod
    def zero(cls) -> "BoundarySignal":
        return cls(coeffs=(), name="zero")

    @classmethod
    def builtin(cls, name: str) -> "BoundarySignal":
        key = _BUILTIN_ALIASES.get(name, name)
        if key not in _BUILTIN_COEFFS:
            raise ConfigError(f"unknown builtin signal {name!r}")
        return cls(coeffs=_BUILTIN_COEFFS[key], name=key)

    @classmethod
    def polynomial(cls, coeffs) -> "BoundarySignal":
        return cls(coeffs=tuple(float(c) for c in coeffs), name=None)

    def __call__(self, t):
        if not self.coeffs:
            return np.zeros_like(np.asarray(t, dtype=float)) if np.ndim(t) else 0.0
        return np.polynomial.polynomial.polyval(t, np.asarray(self.coeffs))

    def to_spec(self) -> dict:
        if self.name is not None:
            return {"type": "builtin", "name": self.name}
        return {"type": "poly", "coeffs": list(self.coeffs)}

    @classmethod
    def from_spec(cls, spec: Mapping) -> "BoundarySignal":
        if not isinstance(spec, Mapping) or "type" not in spec:
            raise ConfigError(f"signal spec must be an object with a 'type' key, got {spec!r}")
        kind = spec["type"]
        if kind == "builtin":
            return cls.builtin(spec.get("name", ""))
        if kind == "poly":
            coeffs = spec.get("coeffs")
            if not isinstance(coeffs, (list, tuple)):
                raise ConfigError("poly signal needs a 'coeffs' list")
            return cls.polynomial(coeffs)
        raise ConfigError(f"unknown signal type {kind!r}")


@dataclass(frozen=True)
class Edge:
    """One pipe, identified with the interval [0, length].

    ``flow`` is the signed volume flow rate relative to the tail->head
    orientation; ``area`` is the constant cross-section.
    """

    id: str
    tail: str
    head: str
    length: float
    area: float
    flow: float


def incidence(edge: Edge, vertex: str) -> int:
    """-1 at the edge's start vertex, +1 at its end vertex, 0 otherwise."""
    if vertex == edge.tail:
        return -1
    if vertex == edge.head:
        return 1
    return 0


@dataclass(frozen=True)
class Network:
    """Directed pipe network with boundary signals and initial data.

    ``inflow`` maps inflow-boundary vertex ids to signals; ``initial`` maps
    edge ids to polynomial coefficients in the edge coordinate x (edges
    without an entry start from zero).
    """

    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]
    inflow: Mapping[str, BoundarySignal] = field(default_factory=dict)
    initial: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    area_floor: float = DEFAULT_AREA_FLOOR

    def edge(self, edge_id: str) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(edge_id)

    def initial_coeffs(self, edge_id: str) -> tuple[float, ...]:
        return tuple(self.initial.get(edge_id, ()))

    def initial_value(self, edge_id: str, x):
        coeffs = self.initial_coeffs(edge_id)
        if not coeffs:
            return np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0
        return np.polynomial.polynomial.polyval(x, np.asarray(coeffs))


class VertexKind(str, Enum):
    JUNCTION = "junction"
    INFLOW = "inflow"
    OUTFLOW = "outflow"
    ISOLATED = "isolated"


@dataclass(frozen=True)
class VertexClassification:
    """Per-vertex incident edges, flow-direction split, and vertex kind.

    ``inflow_edges[v]`` holds the edges carrying flow into v and
    ``outflow_edges[v]`` those carrying flow away; edges with zero flow rate
    (rejected by validate) appear in neither set.
    """

    edges_at: Mapping[str, tuple[str, ...]]
    inflow_edges: Mapping[str, tuple[str, ...]]
    outflow_edges: Mapping[str, tuple[str, ...]]
    kind: Mapping[str, VertexKind]

    def vertices_of_kind(self, kind: VertexKind) -> tuple[str, ...]:
        return tuple(v for v, k in self.kind.items() if k is kind)

    @property
    def junctions(self) -> tuple[str, ...]:
        return self.vertices_of_kind(VertexKind.JUNCTION)

    @property
    def inflow_boundary(self) -> tuple[str, ...]:
        return self.vertices_of_kind(VertexKind.INFLOW)

    @property
    def outflow_boundary(self) -> tuple[str, ...]:
        return self.vertices_of_kind(VertexKind.OUTFLOW)


def classify(network: Network) -> VertexClassification:
    """Split incident edges by flow direction and categorize every vertex.

    Boundary vertices (degree one) are inflow if their edge carries flow out
    of the vertex into the network, outflow otherwise.  Vertices of degree
    two or more are junctions.
    """
    known = set(network.vertices)
    for e in network.edges:
        if e.tail not in known or e.head not in known:
            raise ValueError(f"edge {e.id!r} references unknown vertex")

    edges_at: dict[str, list[str]] = {v: [] for v in network.vertices}
    into: dict[str, list[str]] = {v: [] for v in network.vertices}
    outof: dict[str, list[str]] = {v: [] for v in network.vertices}
    for e in network.edges:
        for v in {e.tail, e.head}:
            bn = e.flow * incidence(e, v)
            edges_at[v].append(e.id)
            if bn > 0:
                into[v].append(e.id)
            elif bn < 0:
                outof[v].append(e.id)

    kind: dict[str, VertexKind] = {}
    for v in network.vertices:
        deg = len(edges_at[v])
        if deg >= 2:
            kind[v] = VertexKind.JUNCTION
        elif deg == 1:
            if into[v]:
                kind[v] = VertexKind.OUTFLOW
            elif outof[v]:
                kind[v] = VertexKind.INFLOW
            else:  # zero flow rate, caught by validate
                kind[v] = VertexKind.ISOLATED
        else:
            kind[v] = VertexKind.ISOLATED

    return VertexClassification(
        edges_at={v: tuple(ids) for v, ids in edges_at.items()},
        inflow_edges={v: tuple(ids) for v, ids in into.items()},
        outflow_edges={v: tuple(ids) for v, ids in outof.items()},
        kind=kind,
    )


@dataclass(frozen=True)
class CheckFailure:
    check: str
    location: str
    message: str
    defect: float | None = None


@dataclass(frozen=True)
class ValidationReport:
    failures: tuple[CheckFailure, ...]
    n_junctions: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return f"valid: flow conservation (C) satisfied at {self.n_junctions} junctions"
        lines = [f"invalid: {len(self.failures)} check(s) failed"]
        lines += [f"  [{f.check}] {f.location}: {f.message}" for f in self.failures]
        return "\n".join(lines)


def _connected(network: Network) -> bool:
    if not network.vertices:
        return False
    adj: dict[str, set[str]] = {v: set() for v in network.vertices}
    for e in network.edges:
        if e.tail in adj and e.head in adj:
            adj[e.tail].add(e.head)
            adj[e.head].add(e.tail)
    seen = {network.vertices[0]}
    stack = [network.vertices[0]]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(network.vertices)


def validate(network: Network) -> ValidationReport:
    """Check the structural and flow assumptions; never raises.

    Passing requires: well-formed connected graph, positive lengths, areas
    above the configured floor, nonzero flow rates, signed flow balance at
    every junction (within a near-machine tolerance), and boundary signals
    exactly at the inflow boundary vertices.
    """
    fails: list[CheckFailure] = []

    seen_v = set()
    for v in network.vertices:
        if v in seen_v:
            fails.append(CheckFailure("structure", v, "duplicate vertex id"))
        seen_v.add(v)
    seen_e = set()
    for e in network.edges:
        if e.id in seen_e:
            fails.append(CheckFailure("structure", e.id, "duplicate edge id"))
        seen_e.add(e.id)
        if e.tail not in seen_v or e.head not in seen_v:
            fails.append(CheckFailure("structure", e.id, "endpoint is not a listed vertex"))
        if e.tail == e.head:
            fails.append(CheckFailure("structure", e.id, "self-loop"))
    if not network.edges:
        fails.append(CheckFailure("structure", "-", "network has no edges"))
    if fails:
        return ValidationReport(tuple(fails))

    for e in network.edges:
        if not e.length > 0:
            fails.append(CheckFailure("positivity", e.id, f"length {e.length} is not positive"))
        if not e.area >= network.area_floor:
            fails.append(CheckFailure(
                "positivity", e.id,
                f"area {e.area} below floor {network.area_floor}"))
        if e.flow == 0:
            fails.append(CheckFailure("flow", e.id, "zero flow rate"))

    if not _connected(network):
        fails.append(CheckFailure("connectivity", "-", "graph is not connected"))

    cls = classify(network)
    eps_c = 1e-12 * max(abs(e.flow) for e in network.edges)
    n_junctions = 0
    edge_map = {e.id: e for e in network.edges}
    for v in cls.junctions:
        n_junctions += 1
        total = sum(edge_map[eid].flow * incidence(edge_map[eid], v) for eid in cls.edges_at[v])
        if abs(total) > eps_c:
            fails.append(CheckFailure(
                "flow-conservation", v,
                f"signed flow rates sum to {total:.6g} (tolerance {eps_c:.3g})",
                defect=abs(total)))

    for v in cls.inflow_boundary:
        if v not in network.inflow:
            fails.append(CheckFailure("boundary-data", v, "inflow boundary vertex has no signal"))
    for v in network.inflow:
        if v not in seen_v:
            fails.append(CheckFailure("boundary-data", v, "signal attached to unknown vertex"))
        elif cls.kind[v] is not VertexKind.INFLOW:
            fails.append(CheckFailure(
                "boundary-data", v,
                f"signal attached to {cls.kind[v].value} vertex"))
    for eid in network.initial:
        if eid not in edge_map:
            fails.append(CheckFailure("initial-data", eid, "initial data for unknown edge"))

    return ValidationReport(tuple(fails), n_junctions=n_junctions)


@dataclass(frozen=True)
class CompatibilityReport:
    """Advisory check that initial and boundary data match at time zero."""

    mismatches: tuple[CheckFailure, ...]
    tolerance: float

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def describe(self) -> str:
        if self.ok:
            return "initial and boundary data are compatible at t = 0"
        lines = [f"incompatible at {len(self.mismatches)} vertex/edge pair(s)"]
        lines += [f"  {m.location}: {m.message}" for m in self.mismatches]
        return "\n".join(lines)


def check_compatibility(network: Network, tol: float | None = None) -> CompatibilityReport:
    """Evaluate the t = 0 coupling values and compare against initial traces.

    The mixing value at every junction and outflow vertex is formed from the
    initial traces of the edges flowing in; outgoing edges must start from
    that value, and edges leaving an inflow vertex must start from g(0).
    Report-only: simulations may proceed on a failing report.
    """
    cls = classify(network)
    edge_map = {e.id: e for e in network.edges}

    scale = 1.0
    for e in network.edges:
        c = network.initial_coeffs(e.id)
        if c:
            scale = max(scale, float(np.max(np.abs(c))))
    for sig in network.inflow.values():
        if sig.coeffs:
            scale = max(scale, float(np.max(np.abs(sig.coeffs))))
    tol = 1e-10 * scale if tol is None else tol

    def trace(eid: str, v: str) -> float:
        e = edge_map[eid]
        x = 0.0 if v == e.tail else e.length
        return float(network.initial_value(eid, x))

    uhat0: dict[str, float] = {}
    for v in network.vertices:
        if cls.kind[v] is VertexKind.INFLOW:
            sig = network.inflow.get(v, BoundarySignal.zero())
            uhat0[v] = float(sig(0.0))
        else:
            wsum = 0.0
            acc = 0.0
            for eid in cls.inflow_edges[v]:
                e = edge_map[eid]
                w = e.flow * incidence(e, v)
                wsum += w
                acc += w * trace(eid, v)
            if wsum > 0:
                uhat0[v] = acc / wsum

    mismatches = []
    for v in network.vertices:
        if v not in uhat0:
            continue
        for eid in cls.outflow_edges[v]:
            defect = abs(trace(eid, v) - uhat0[v])
            if defect > tol:
                mismatches.append(CheckFailure(
                    "compatibility", f"{v}/{eid}",
                    f"initial trace {trace(eid, v):.6g} != coupling value {uhat0[v]:.6g}",
                    defect=defect))
    return CompatibilityReport(tuple(mismatches), tolerance=tol)


# -- config (de)serialization -------------------------------------------------

def network_from_dict(data: Mapping) -> Network:
    if not isinstance(data, Mapping):
        raise ConfigError("config root must be a JSON object")
    for key in ("vertices", "edges"):
        if key not in data:
            raise ConfigError(f"config is missing the {key!r} key")
    vertices = data["vertices"]
    if not isinstance(vertices, list) or not all(isinstance(v, str) for v in vertices):
        raise ConfigError("'vertices' must be a list of string ids")

    edges = []
    for i, spec in enumerate(data["edges"]):
        if not isinstance(spec, Mapping):
            raise ConfigError(f"edge #{i} must be an object")
        try:
            edges.append(Edge(
                id=str(spec["id"]),
                tail=str(spec["tail"]),
                head=str(spec["head"]),
                length=float(spec["length"]),
                area=float(spec["area"]),
                flow=float(spec["flow"]),
            ))
        except KeyError as exc:
            raise ConfigError(f"edge #{i} is missing key {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"edge #{i}: {exc}") from exc

    inflow = {}
    for v, spec in dict(data.get("inflow", {})).items():
        inflow[str(v)] = BoundarySignal.from_spec(spec)

    initial = {}
    for eid, coeffs in dict(data.get("initial", {})).items():
        if not isinstance(coeffs, (list, tuple)):
            raise ConfigError(f"initial data for edge {eid!r} must be a coefficient list")
        try:
            initial[str(eid)] = tuple(float(c) for c in coeffs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"initial data for edge {eid!r}: {exc}") from exc

    try:
        area_floor = float(data.get("a0", DEFAULT_AREA_FLOOR))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'a0': {exc}") from exc

    return Network(
        vertices=tuple(str(v) for v in vertices),
        edges=tuple(edges),
        inflow=inflow,
        initial=initial,
        area_floor=area_floor,
    )


def network_to_dict(network: Network) -> dict:
    return {
        "vertices": list(network.vertices),
        "edges": [
            {"id": e.id, "tail": e.tail, "head": e.head,
             "length": e.length, "area": e.area, "flow": e.flow}
            for e in network.edges
        ],
        "inflow": {v: sig.to_spec() for v, sig in network.inflow.items()},
        "initial": {eid: list(c) for eid, c in network.initial.items()},
        "a0": network.area_floor,
    }


def load_network(path) -> Network:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return network_from_dict(data)


def save_network(network: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(network), fh, indent=2, sort_keys=True)
        fh.write("\n")
