"""Command-line interface: validate, run, converge, oracle.

Exit codes: 0 success, 1 domain failure (invalid network, out-of-range
query), 2 malformed config, 3 solver failure, 4 exact solution unavailable.
All floats are serialized with 17 significant digits so repeated runs
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__, bundled_config_path
from .exact import ExactSolution, OracleUnavailableError, run_convergence_study
from .meshing import Basis, build_mesh
from .network import ConfigError, check_compatibility, load_network, validate
from .operator import assemble
from .stepping import SolverError, StepperConfig, simulate

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_PARSE = 2
EXIT_SOLVER = 3
EXIT_NO_ORACLE = 4


def _fmt(x) -> str:
    return "%.17g" % float(x)


def _load_valid_network(path, out=sys.stdout):
    network = load_network(path)
    report = validate(network)
    if not report.ok:
        print(report.describe(), file=out)
        return network, False
    return network, True


def _cmd_validate(args) -> int:
    network = load_network(args.config)
    report = validate(network)
    if args.json:
        payload = {
            "valid": report.ok,
            "junctions": report.n_junctions,
            "failures": [
                {"check": f.check, "location": f.location,
                 "message": f.message, "defect": f.defect}
                for f in report.failures
            ],
        }
        if report.ok:
            compat = check_compatibility(network)
            payload["compatible_at_t0"] = compat.ok
        print(json.dumps(payload, indent=2, sort_keys=True))
        return EXIT_OK if report.ok else EXIT_DOMAIN
    print(report.describe())
    if not report.ok:
        return EXIT_DOMAIN
    compat = check_compatibility(network)
    print(compat.describe())
    return EXIT_OK


def _snapshot_rows(series, system, every: int):
    mesh, basis = system.mesh, system.basis
    nd = basis.n_dof
    indices = list(range(0, len(series.times), max(1, every)))
    if indices[-1] != len(series.times) - 1:
        indices.append(len(series.times) - 1)
    for n in indices:
        state = series.states[n]
        for eid in mesh.edge_order:
            off = mesh.offsets[eid]
            pts = system.hybrid_map.point_index[eid]
            for i in range(mesh.num_elements[eid]):
                xl, xr = mesh.element_interval(eid, i)
                xm, half = 0.5 * (xl + xr), 0.5 * (xr - xl)
                coeffs = state.u[(off + i) * nd:(off + i + 1) * nd]
                values = basis.node_vand @ coeffs
                uhat_l = state.uhat[pts[i]]
                uhat_r = state.uhat[pts[i + 1]]
                for node, value in zip(xm + half * basis.nodes, values):
                    yield (state.t, eid, i, node, value, uhat_l, uhat_r)


def _write_snapshots(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,edge,element,node_x,value,uhat_left,uhat_right\n")
        for t, eid, i, x, val, ul, ur in rows:
            fh.write(f"{_fmt(t)},{eid},{i},{_fmt(x)},{_fmt(val)},{_fmt(ul)},{_fmt(ur)}\n")


def _write_diagnostics(path: Path, series, boundary_vertices) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        flux_cols = ",".join(f"boundary_flux_{v}" for v in boundary_vertices)
        fh.write("t,mass,energy,jump_dissipation,outflow_dissipation,inflow_power"
                 + ("," + flux_cols if flux_cols else "") + "\n")
        for t, diag in zip(series.times, series.diagnostics):
            row = [_fmt(t), _fmt(diag.mass), _fmt(diag.energy),
                   _fmt(diag.jump_dissipation), _fmt(diag.outflow_dissipation),
                   _fmt(diag.inflow_power)]
            row += [_fmt(diag.boundary_fluxes[v]) for v in boundary_vertices]
            fh.write(",".join(row) + "\n")


def _cmd_run(args) -> int:
    network, ok = _load_valid_network(args.config)
    if not ok:
        return EXIT_DOMAIN
    compat = check_compatibility(network)
    if not compat.ok:
        print("warning: " + compat.describe(), file=sys.stderr)

    basis = Basis(args.order)
    mesh = build_mesh(network, target_h=args.h)
    tau = args.tau if args.tau is not None else mesh.h**2
    system = assemble(network, mesh, basis)
    config = StepperConfig(tau=tau, t_final=args.T, scheme=args.scheme)
    series = simulate(network, mesh, basis, config, system=system)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    boundary_vertices = list(system.boundary.vertices)
    _write_diagnostics(outdir / "diagnostics.csv", series, boundary_vertices)
    _write_snapshots(outdir / "snapshots.csv",
                     _snapshot_rows(series, system, args.snapshot_every))

    if args.oracle_out:
        exact = ExactSolution(network)
        _write_snapshots(outdir / "oracle.csv",
                         _oracle_rows(series, system, exact, args.snapshot_every))

    meta = {
        "T": args.T,
        "config_hash": hashlib.sha256(Path(args.config).read_bytes()).hexdigest(),
        "h": mesh.h,
        "n_dofs": system.n_dofs,
        "n_edges": len(network.edges),
        "n_elements": mesh.n_elements,
        "n_hybrid": system.hybrid_map.n_hybrid,
        "n_steps": len(series.times) - 1,
        "order": args.order,
        "scheme": args.scheme,
        "target_h": args.h,
        "tau": tau,
        "version": __version__,
    }
    with open(outdir / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {outdir / 'diagnostics.csv'} and {outdir / 'snapshots.csv'}")
    return EXIT_OK


def _oracle_rows(series, system, exact, every: int):
    mesh, basis = system.mesh, system.basis
    indices = list(range(0, len(series.times), max(1, every)))
    if indices[-1] != len(series.times) - 1:
        indices.append(len(series.times) - 1)
    for n in indices:
        t = float(series.times[n])
        for eid in mesh.edge_order:
            for i in range(mesh.num_elements[eid]):
                xl, xr = mesh.element_interval(eid, i)
                xm, half = 0.5 * (xl + xr), 0.5 * (xr - xl)
                ul = exact.evaluate(eid, xl, t)
                ur = exact.evaluate(eid, xr, t)
                for node in xm + half * basis.nodes:
                    yield (t, eid, i, node, exact.evaluate(eid, float(node), t), ul, ur)


def _cmd_converge(args) -> int:
    network, ok = _load_valid_network(args.config)
    if not ok:
        return EXIT_DOMAIN
    h_list = [args.h0 * 0.5**i for i in range(args.levels)]
    report = run_convergence_study(network, args.order, h_list, args.T)

    print(f"{'h':>12} {'err':>14} {'rate':>10}")
    for lv in report.levels:
        rate = f"{lv.rate:10.4f}" if lv.rate is not None else f"{'---':>10}"
        print(f"{lv.h:12.6g} {lv.err:14.6e} {rate}")

    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "convergence.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("h,tau,err,rate,k\n")
            for lv in report.levels:
                rate = _fmt(lv.rate) if lv.rate is not None else ""
                fh.write(f"{_fmt(lv.h)},{_fmt(lv.tau)},{_fmt(lv.err)},{rate},{report.degree}\n")
        print(f"wrote {outdir / 'convergence.csv'}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    network, ok = _load_valid_network(args.config)
    if not ok:
        return EXIT_DOMAIN
    exact = ExactSolution(network)
    try:
        value = exact.evaluate(args.edge, args.x, args.t)
    except KeyError:
        print(f"unknown edge {args.edge!r}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DOMAIN
    print(_fmt(value))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netadvect",
        description="Transport on directed pipe networks: upwind hybrid-DG solver.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a network config")
    p.add_argument("config")
    p.add_argument("--json", action="store_true", help="machine-readable report")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("run", help="simulate and write CSV outputs")
    p.add_argument("config")
    p.add_argument("--h", type=float, default=0.25, help="target mesh size")
    p.add_argument("--order", type=int, default=1, help="polynomial degree")
    p.add_argument("--tau", type=float, default=None, help="time step (default h^2)")
    p.add_argument("--T", type=float, default=5.0, help="final time")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--snapshot-every", type=int, default=1, metavar="N",
                   help="write every N-th step to snapshots.csv")
    p.add_argument("--scheme", choices=("implicit-euler", "crank-nicolson"),
                   default="implicit-euler")
    p.add_argument("--oracle-out", action="store_true",
                   help="also write oracle.csv with the exact solution sampled like snapshots.csv")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("converge", help="mesh refinement study against the exact solution")
    p.add_argument("config")
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--levels", type=int, default=6)
    p.add_argument("--T", type=float, default=5.0)
    p.add_argument("--h0", type=float, default=1.0, help="coarsest mesh size")
    p.add_argument("--out", default=None, help="directory for convergence.csv")
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("oracle", help="evaluate the exact solution at a point")
    p.add_argument("config")
    p.add_argument("--edge", required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("bundled", help="print the path of a bundled example config")
    p.add_argument("name", nargs="?", default="diamond_network")
    p.set_defaults(func=lambda a: (print(bundled_config_path(a.name)), EXIT_OK)[1])

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OracleUnavailableError as exc:
        print(f"exact solution unavailable: {exc}", file=sys.stderr)
        return EXIT_NO_ORACLE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
