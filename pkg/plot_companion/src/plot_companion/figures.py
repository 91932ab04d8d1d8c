"""Snapshot and convergence figures from solver CSV rows."""

from __future__ import annotations

import csv
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .csvio import ConvergenceRow, SnapshotRow


def _edge_order(rows):
    seen = []
    for r in rows:
        if r.edge not in seen:
            seen.append(r.edge)
    return seen


def pick_time(rows: list[SnapshotRow], t_request: float) -> tuple[float, bool]:
    """Stored time closest to the request; flags a non-exact match."""
    times = sorted({r.t for r in rows})
    t_sel = min(times, key=lambda t: abs(t - t_request))
    return t_sel, abs(t_sel - t_request) > 1e-9 * max(1.0, abs(t_request))


def _edge_curves(rows: list[SnapshotRow], t_sel: float):
    """Per edge: node coordinates and values ordered by element, with the
    element index kept so callers can break lines at element boundaries."""
    curves = {}
    for eid in _edge_order(rows):
        pts = [(r.element, r.node_x, r.value)
               for r in rows if r.edge == eid and r.t == t_sel]
        pts.sort(key=lambda p: (p[0], p[1]))
        curves[eid] = pts
    return curves


def plot_snapshot(rows: list[SnapshotRow], t_request: float, out_path,
                  oracle_rows: list[SnapshotRow] | None = None) -> float:
    """One panel per edge; dG curve dashed with breaks between elements,
    optional exact-solution overlay solid.  Writes the image plus a
    ``<stem>.curves.csv`` sidecar with the sampled dG curve data.

    Returns the stored time actually plotted.
    """
    t_sel, fallback = pick_time(rows, t_request)
    if fallback:
        print(f"warning: requested t = {t_request} not stored; using nearest t = {t_sel}",
              file=sys.stderr)
    curves = _edge_curves(rows, t_sel)

    oracle_curves = None
    if oracle_rows is not None:
        t_o, _ = pick_time(oracle_rows, t_sel)
        oracle_curves = _edge_curves(oracle_rows, t_o)

    edges = list(curves.keys())
    ncols = min(4, max(1, len(edges)))
    nrows = math.ceil(len(edges) / ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.2 * ncols, 2.6 * nrows),
                             squeeze=False, sharey=True)
    for ax in axes.flat[len(edges):]:
        ax.set_visible(False)

    for ax, eid in zip(axes.flat, edges):
        if oracle_curves and eid in oracle_curves:
            pts = oracle_curves[eid]
            xs = [p[1] for p in pts]
            ys = [p[2] for p in pts]
            ax.plot(xs, ys, "-", color="tab:blue", lw=1.5, label="exact")
        xs, ys = [], []
        last_elem = None
        for elem, x, v in curves[eid]:
            if last_elem is not None and elem != last_elem:
                xs.append(np.nan)
                ys.append(np.nan)
            xs.append(x)
            ys.append(v)
            last_elem = elem
        ax.plot(xs, ys, "--", color="tab:red", lw=1.5, label="dG")
        ax.set_title(eid)
        ax.set_xlabel("x")
        ax.grid(True, alpha=0.3)
    axes.flat[0].set_ylabel("concentration")
    axes.flat[0].legend(loc="best", fontsize=8)
    fig.suptitle(f"t = {t_sel:g}")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)

    sidecar = Path(out_path).with_suffix(".curves.csv")
    with open(sidecar, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["edge", "element", "x", "value"])
        for eid in edges:
            for elem, x, v in curves[eid]:
                writer.writerow([eid, elem, repr(x), repr(v)])
    return t_sel


def plot_convergence(levels: list[ConvergenceRow], out_path) -> float:
    """Log-log error vs mesh size with a slope-(k+1) reference line.

    Returns the fitted slope of the data; refuses fewer than two levels.
    """
    if len(levels) < 2:
        raise ValueError("need at least two refinement levels to plot convergence")
    h = np.array([lv.h for lv in levels])
    err = np.array([lv.err for lv in levels])
    k = levels[0].k

    if np.any(err <= 0):
        slope = 0.0
    else:
        # observed order: err ~ C h^slope
        slope = float(np.polyfit(np.log(h), np.log(err), 1)[0])

    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.loglog(h, err, "o-", color="tab:red", label="measured")
    ref = err[0] * (h / h[0]) ** (k + 1)
    ax.loglog(h, ref, "--", color="gray", label=f"slope {k + 1}")
    ax.set_xlabel("mesh size h")
    ax.set_ylabel("error")
    ax.invert_xaxis()
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    ax.set_title(f"fitted slope {slope:.3f}")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return slope
