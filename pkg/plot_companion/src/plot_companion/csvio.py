"""Typed readers for the solver's CSV schemas."""

from __future__ import annotations

import csv
from dataclasses import dataclass


class ColumnError(ValueError):
    """The input file does not carry the expected columns."""


SNAPSHOT_COLUMNS = ("t", "edge", "element", "node_x", "value", "uhat_left", "uhat_right")
CONVERGENCE_COLUMNS = ("h", "tau", "err", "rate", "k")


@dataclass(frozen=True)
class SnapshotRow:
    t: float
    edge: str
    element: int
    node_x: float
    value: float
    uhat_left: float
    uhat_right: float


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    tau: float
    err: float
    rate: float | None
    k: int


def _check_columns(fieldnames, expected, path):
    missing = [c for c in expected if c not in (fieldnames or [])]
    if missing:
        raise ColumnError(f"{path}: missing column(s) {', '.join(missing)}; "
                          f"expected {', '.join(expected)}")


def read_snapshots(path) -> list[SnapshotRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _check_columns(reader.fieldnames, SNAPSHOT_COLUMNS, path)
        rows = []
        for rec in reader:
            rows.append(SnapshotRow(
                t=float(rec["t"]), edge=rec["edge"], element=int(rec["element"]),
                node_x=float(rec["node_x"]), value=float(rec["value"]),
                uhat_left=float(rec["uhat_left"]), uhat_right=float(rec["uhat_right"])))
    if not rows:
        raise ColumnError(f"{path}: no data rows")
    return rows


def read_convergence(path) -> list[ConvergenceRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _check_columns(reader.fieldnames, CONVERGENCE_COLUMNS, path)
        rows = []
        for rec in reader:
            rate = rec["rate"].strip()
            rows.append(ConvergenceRow(
                h=float(rec["h"]), tau=float(rec["tau"]), err=float(rec["err"]),
                rate=float(rate) if rate else None, k=int(rec["k"])))
    if not rows:
        raise ColumnError(f"{path}: no data rows")
    return rows
