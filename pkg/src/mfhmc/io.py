"""CSV persistence for chains, diagnostics reports and experiment tables.

Floats are written with 17 significant digits so files round-trip exactly
and byte output is a pure function of the data.
"""

from __future__ import annotations

import csv
import math
from dataclasses import fields
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticsReport
from .sampler import ChainRecord

__all__ = ["fmt", "read_chain", "read_report", "write_chain", "write_report", "write_rows"]


def fmt(value) -> str:
    """Canonical text form of one CSV cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(value)


def write_chain(chain: ChainRecord, path, thin: int = 1) -> None:
    """Write iterations ``0, thin, 2 thin, ...`` (row 0 is the start state)."""
    if int(thin) != thin or thin < 1:
        raise ValueError(f"thin must be a positive integer, got {thin}")
    D = chain.dim
    header = ["iter", "stage1", "stage2", "n_hf_cum"] + [f"x_{d}" for d in range(D)]
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for it in range(0, chain.n_iterations + 1, thin):
            if it == 0:
                s1 = s2 = False
                n_hf = 1
            else:
                s1 = chain.stage1_accepted[it - 1]
                s2 = chain.stage2_accepted[it - 1]
                n_hf = chain.n_hf_cumulative[it - 1]
            cells = [fmt(it), fmt(s1), fmt(s2), fmt(n_hf)] + [fmt(v) for v in chain.samples[it]]
            fh.write(",".join(cells) + "\n")


def read_chain(path) -> dict:
    """Load a chain CSV into arrays keyed by column group."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    body = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(len(rows) - 1, len(rows[0]))
    return {
        "iter": body[:, 0].astype(int),
        "stage1": body[:, 1].astype(bool),
        "stage2": body[:, 2].astype(bool),
        "n_hf_cum": body[:, 3].astype(int),
        "samples": body[:, 4:],
    }


def write_report(report: DiagnosticsReport, path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write("metric,value\n")
        for f in fields(report):
            fh.write(f"{f.name},{fmt(getattr(report, f.name))}\n")


def read_report(path) -> dict:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["metric", "value"]:
        raise ValueError(f"{path}: not a report file")
    return {name: float(value) for name, value in rows[1:]}


def write_rows(rows, columns, path) -> None:
    """Write dict rows restricted to ``columns``, in that order."""
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(row.get(c)) for c in columns) + "\n")
