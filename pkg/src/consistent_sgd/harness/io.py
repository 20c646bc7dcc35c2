"""CSV/JSON writers and readers for traces, bound curves and tail grids."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from consistent_sgd.bounds import BoundCurve, TheoremId
from consistent_sgd.optimizer import TRACE_COLUMNS, RunTrace


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trace_csv(path, trace: RunTrace) -> Path:
    path = Path(path)
    cols = [trace.column(c) for c in TRACE_COLUMNS]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for row in zip(*cols):
            k, *vals, active = row
            fh.write(",".join([str(int(k)), *map(fmt, vals), "1" if active else "0"]) + "\n")
    return path


def read_trace_csv(path) -> RunTrace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace columns {header}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: empty trace")
    data = np.array(rows, dtype=float)
    cols = {name: data[:, i] for i, name in enumerate(TRACE_COLUMNS)}
    cols["k"] = cols["k"].astype(np.int64)
    cols["proj_active"] = cols["proj_active"] != 0
    return RunTrace(**cols)


def write_bound_csv(path, curve: BoundCurve) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write("k,value,theorem\n")
        for r in curve.rows():
            fh.write(f"{r['k']},{fmt(r['value'])},{r['theorem']}\n")
    return path


def read_bound_csv(path) -> BoundCurve:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty bound curve")
    theorems = {r["theorem"] for r in rows}
    if len(theorems) != 1:
        raise ValueError(f"{path}: mixes theorems {sorted(theorems)}")
    return BoundCurve(TheoremId(theorems.pop()),
                      np.array([int(r["k"]) for r in rows], dtype=np.int64),
                      np.array([float(r["value"]) for r in rows]))


def write_tail_csv(path, tail) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write("N,delta,p_hat,trials\n")
        for r in tail.rows():
            fh.write(f"{r['N']},{fmt(r['delta'])},{fmt(r['p_hat'])},{r['trials']}\n")
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return path
