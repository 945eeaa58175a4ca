"""CSV import/export.  Floats are written with ``repr`` so files reload losslessly."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp

from .analysis import SweepRow
from .orbit import OrbitHistogram
from .ulam import DensityVector, UlamMatrix

MATRIX_HEADER = ["row", "col", "value"]
DENSITY_HEADER = ["cell_index", "left", "right", "density"]
SWEEP_HEADER = ["n", "k", "error_l1", "residual", "runtime_ms"]


def _fmt(v: Optional[float]) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def _opt_float(s: str) -> Optional[float]:
    return float(s) if s.strip() else None


def _read_rows(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got != header:
            raise ValueError(f"{path}: expected header {header}, found {got}")
        return [row for row in reader if row]


def write_matrix_csv(M: UlamMatrix, path) -> None:
    rows, cols, vals = M.triplets()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MATRIX_HEADER)
        for r, c, v in zip(rows, cols, vals):
            w.writerow([int(r), int(c), repr(float(v))])


def read_matrix_csv(path, k: Optional[int] = None) -> UlamMatrix:
    rows = _read_rows(path, MATRIX_HEADER)
    r = np.array([int(x[0]) for x in rows], dtype=np.int64)
    c = np.array([int(x[1]) for x in rows], dtype=np.int64)
    v = np.array([float(x[2]) for x in rows])
    if k is None:
        k = int(max(r.max(), c.max())) + 1
    mat = sp.csr_matrix((v, (r, c)), shape=(k, k))
    mat.sort_indices()
    sums = np.asarray(mat.sum(axis=1)).ravel()
    return UlamMatrix(k, mat, math.nan, float(np.max(np.abs(sums - 1.0))))


def write_density_csv(f: DensityVector, path) -> None:
    edges = f.grid.edges
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DENSITY_HEADER)
        for i, v in enumerate(f.values):
            w.writerow([i, repr(float(edges[i])), repr(float(edges[i + 1])), repr(float(v))])


def read_density_csv(path) -> DensityVector:
    rows = _read_rows(path, DENSITY_HEADER)
    rows.sort(key=lambda r: int(r[0]))
    if [int(r[0]) for r in rows] != list(range(len(rows))):
        raise ValueError(f"{path}: cell indices must be 0..k-1")
    return DensityVector(np.array([float(r[3]) for r in rows]))


def write_histogram_csv(h: OrbitHistogram, path) -> None:
    write_density_csv(h.density(), path)


def write_sweep_csv(rows: Iterable[SweepRow], path, timing: bool = True) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow([r.n, r.k, _fmt(r.error_l1), _fmt(r.residual),
                        _fmt(r.runtime_ms) if timing else ""])


def read_sweep_csv(path) -> list:
    out = []
    for r in _read_rows(path, SWEEP_HEADER):
        out.append(SweepRow(int(r[0]), int(r[1]), _opt_float(r[2]), _opt_float(r[3]),
                            _opt_float(r[4]) or 0.0))
    return out


def ensure_parent(path) -> Path:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    return p
