"""Ulam discretisation of the transfer operator on a uniform k-cell grid."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, InvalidK
from .map_model import MapSpec, branch_inverse, endpoint_value
from .quadrature import cell_integrals

DEFAULT_ASSEMBLY_TOL = 1e-14


def default_workers() -> int:
    env = os.environ.get("ULAM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


@dataclass(frozen=True)
class PartitionGrid:
    """Cells ``J_i = [i/k, (i+1)/k)``, ``i = 0..k-1``; the last cell is closed."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise InvalidK(f"k must be >= 1, got {self.k}")

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.k + 1) / self.k

    @property
    def width(self) -> float:
        return 1.0 / self.k

    def cell_of(self, x):
        idx = np.searchsorted(self.edges, x, side="right") - 1
        return np.clip(idx, 0, self.k - 1)

    def cells(self):
        e = self.edges
        return list(zip(e[:-1], e[1:]))


@dataclass(frozen=True, eq=False)
class DensityVector:
    """Piecewise constant function with height ``values[i]`` on cell ``i``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size < 1:
            raise InvalidK("a density needs at least one cell")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def k(self) -> int:
        return self.values.size

    @property
    def grid(self) -> PartitionGrid:
        return PartitionGrid(self.k)

    def mass(self) -> float:
        return float(self.values.sum() / self.k)

    def normalized(self) -> "DensityVector":
        return DensityVector(self.values * (self.k / self.values.sum()))

    def monotonicity_defect(self) -> float:
        """``max(0, max_i (f_{i+1} - f_i))``; zero for a non-increasing density."""
        if self.k < 2:
            return 0.0
        return float(max(0.0, np.max(np.diff(self.values))))

    def __call__(self, x):
        return self.values[self.grid.cell_of(np.asarray(x, dtype=float))]

    @classmethod
    def uniform(cls, k: int) -> "DensityVector":
        return cls(np.ones(k))

    def __len__(self):
        return self.k


@dataclass(frozen=True, eq=False)
class UlamMatrix:
    """Row-stochastic ``M[i, j] = k * lambda(J_i  cap  tau^{-1}(J_j))`` in CSR form."""

    k: int
    matrix: sp.csr_matrix
    assembly_tol: float
    raw_row_defect: float
    renormalized: bool = False
    n_branches: int = 0

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def max_row_defect(self) -> float:
        return float(np.max(np.abs(self.row_sums() - 1.0)))

    def nnz_per_row(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def triplets(self):
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]


def _branch_triplets(b, k, tol):
    edges = np.arange(k + 1) / k
    lo_img, hi_img = b.image
    inner = edges[(edges > lo_img) & (edges < hi_img)]
    xs = branch_inverse(b, inner, tol) if inner.size else np.empty(0)
    xs = np.maximum.accumulate(xs) if xs.size else xs
    j0 = min(int(np.searchsorted(edges, lo_img, side="right")) - 1, k - 1)
    cuts = edges[(edges > b.left) & (edges < b.right)]
    pts = np.unique(np.concatenate([[b.left, b.right], xs, cuts]))
    mid = 0.5 * (pts[:-1] + pts[1:])
    q = _in_cell_units(pts, k)
    i = np.clip(np.searchsorted(edges, mid, side="right") - 1, 0, k - 1)
    j = np.clip(j0 + np.searchsorted(xs, mid, side="right"), 0, k - 1)
    keep = q[1:] > q[:-1]
    return i[keep], j[keep], np.diff(q)[keep]


def _in_cell_units(pts, k):
    """``pts * k`` snapped to integers within a few ulps, so whole cells weigh exactly 1."""
    q = np.asarray(pts, dtype=float) * k
    r = np.round(q)
    return np.where(np.abs(q - r) <= 4 * np.finfo(float).eps * np.maximum(r, 1.0), r, q)


def ulam_matrix(m: MapSpec, k: int, tol: float = DEFAULT_ASSEMBLY_TOL,
                renormalize: bool = False, workers: Optional[int] = None) -> UlamMatrix:
    """Assemble the Ulam matrix of a finite-branch map.

    Each branch is increasing, so ``J_i  cap  b^{-1}(J_j)`` is an interval whose
    ends are cell edges or preimages of cell edges; the preimages are found
    with :func:`branch_inverse` at tolerance ``tol``.
    """
    if k < 1:
        raise InvalidK(f"k must be >= 1, got {k}")
    if not m.is_finite:
        raise ValueError("Ulam assembly needs a finite-branch map; truncate it first")
    workers = default_workers() if workers is None else max(1, workers)
    branches = m.branches
    if workers > 1 and len(branches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _branch_triplets(b, k, tol), branches))
    else:
        parts = [_branch_triplets(b, k, tol) for b in branches]
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    vals = np.concatenate([p[2] for p in parts])
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(k, k)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    sums = np.asarray(mat.sum(axis=1)).ravel()
    defect = float(np.max(np.abs(sums - 1.0)))
    if renormalize:
        mat = sp.diags(1.0 / sums) @ mat
        mat = mat.tocsr()
    return UlamMatrix(k, mat, tol, defect, renormalize, len(branches))


def apply_operator(M: UlamMatrix, f: DensityVector) -> DensityVector:
    """One step of the discretised transfer operator: ``g_j = sum_i f_i M[i, j]``."""
    if f.k != M.k:
        raise DimensionMismatch(f"density has {f.k} cells, matrix has {M.k}")
    return DensityVector(M.matrix.T @ f.values)


def common_refinement(k1: int, k2: int):
    """Merged breakpoints of two uniform grids and the cell index of each piece in both."""
    pts = np.unique(np.concatenate([np.arange(k1 + 1) / k1, np.arange(k2 + 1) / k2]))
    mid = 0.5 * (pts[:-1] + pts[1:])
    i1 = np.minimum((mid * k1).astype(np.int64), k1 - 1)
    i2 = np.minimum((mid * k2).astype(np.int64), k2 - 1)
    return pts, i1, i2


def project_Q(f: Union[Callable, DensityVector], k: int, quad_tol: float = 1e-10,
              breakpoints=None) -> DensityVector:
    """Cell averages of ``f`` on the uniform ``k``-grid.

    A :class:`DensityVector` is rebinned exactly.  Any other callable is
    integrated adaptively with error at most ``quad_tol / k`` per cell.
    """
    if k < 1:
        raise InvalidK(f"k must be >= 1, got {k}")
    if isinstance(f, DensityVector):
        pts, i_src, i_dst = common_refinement(f.k, k)
        out = np.zeros(k)
        np.add.at(out, i_dst, f.values[i_src] * np.diff(_in_cell_units(pts, k)))
        return DensityVector(out)
    edges = np.arange(k + 1) / k
    integrals, _ = cell_integrals(f, edges, quad_tol, breakpoints=breakpoints)
    return DensityVector(integrals * k)


def transfer_pointwise(m: MapSpec, f: Callable, x, tol: float = DEFAULT_ASSEMBLY_TOL):
    """Evaluate ``P_tau f(x) = sum over branches of f(b^{-1}(x)) / b'(b^{-1}(x))``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    for b in m.branches:
        lo, hi = b.image
        sel = (x >= lo) & (x < hi)
        if not sel.any():
            continue
        z = branch_inverse(b, x[sel], tol)
        out[sel] += np.asarray(f(z), dtype=float) / np.asarray(b.derivative(z), dtype=float)
    return out


def transfer_breakpoints(m: MapSpec, k: int) -> np.ndarray:
    """Points where ``P_tau f`` may jump for a step function ``f`` on the k-grid."""
    edges = np.arange(k + 1) / k
    pts = []
    for b in m.branches:
        pts.extend(b.image)
        inner = edges[(edges > b.left) & (edges < b.right)]
        if inner.size:
            with np.errstate(invalid="ignore"):
                pts.append(np.asarray(b.forward(inner), dtype=float))
        pts.append(endpoint_value(b.forward, b.left, b.right))
    flat = np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)) for p in pts])
    return np.unique(flat[np.isfinite(flat)])
