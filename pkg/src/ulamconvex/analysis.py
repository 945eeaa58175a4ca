"""Error norms and (n, k) sweeps."""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .catalog import AffineDensity
from .errors import UlamError
from .map_model import MapSpec
from .quadrature import cell_integrals
from .solver import stationary_density
from .truncation import truncate
from .ulam import (
    DensityVector,
    common_refinement,
    project_Q,
    transfer_breakpoints,
    transfer_pointwise,
    ulam_matrix,
)


def _affine_abs_integral(c, p, q, x0, x1):
    """``int_{x0}^{x1} |c - (p + q x)| dx`` for arrays, split where the line crosses ``c``."""
    h0 = c - (p + q * x0)
    h1 = c - (p + q * x1)
    w = x1 - x0
    same = h0 * h1 >= 0
    out = np.where(same, 0.5 * w * np.abs(h0 + h1), 0.0)
    cross = ~same
    if np.any(cross):
        a0, a1 = np.abs(h0[cross]), np.abs(h1[cross])
        # root at fraction a0/(a0+a1) of the cell
        out[cross] = 0.5 * w[cross] * (a0 * a0 + a1 * a1) / (a0 + a1)
    return out


def l1_vs_exact(f: DensityVector, exact: Callable, quad_tol: float = 1e-12) -> float:
    """``int_0^1 |f - exact| dx``; closed form when ``exact`` is an :class:`AffineDensity`."""
    edges = f.grid.edges
    if isinstance(exact, AffineDensity):
        parts = _affine_abs_integral(f.values, exact.intercept, exact.slope, edges[:-1], edges[1:])
        return float(parts.sum())
    integrand = lambda x: np.abs(f(x) - np.asarray(exact(x), dtype=float))
    vals, _ = cell_integrals(integrand, edges, quad_tol)
    return float(vals.sum())


def l1_between(f: DensityVector, g: DensityVector) -> float:
    """Exact L1 distance of two step functions on (possibly different) uniform grids."""
    pts, i_f, i_g = common_refinement(f.k, g.k)
    return float(np.sum(np.abs(f.values[i_f] - g.values[i_g]) * np.diff(pts)))


def fp_residual(m: MapSpec, f: DensityVector, quad_tol: float = 1e-10) -> float:
    """``||Q(P_tau f) - f||_1`` with ``P_tau f`` summed over inverse branches pointwise."""
    if not m.is_finite:
        raise ValueError("fp_residual needs a finite-branch map")
    bps = transfer_breakpoints(m, f.k)
    Pf = lambda x: transfer_pointwise(m, f, x)
    q = project_Q(Pf, f.k, quad_tol, breakpoints=bps)
    return float(np.abs(q.values - f.values).sum() / f.k)


@dataclass
class SweepRow:
    n: int
    k: int
    error_l1: Optional[float]
    residual: Optional[float]
    runtime_ms: float
    density: Optional[DensityVector] = None
    failure: Optional[str] = None

    def as_record(self) -> dict:
        return {"n": self.n, "k": self.k, "error_l1": self.error_l1,
                "residual": self.residual, "runtime_ms": self.runtime_ms}


def _solve_one(base, n, k, solver_opts):
    opts = dict(solver_opts or {})
    assembly_tol = opts.pop("assembly_tol", 1e-14)
    t0 = time.perf_counter()
    spec = truncate(base, n).spec if not base.is_finite else base
    M = ulam_matrix(spec, k, assembly_tol)
    rep = stationary_density(M, **opts)
    return rep, 1e3 * (time.perf_counter() - t0)


def sweep(base: MapSpec, exact: Optional[Callable], n_list: Sequence[int],
          k_list: Sequence[int], solver_opts: Optional[dict] = None,
          workers: int = 1) -> list:
    """Truncate, assemble, solve and compare for every ``(n, k)``, ``n`` outermost.

    With ``exact`` each row holds ``||exact - f_{n,k}||_1``; otherwise it holds
    the L1 distance to the previous row's density (``None`` on the first row).
    A failing row records its error message and the sweep continues.
    """
    if not n_list or not k_list:
        raise ValueError("n_list and k_list must be non-empty")
    pairs = list(itertools.product(n_list, k_list))

    def run(pair):
        n, k = pair
        try:
            rep, ms = _solve_one(base, n, k, solver_opts)
        except UlamError as exc:
            return SweepRow(n, k, None, None, 0.0, None, f"{type(exc).__name__}: {exc}")
        return SweepRow(n, k, None, rep.residual_l1, ms, rep.density)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, pairs))
    else:
        rows = [run(p) for p in pairs]

    prev = None
    for row in rows:
        if row.density is None:
            continue
        if exact is not None:
            row.error_l1 = l1_vs_exact(row.density, exact)
        elif prev is not None:
            row.error_l1 = l1_between(prev, row.density)
        prev = row.density
    return rows


def successive_differences(rows: Sequence[SweepRow]) -> list:
    """``||f_r - f_{r+1}||_1`` over consecutive successful rows."""
    dens = [r.density for r in rows if r.density is not None]
    return [l1_between(a, b) for a, b in zip(dens, dens[1:])]


def is_strictly_decreasing(values) -> bool:
    v = [x for x in values if x is not None and not math.isnan(x)]
    return all(b < a for a, b in zip(v, v[1:]))
