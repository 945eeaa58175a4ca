"""Piecewise convex interval maps with finitely or countably many branches.

A map is described by a strictly decreasing partition ``1 = a_0 > a_1 > ...``
and one increasing convex branch per interval ``[a_i, a_{i-1})``.  Branch
``i = 1`` also owns the right end point ``x = 1``.  Countable maps are given by
an ``i``-indexed :class:`BranchFamily` and are materialised lazily down to a
resolution floor.

All branch callables are expected to accept numpy arrays.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    BelowResolutionFloor,
    NotContracting,
    NotInImage,
    OutOfDomain,
)

DEFAULT_A_MIN = 1e-12
DEFAULT_TAIL_INDEX = 10**6
DEFAULT_SECANTS = 64

_EPS = np.finfo(float).eps


class MapClass(enum.Enum):
    FINITE = "finite"
    COUNTABLE = "countable"

    @classmethod
    def parse(cls, text: str) -> "MapClass":
        key = text.strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "finite": cls.FINITE,
            "finitebranches": cls.FINITE,
            "countable": cls.COUNTABLE,
            "countableaccumulatingatzero": cls.COUNTABLE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown map class {text!r}") from None


def endpoint_value(f: Callable, x: float, toward: float) -> float:
    """Evaluate ``f`` at an end point, stepping inward if rounding leaves the domain.

    Formulas such as ``1 - sqrt(...)`` hit a zero radicand exactly at a branch
    end; rounding can make it slightly negative there.
    """
    step = 0.0
    last = None
    for _ in range(12):
        xx = x + math.copysign(step, toward - x) if step else x
        try:
            with np.errstate(invalid="ignore", divide="ignore"):
                v = float(f(np.float64(xx)))
        except ArithmeticError as exc:
            last, v = exc, math.nan
        if math.isfinite(v):
            return v
        step = max(step * 4.0, 4.0 * _EPS * max(abs(x), 1e-300))
    if last is not None:
        raise last
    raise ArithmeticError(f"cannot evaluate branch near end point {x!r}")


@dataclass(frozen=True, eq=False)
class Branch:
    """One monotone convex piece ``forward: [left, right) -> [0, 1]``."""

    left: float
    right: float
    forward: Callable
    derivative: Callable
    closed_form_inverse: Optional[Callable] = None
    index: Optional[int] = None
    image: Optional[tuple] = None

    def __post_init__(self):
        if not (0.0 <= self.left < self.right <= 1.0):
            raise ValueError(f"bad branch domain [{self.left}, {self.right})")
        if self.image is None:
            lo = endpoint_value(self.forward, self.left, self.right)
            hi = endpoint_value(self.forward, self.right, self.left)
            object.__setattr__(self, "image", (lo, hi))

    @property
    def width(self) -> float:
        return self.right - self.left

    def contains(self, x):
        return (x >= self.left) & (x < self.right)

    def inverse(self, y, tol: float = 1e-14):
        return branch_inverse(self, y, tol)


@dataclass(frozen=True)
class BranchFamily:
    """``i``-indexed rule generating the branches of a countable map.

    ``partition(i)`` gives ``a_i`` with ``a_0 = 1``; the other callables take
    ``(x, i)`` (or ``(y, i)`` for the inverse) and broadcast over both.
    """

    partition: Callable
    forward: Callable
    derivative: Optional[Callable] = None
    inverse: Optional[Callable] = None

    def slope_at_partition(self, i):
        """``tau'(a_i)`` for an integer array ``i``, vectorised over ``i``."""
        i = np.asarray(i, dtype=float)
        a = np.asarray(self.partition(i), dtype=float)
        if self.derivative is not None:
            return np.asarray(self.derivative(a, i), dtype=float)
        right = np.asarray(self.partition(i - 1), dtype=float)
        return finite_difference(lambda x: self.forward(x, i), a, a, right)


def finite_difference(f: Callable, x, left, right, rel_step: float = 1e-7):
    """Central difference with step ``rel_step * width``.

    Within one step of an end point the second-order one-sided formula is
    used instead, so the derivative at ``left`` stays accurate.
    """
    x = np.asarray(x, dtype=float)
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    h = rel_step * (right - left)
    xb = np.broadcast_arrays(x, h, left, right)
    x, h, left, right = (np.array(v, dtype=float) for v in xb)
    central = (x - h >= left) & (x + h <= right)
    fwd = ~central & (x - h < left)
    out = np.empty_like(x)
    if central.any():
        xc, hc = x[central], h[central]
        out[central] = (_at(f, xc + hc, x, central) - _at(f, xc - hc, x, central)) / (2 * hc)
    for mask, sign in ((fwd, 1.0), (~central & ~fwd, -1.0)):
        if mask.any():
            xs, hs = x[mask], sign * h[mask]
            f0, f1, f2 = (_at(f, xs + j * hs, x, mask) for j in (0, 1, 2))
            out[mask] = (-3 * f0 + 4 * f1 - f2) / (2 * hs)
    return out if out.ndim else float(out)


def _at(f, pts, like, mask):
    # evaluate f on a subset; callables may close over full-length arrays (e.g. i)
    full = np.array(like, dtype=float, copy=True)
    full[mask] = pts
    return np.asarray(f(full), dtype=float)[mask]


class MapSpec:
    """A piecewise convex map on ``[0, 1]``.

    Use :meth:`finite` or :meth:`countable` rather than calling the
    constructor.  Instances are immutable; the branch cache is guarded by a lock.
    """

    def __init__(self, *, class_tag, name="", branches=None, family=None,
                 n_branches=None, a_min=DEFAULT_A_MIN):
        self.class_tag = class_tag
        self.name = name
        self.family = family
        self.a_min = float(a_min)
        self._cache = {}
        self._lock = threading.Lock()
        if class_tag is MapClass.FINITE:
            bs = tuple(sorted(branches, key=lambda b: -b.left))
            _check_tiling(bs)
            self._branches = bs
            self._points = (1.0,) + tuple(b.left for b in bs)
            self.n_branches = len(bs)
        else:
            if family is None:
                raise ValueError("countable maps need a branch family")
            self._branches = None
            self._points = None
            if n_branches is None:
                n_branches = _count_above(family.partition, self.a_min)
            else:
                n_branches = int(n_branches)
                if n_branches < 1:
                    raise ValueError("n_branches must be >= 1")
            self.n_branches = n_branches

    # constructors -------------------------------------------------------
    @classmethod
    def finite(cls, branches: Sequence[Branch], name: str = "") -> "MapSpec":
        return cls(class_tag=MapClass.FINITE, name=name, branches=list(branches))

    @classmethod
    def countable(cls, family: BranchFamily, n_branches: Optional[int] = None,
                  a_min: float = DEFAULT_A_MIN, name: str = "") -> "MapSpec":
        return cls(class_tag=MapClass.COUNTABLE, name=name, family=family,
                   n_branches=n_branches, a_min=a_min)

    # structure ----------------------------------------------------------
    @property
    def is_finite(self) -> bool:
        return self.class_tag is MapClass.FINITE

    @property
    def floor(self) -> float:
        """Smallest materialised partition point (0 for finite maps)."""
        return self.partition_point(self.n_branches)

    def partition_point(self, i: int) -> float:
        if i < 0:
            raise IndexError(i)
        if self.is_finite:
            return self._points[i]
        return float(self.family.partition(float(i)))

    def partition_points(self, upto: Optional[int] = None) -> np.ndarray:
        """``[a_0, ..., a_upto]`` (defaults to all materialised points)."""
        upto = self.n_branches if upto is None else upto
        if self.is_finite:
            return np.array(self._points[: upto + 1])
        return np.asarray(self.family.partition(np.arange(upto + 1, dtype=float)), dtype=float)

    def branch(self, i: int) -> Branch:
        """Branch ``i`` (1-based) on ``[a_i, a_{i-1})``."""
        if not 1 <= i <= self.n_branches:
            raise IndexError(f"branch {i} not in 1..{self.n_branches}")
        if self.is_finite:
            return self._branches[i - 1]
        with self._lock:
            b = self._cache.get(i)
            if b is None:
                b = self._make_branch(i)
                self._cache[i] = b
        return b

    @property
    def branches(self) -> tuple:
        if self.is_finite:
            return self._branches
        return tuple(self.branch(i) for i in range(1, self.n_branches + 1))

    def _make_branch(self, i: int) -> Branch:
        fam = self.family
        fi = float(i)
        left, right = self.partition_point(i), self.partition_point(i - 1)
        fwd = lambda x, _i=fi: fam.forward(x, _i)
        if fam.derivative is not None:
            der = lambda x, _i=fi: fam.derivative(x, _i)
        else:
            der = lambda x, _l=left, _r=right: finite_difference(fwd, x, _l, _r)
        inv = None
        if fam.inverse is not None:
            inv = lambda y, _i=fi: fam.inverse(y, _i)
        return Branch(left, right, fwd, der, inv, index=i)

    def locate(self, x):
        """Index of the branch containing ``x`` (vectorised)."""
        x = np.asarray(x, dtype=float)
        if np.any((x < 0.0) | (x > 1.0)) or np.any(np.isnan(x)):
            raise OutOfDomain("x must lie in [0, 1]")
        if self.is_finite:
            asc = np.array(self._points[::-1])  # 0 = a_m < ... < a_0 = 1
            pos = np.searchsorted(asc, x, side="right")
            idx = self.n_branches + 1 - pos
            return np.clip(idx, 1, self.n_branches)
        if np.any(x < self.floor):
            raise BelowResolutionFloor(
                f"x below resolution floor a_{self.n_branches} = {self.floor:.3e}")
        # smallest i >= 1 with a_i <= x
        lo = np.ones(x.shape, dtype=np.int64)
        hi = np.full(x.shape, self.n_branches, dtype=np.int64)
        part = self.family.partition
        while np.any(lo < hi):
            mid = (lo + hi) // 2
            ok = np.asarray(part(mid.astype(float))) <= x
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid + 1)
        return lo

    def __call__(self, x):
        return eval_map(self, x)

    def __repr__(self):
        kind = "finite" if self.is_finite else "countable"
        return f"MapSpec({self.name!r}, {kind}, n_branches={self.n_branches})"


def _check_tiling(branches):
    if not branches:
        raise ValueError("a map needs at least one branch")
    if branches[0].right != 1.0 or branches[-1].left != 0.0:
        raise ValueError("branches must tile [0, 1]")
    for a, b in zip(branches, branches[1:]):
        if a.left != b.right:
            raise ValueError(f"gap or overlap at {a.left} / {b.right}")


def _count_above(partition: Callable, a_min: float) -> int:
    """Largest ``i`` with ``partition(i) >= a_min``."""
    if partition(1.0) < a_min:
        raise ValueError("a_1 is already below the resolution floor")
    hi = 1
    while partition(float(2 * hi)) >= a_min:
        hi *= 2
        if hi > 2**62:
            raise ValueError("partition does not reach the resolution floor")
    lo, hi = hi, 2 * hi  # partition(lo) >= a_min > partition(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if partition(float(mid)) >= a_min:
            lo = mid
        else:
            hi = mid
    return lo


def eval_map(m: MapSpec, x):
    """Evaluate the map at ``x`` (scalar or array)."""
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    idx = m.locate(xa)
    out = np.empty_like(xa)
    for i in np.unique(idx):
        sel = idx == i
        out[sel] = m.branch(int(i)).forward(xa[sel])
    return float(out[0]) if scalar else out


def branch_inverse(branch: Branch, y, tol: float = 1e-14, newton: bool = True):
    """Solve ``branch.forward(x) = y`` for ``x`` in ``[left, right]``.

    Uses the closed-form inverse when the branch has one.  Otherwise runs a
    bracketed bisection, with safeguarded Newton steps when the derivative is
    positive and finite at the current iterate.
    """
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    lo_img, hi_img = branch.image
    slack = max(tol, 8 * _EPS)
    if np.any((y < lo_img - slack) | (y > hi_img + slack)) or np.any(np.isnan(y)):
        raise NotInImage(f"y outside branch image [{lo_img}, {hi_img}]")
    y = np.clip(y, lo_img, hi_img)
    if branch.closed_form_inverse is not None:
        x = np.clip(np.asarray(branch.closed_form_inverse(y), dtype=float),
                    branch.left, branch.right)
    else:
        x = _bracketed_solve(branch, y, tol, newton)
    return float(x[0]) if scalar else x


def _bracketed_solve(branch, y, tol, newton, max_iter=200):
    lo = np.full_like(y, branch.left)
    hi = np.full_like(y, branch.right)
    x = 0.5 * (lo + hi)
    # end points of the image map back to the end points
    at_lo = y <= branch.image[0]
    at_hi = y >= branch.image[1]
    done = at_lo | at_hi
    x = np.where(at_lo, lo, np.where(at_hi, hi, x))
    for _ in range(max_iter):
        active = ~done
        if not active.any():
            break
        xa = x[active]
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            r = np.asarray(branch.forward(xa), dtype=float) - y[active]
        r = np.where(np.isnan(r), np.where(xa > 0.5 * (lo[active] + hi[active]), 1.0, -1.0), r)
        l, h = lo[active], hi[active]
        l = np.where(r < 0, xa, l)
        h = np.where(r > 0, xa, h)
        conv = (np.abs(r) <= tol) | (h - l <= 2 * _EPS * np.maximum(1.0, np.abs(xa)))
        nxt = 0.5 * (l + h)
        if newton:
            with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                d = np.asarray(branch.derivative(xa), dtype=float)
                xn = xa - r / d
            ok = np.isfinite(xn) & (d > 0) & (xn > l) & (xn < h)
            nxt = np.where(ok, xn, nxt)
        lo[active], hi[active] = l, h
        x[active] = np.where(conv, _closest(branch, xa, l, h, r, y[active]), nxt)
        done[active] = conv
    return np.clip(x, branch.left, branch.right)


def _closest(branch, xa, l, h, r, y):
    # when the bracket collapses to adjacent floats, keep the smallest residual
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        rl = np.abs(np.asarray(branch.forward(l), dtype=float) - y)
        rh = np.abs(np.asarray(branch.forward(h), dtype=float) - y)
    best = np.where(np.nan_to_num(rl, nan=np.inf) < np.abs(r), l, xa)
    rb = np.minimum(np.nan_to_num(rl, nan=np.inf), np.abs(r))
    return np.where(np.nan_to_num(rh, nan=np.inf) < rb, h, best)


# ---------------------------------------------------------------------------
# class conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchCheck:
    index: int
    increasing: bool
    convex: bool
    zero_at_left: bool
    positive_derivative: bool
    value_at_left: float
    derivative_at_left: float

    @property
    def ok(self) -> bool:
        return self.increasing and self.convex and self.zero_at_left and self.positive_derivative


@dataclass(frozen=True)
class ValidationReport:
    branch_checks: tuple
    branches_checked: int
    inverse_slope_sum: float    # C, including the estimated tail
    tail_cutoff: Optional[int]  # smallest N with D1 < 1
    d1: float
    tail_index: int
    tail_estimate: float
    admissible: bool
    problems: tuple = field(default=())

    def failed_branches(self):
        return [c.index for c in self.branch_checks if not c.ok]


def _check_branch(b: Branch, samples: int, tol: float) -> BranchCheck:
    x = np.linspace(b.left, b.right, samples)
    y = np.empty_like(x)
    y[0] = endpoint_value(b.forward, b.left, b.right)
    y[-1] = endpoint_value(b.forward, b.right, b.left)
    with np.errstate(invalid="ignore", divide="ignore"):
        y[1:-1] = b.forward(x[1:-1])
    slopes = np.diff(y) / np.diff(x)
    scale = max(1.0, float(np.nanmax(np.abs(slopes))))
    increasing = bool(np.all(slopes > 0))
    convex = bool(np.all(np.diff(slopes) >= -tol * scale))
    try:
        d0 = float(b.derivative(np.float64(b.left)))
    except ArithmeticError:
        d0 = math.nan
    v0 = float(y[0])
    return BranchCheck(
        index=b.index if b.index is not None else -1,
        increasing=increasing,
        convex=convex,
        zero_at_left=abs(v0) <= tol,
        positive_derivative=bool(d0 > 0),
        value_at_left=v0,
        derivative_at_left=d0,
    )


def _inverse_slopes(m: MapSpec, tail_index: int):
    """``(a_i, 1/tau'(a_i))`` for the positive partition points ``a_1, a_2, ...``."""
    if m.is_finite:
        pts = [b.left for b in m.branches if b.left > 0.0]
        slopes = [float(b.derivative(np.float64(b.left))) for b in m.branches if b.left > 0.0]
        return np.array(pts, dtype=float), 1.0 / np.array(slopes, dtype=float)
    i = np.arange(1, tail_index + 1, dtype=float)
    a = np.asarray(m.family.partition(i), dtype=float)
    with np.errstate(divide="ignore"):
        t = 1.0 / m.family.slope_at_partition(i)
    return a, t


def _tail_estimate(m: MapSpec, terms: np.ndarray) -> float:
    """Upper estimate of ``sum_{i > T} 1/tau'(a_i)`` beyond the last computed term.

    Fits ``t_i ~ c i^{-p}`` through ``t_{T/2}`` and ``t_T`` and integrates from
    ``T``; ``p <= 1`` means the series diverges.
    """
    if m.is_finite or len(terms) == 0 or terms[-1] == 0.0:
        return 0.0
    T = len(terms)
    if T < 4:
        return math.inf
    h = T // 2
    t_h, t_T = float(terms[h - 1]), float(terms[-1])
    if t_h <= t_T:
        return math.inf
    p = math.log(t_h / t_T) / math.log(T / h)
    return t_T * T / (p - 1.0) if p > 1.0 else math.inf


def _cutoff(terms: np.ndarray, tail: float = 0.0):
    """Smallest ``N >= 1`` whose tail sum over ``i > N`` (plus ``tail``) is below 1."""
    csum = np.concatenate([[0.0], np.cumsum(terms)])
    total = csum[-1]
    tails = total - csum + tail  # tails[N] = sum_{i > N}
    for N in range(1, len(tails)):
        if tails[N] < 1.0:
            return N, float(tails[N])
    if len(terms) <= 1:
        return 1, 0.0
    return None, math.inf


def validate(m: MapSpec, samples_per_branch: int = DEFAULT_SECANTS,
             tail_index: int = DEFAULT_TAIL_INDEX, tol: float = 1e-9,
             max_branches: int = 256) -> ValidationReport:
    """Check the piecewise convex class conditions numerically.

    Monotonicity and convexity are judged from ``samples_per_branch`` sampled
    secants per branch; only the first ``max_branches`` branches of a
    countable map are sampled.  Failures are recorded, never raised.
    """
    if samples_per_branch < 3:
        raise ValueError("samples_per_branch must be >= 3")
    problems = []
    n_check = min(m.n_branches, max_branches)
    checks = []
    for i in range(1, n_check + 1):
        try:
            c = _check_branch(m.branch(i), samples_per_branch, tol)
        except ArithmeticError as exc:
            problems.append(f"branch {i}: {exc}")
            c = BranchCheck(i, False, False, False, False, math.nan, math.nan)
        checks.append(c)
        if not c.ok:
            what = [name for name, ok in (("increasing", c.increasing), ("convex", c.convex),
                                          ("zero at left end", c.zero_at_left),
                                          ("positive slope at left end", c.positive_derivative))
                    if not ok]
            problems.append(f"branch {i}: not " + ", not ".join(what))

    _, terms = _inverse_slopes(m, tail_index)
    finite_terms = bool(np.all(np.isfinite(terms))) and bool(np.all(terms >= 0))
    if not finite_terms:
        problems.append("1/tau'(a_i) not finite and non-negative")
    tail_est = _tail_estimate(m, terms) if finite_terms else math.inf
    if finite_terms and tail_est >= 1.0:
        problems.append(f"sum of 1/tau'(a_i) diverges or converges too slowly "
                        f"(estimated tail beyond i = {len(terms)}: {tail_est:.3g})")
    C = float(np.sum(terms)) + tail_est if finite_terms else math.inf
    N, d1 = _cutoff(terms, tail_est) if tail_est < 1.0 else (None, math.inf)
    if N is None and tail_est < 1.0:
        problems.append("no N with tail sum D1 < 1")
    admissible = not problems
    return ValidationReport(
        branch_checks=tuple(checks),
        branches_checked=n_check,
        inverse_slope_sum=C,
        tail_cutoff=N,
        d1=d1,
        tail_index=tail_index if not m.is_finite else len(terms),
        tail_estimate=tail_est,
        admissible=admissible,
        problems=tuple(problems),
    )


@dataclass(frozen=True)
class LYConstants:
    """Constants of the sup-norm Lasota-Yorke inequality for the truncated maps.

    ``||P f||_inf <= (a_n + D1) ||f||_inf + D ||f||_1`` for non-increasing
    ``f >= 0``, hence ``||f_{n,k}||_inf <= D / (1 - (a_n + D1))``.
    ``alpha1 = 1/a_n`` is the slope of the linear filler branch at 0.
    """

    N: int
    D1: float
    C: float
    D: float
    n: int
    a_n: float
    alpha1: float
    contraction: float
    sup_bound: float
    tail_truncation_index: int
    tail_estimate: float


def ly_constants(m: MapSpec, n: int, tail_index: int = DEFAULT_TAIL_INDEX) -> LYConstants:
    """Compute ``N, D1, C, D`` and the uniform bound on Ulam densities.

    For a countable map the infinite sums run to ``tail_index``; for a
    finite (truncated) map they run over its positive partition points.
    """
    a, terms = _inverse_slopes(m, tail_index)
    if not (np.all(np.isfinite(terms)) and np.all(terms >= 0)):
        raise NotContracting("1/tau'(a_i) not finite; map is not admissible")
    tail_est = _tail_estimate(m, terms)
    if tail_est >= 1.0:
        raise NotContracting(f"sum of 1/tau'(a_i) diverges or converges too slowly "
                             f"(estimated tail {tail_est:.3g})")
    N, d1 = _cutoff(terms, tail_est)
    if N is None:
        raise NotContracting("no N with D1 < 1")
    a_n = m.partition_point(n)
    contraction = a_n + d1
    if contraction >= 1.0:
        raise NotContracting(f"a_n + D1 = {contraction:.6g} >= 1 (n={n}, N={N})")
    if n < N:
        raise ValueError(f"n={n} must be >= N={N}")
    D = float(np.sum(terms[:N] / a[:N]))
    C = float(np.sum(terms)) + tail_est
    return LYConstants(
        N=N,
        D1=d1,
        C=C,
        D=D,
        n=n,
        a_n=a_n,
        alpha1=1.0 / a_n if a_n > 0 else math.inf,
        contraction=contraction,
        sup_bound=D / (1.0 - contraction),
        tail_truncation_index=len(terms),
        tail_estimate=tail_est,
    )
