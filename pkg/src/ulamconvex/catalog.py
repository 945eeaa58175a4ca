"""The two worked example maps plus small toy maps for tests."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .map_model import Branch, BranchFamily, MapSpec


@dataclass(frozen=True)
class AffineDensity:
    """``x -> intercept + slope * x``; lets error norms use closed forms."""

    intercept: float
    slope: float

    def __call__(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    constructor: Callable[..., MapSpec]
    exact_density: Optional[Callable] = None
    notes: str = ""

    def build(self, *args, **kwargs) -> MapSpec:
        return self.constructor(*args, **kwargs)


def default_branch_count(n: int = 0) -> int:
    """Branches materialised so that truncations up to ``n`` are exact."""
    return max(n + 5, 40)


# Example 1 -----------------------------------------------------------------
# tau = h^{-1} o T o h with T(x) = i(i+1)(x - 1/(i+1)) on [1/(i+1), 1/i]
# and h(x) = 1 - (1 - x)^2.

def _ex1_partition(i):
    i = np.asarray(i, dtype=float)
    return 1.0 - np.sqrt(i / (i + 1.0))


def _ex1_radicand(x, i):
    # i(i+1)(1-x)^2 - (i^2 - 1), factored through the right end a_{i-1} so that
    # a_{i-1} - x is exact near the square-root singularity
    x = np.asarray(x, dtype=float)
    a = _ex1_partition(np.asarray(i, dtype=float) - 1.0)
    return i * (i + 1.0) * (a - x) * (2.0 - x - a)


def _ex1_forward(x, i):
    # radicand is 0 at the right end; clamp rounding noise there
    return 1.0 - np.sqrt(np.maximum(_ex1_radicand(x, i), 0.0))


def _ex1_derivative(x, i):
    u = 1.0 - np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return i * (i + 1.0) * u / np.sqrt(np.maximum(_ex1_radicand(x, i), 0.0))


def _ex1_inverse(y, i):
    # x = 1 - sqrt(((1-y)^2 - 1 + i^2) / (i(i+1))), rewritten as a_{i-1} minus a
    # small positive offset so x keeps full precision near the right end
    v = 1.0 - np.asarray(y, dtype=float)
    i = np.asarray(i, dtype=float)
    ii = i * (i + 1.0)
    u = np.sqrt((v * v - 1.0 + i * i) / ii)
    s = np.sqrt((i - 1.0) / i)
    den = ii * (u + s)
    with np.errstate(invalid="ignore", divide="ignore"):
        # the offset equals u - s, which is 0 when u + s = 0 (i = 1, y = 1)
        off = np.where(den > 0, v * v / den, 0.0)
    return _ex1_partition(i - 1.0) - off


EXAMPLE1_FAMILY = BranchFamily(_ex1_partition, _ex1_forward, _ex1_derivative, _ex1_inverse)
EXAMPLE1_DENSITY = AffineDensity(2.0, -2.0)


def example1(n_branches: Optional[int] = None) -> MapSpec:
    """Conjugate of the countable piecewise linear map; invariant density ``2(1-x)``."""
    if n_branches is None:
        n_branches = default_branch_count()
    if n_branches < 1:
        raise ValueError("n_branches must be >= 1")
    return MapSpec.countable(EXAMPLE1_FAMILY, n_branches=n_branches, name="example1")


# Example 2 -----------------------------------------------------------------

def _ex2_partition(i):
    return 1.0 / (np.asarray(i, dtype=float) + 1.0)


def _ex2_pole(i):
    return (2.0 * i + 1.0) / (i * (i + 1.0))


def _ex2_forward(x, i):
    return 1.0 / (_ex2_pole(i) - np.asarray(x, dtype=float)) - i


def _ex2_derivative(x, i):
    d = _ex2_pole(i) - np.asarray(x, dtype=float)
    return 1.0 / (d * d)


def _ex2_inverse(y, i):
    return _ex2_pole(i) - 1.0 / (np.asarray(y, dtype=float) + i)


EXAMPLE2_FAMILY = BranchFamily(_ex2_partition, _ex2_forward, _ex2_derivative, _ex2_inverse)


def example2(n_branches: Optional[int] = None) -> MapSpec:
    """Mobius-branch map on ``[1/(i+1), 1/i]``; slope ``i^2`` at ``a_i``.  No known density."""
    if n_branches is None:
        n_branches = default_branch_count()
    if n_branches < 1:
        raise ValueError("n_branches must be >= 1")
    return MapSpec.countable(EXAMPLE2_FAMILY, n_branches=n_branches, name="example2")


# toys ----------------------------------------------------------------------

def linear_branch(left: float, right: float, index: Optional[int] = None) -> Branch:
    """Full linear branch mapping ``[left, right)`` onto ``[0, 1)``."""
    w = right - left
    return Branch(
        left, right,
        forward=lambda x: (np.asarray(x, dtype=float) - left) / w,
        derivative=lambda x: np.full(np.shape(x), 1.0 / w) if np.ndim(x) else 1.0 / w,
        closed_form_inverse=lambda y: left + w * np.asarray(y, dtype=float),
        index=index,
        image=(0.0, 1.0),
    )


def identity() -> MapSpec:
    return MapSpec.finite([linear_branch(0.0, 1.0, 1)], name="identity")


def doubling() -> MapSpec:
    return MapSpec.finite([linear_branch(0.5, 1.0, 1), linear_branch(0.0, 0.5, 2)], name="doubling")


def full_linear(m: int) -> MapSpec:
    """``x -> m x mod 1`` with ``m`` full branches."""
    edges = np.linspace(1.0, 0.0, m + 1)
    edges[-1] = 0.0
    bs = [linear_branch(float(edges[i + 1]), float(edges[i]), i + 1) for i in range(m)]
    return MapSpec.finite(bs, name=f"times{m}")


UNIFORM_DENSITY = AffineDensity(1.0, 0.0)

CATALOG = {
    "example1": CatalogEntry("example1", example1, EXAMPLE1_DENSITY,
                             "countable convex map conjugate to a piecewise linear map"),
    "example2": CatalogEntry("example2", example2, None, "invariant density not known in closed form"),
    "identity": CatalogEntry("identity", identity, None, "every density is invariant"),
    "doubling": CatalogEntry("doubling", doubling, UNIFORM_DENSITY, "Lebesgue measure is invariant"),
}


def get(name: str) -> CatalogEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown catalog map {name!r}; choose from {sorted(CATALOG)}") from None


def toy_maps() -> list:
    return [CATALOG["identity"], CATALOG["doubling"]]
