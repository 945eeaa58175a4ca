"""Finite-branch approximations of a countable map.

``tau_n`` equals ``tau`` on ``[a_n, 1]`` and is the linear filler
``x -> x / a_n`` on ``[0, a_n)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange
from .map_model import Branch, MapSpec


class ResolutionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TruncatedMap:
    base: MapSpec
    n: int
    a_n: float
    spec: MapSpec

    @property
    def linear_branch(self) -> Branch:
        return self.spec.branch(self.n + 1)

    @property
    def slope_at_zero(self) -> float:
        return 1.0 / self.a_n


def _check(base: MapSpec, n: int):
    if base.is_finite:
        raise ValueError("truncation needs a countable map")
    if n < 1:
        raise ValueError("n must be >= 1")


def truncate(base: MapSpec, n: int) -> TruncatedMap:
    _check(base, n)
    if n > base.n_branches:
        raise IndexOutOfRange(f"n={n} exceeds the {base.n_branches} materialised branches")
    a_n = base.partition_point(n)
    if not 0.0 < a_n < 1.0:
        raise ValueError(f"a_n = {a_n} must lie in (0, 1)")
    slope = 1.0 / a_n
    filler = Branch(
        0.0, a_n,
        forward=lambda x: np.asarray(x, dtype=float) * slope,
        derivative=lambda x: np.full(np.shape(x), slope) if np.ndim(x) else slope,
        closed_form_inverse=lambda y: np.asarray(y, dtype=float) * a_n,
        index=n + 1,
        image=(0.0, 1.0),
    )
    kept = [base.branch(i) for i in range(1, n + 1)]
    name = f"{base.name}[n={n}]" if base.name else f"truncated[n={n}]"
    return TruncatedMap(base, n, a_n, MapSpec.finite(kept + [filler], name=name))


def almost_uniform_gap(base: MapSpec, n: int) -> float:
    """Measure ``a_n`` of the set ``[0, a_n)`` where ``tau_n`` may differ from ``tau``."""
    _check(base, n)
    a_n = base.partition_point(n)
    if a_n < base.a_min:
        warnings.warn(f"a_{n} = {a_n:.3e} is below the resolution floor {base.a_min:.1e}",
                      ResolutionWarning, stacklevel=2)
    return a_n
