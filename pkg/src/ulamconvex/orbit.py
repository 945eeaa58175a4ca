"""Monte Carlo cross-check: cell-occupation histograms of long orbits.

A statistical oracle only.  Floating point orbits of expanding maps shed one
or more bits per step (``2x mod 1`` collapses onto 0 within ~53 steps), so
every iterate is dithered by uniform noise of size ``jitter``; the maps are
stochastically stable, so the perturbation moves the invariant density by a
negligible amount.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateOrbit
from .map_model import MapSpec, eval_map
from .ulam import DensityVector

DEFAULT_WALKERS = 1024
DEFAULT_JITTER = 1e-12
DEFAULT_FLOOR = 1e-12
MAX_ANOMALY_RATE = 0.01


@dataclass(frozen=True, eq=False)
class OrbitHistogram:
    k: int
    counts: np.ndarray
    burn_in: int
    total_steps: int
    seed: int
    anomalies: int = 0
    walkers: int = 1

    def density(self) -> DensityVector:
        return DensityVector(self.counts * self.k / (self.total_steps - self.burn_in))

    def merge(self, other: "OrbitHistogram") -> "OrbitHistogram":
        """Pool two histograms on the same grid (associative, order independent)."""
        if other.k != self.k:
            raise ValueError("histograms live on different grids")
        return OrbitHistogram(
            self.k, self.counts + other.counts,
            self.burn_in + other.burn_in, self.total_steps + other.total_steps,
            self.seed, self.anomalies + other.anomalies, self.walkers + other.walkers)


def orbit_histogram(m: MapSpec, k: int, steps: int, burn_in: int = 0, seed: int = 0,
                    x0: Optional[float] = None, walkers: int = DEFAULT_WALKERS,
                    jitter: float = DEFAULT_JITTER, floor: float = DEFAULT_FLOOR) -> OrbitHistogram:
    """Histogram of ``steps`` orbit points, the first ``burn_in`` discarded.

    ``walkers`` orbits advance in lockstep; step ``s`` of the pooled sequence
    is walker ``s % walkers`` after ``s // walkers + 1`` iterations.  Points
    below ``floor`` and exact fixed-point stalls (``tau(x) == x``) are
    anomalies: the walker is re-seeded uniformly and the event counted.
    """
    if not m.is_finite:
        raise ValueError("orbit histograms need a finite-branch map")
    if steps <= burn_in or burn_in < 0:
        raise ValueError("need steps > burn_in >= 0")
    if k < 1:
        raise ValueError("k must be >= 1")
    walkers = max(1, min(walkers, steps))
    rng = np.random.default_rng(seed)
    x = rng.random(walkers) if x0 is None else np.full(walkers, float(x0))
    counts = np.zeros(k, dtype=np.int64)
    anomalies = 0
    hi = np.nextafter(1.0, 0.0)
    rounds = -(-steps // walkers)
    for r in range(rounds):
        y = eval_map(m, x)
        bad = (y < floor) | (y == x)
        if jitter > 0:
            y = np.clip(np.abs(y + rng.uniform(-jitter, jitter, walkers)), 0.0, hi)
        if bad.any():
            y[bad] = rng.random(int(bad.sum()))
        start = r * walkers
        lo_w = max(0, burn_in - start)
        hi_w = min(walkers, steps - start)
        if hi_w > lo_w:
            anomalies += int(bad[lo_w:hi_w].sum())
            cells = np.minimum((y[lo_w:hi_w] * k).astype(np.int64), k - 1)
            counts += np.bincount(cells, minlength=k)
        x = y
    recorded = steps - burn_in
    if anomalies > MAX_ANOMALY_RATE * recorded:
        raise DegenerateOrbit(
            f"{anomalies} of {recorded} recorded steps were anomalies (floor hits or stalls)")
    return OrbitHistogram(k, counts, burn_in, steps, seed, anomalies, walkers)


def birkhoff_density(m: MapSpec, k: int, steps: int, burn_in: int = 0, seed: int = 0,
                     x0: Optional[float] = None, **kwargs) -> DensityVector:
    """Time-average estimate ``count_i * k / (steps - burn_in)`` of the invariant density."""
    return orbit_histogram(m, k, steps, burn_in, seed, x0, **kwargs).density()
