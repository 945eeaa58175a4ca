import numpy as np
import pytest

from ulamconvex import catalog
from ulamconvex.analysis import l1_between, l1_vs_exact
from ulamconvex.errors import DegenerateOrbit
from ulamconvex.orbit import birkhoff_density, orbit_histogram
from ulamconvex.truncation import truncate


def test_doubling_is_uniform():
    d = birkhoff_density(catalog.doubling(), 10, 10**6, burn_in=10_000, seed=1)
    assert np.max(np.abs(d.values - 1.0)) <= 0.02


def test_identity_is_degenerate():
    with pytest.raises(DegenerateOrbit):
        orbit_histogram(catalog.identity(), 10, 10_000, seed=0)


def test_counts_add_up():
    h = orbit_histogram(catalog.doubling(), 7, 12_345, burn_in=345, seed=9, walkers=100)
    assert h.counts.sum() == 12_000
    assert h.density().mass() == pytest.approx(1.0)


def test_reproducible():
    m = truncate(catalog.example2(), 5).spec
    a = orbit_histogram(m, 50, 200_000, 1000, seed=42)
    b = orbit_histogram(m, 50, 200_000, 1000, seed=42)
    c = orbit_histogram(m, 50, 200_000, 1000, seed=43)
    assert np.array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, c.counts)


def test_fixed_start_point():
    h = orbit_histogram(catalog.doubling(), 4, 4000, seed=0, x0=0.3, walkers=8)
    assert h.counts.sum() == 4000


def test_merge_is_associative():
    m = catalog.doubling()
    hs = [orbit_histogram(m, 8, 5000, 100, seed=s) for s in range(3)]
    left = hs[0].merge(hs[1]).merge(hs[2])
    right = hs[0].merge(hs[1].merge(hs[2]))
    swapped = hs[2].merge(hs[0]).merge(hs[1])
    assert np.array_equal(left.counts, right.counts)
    assert np.array_equal(left.counts, swapped.counts)
    assert left.density().mass() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        hs[0].merge(orbit_histogram(m, 9, 5000, seed=0))


def test_argument_checks():
    with pytest.raises(ValueError):
        orbit_histogram(catalog.doubling(), 4, 100, burn_in=100)
    with pytest.raises(ValueError):
        orbit_histogram(catalog.example1(), 4, 100)


@pytest.mark.slow
def test_example1_against_exact_density():
    m = truncate(catalog.example1(), 12).spec
    d = birkhoff_density(m, 100, 10**7, burn_in=100_000, seed=0)
    assert l1_vs_exact(d, catalog.EXAMPLE1_DENSITY) <= 0.13


def test_small_orbit_near_ulam_density():
    from ulamconvex.solver import stationary_density
    from ulamconvex.ulam import ulam_matrix
    m = truncate(catalog.example2(), 6).spec
    d = birkhoff_density(m, 20, 10**6, burn_in=10_000, seed=3)
    f = stationary_density(ulam_matrix(m, 20)).density
    assert l1_between(d, f) <= 0.02
