import numpy as np
import pytest

from ulamconvex import catalog
from ulamconvex.map_model import eval_map, validate
from ulamconvex.solver import stationary_density
from ulamconvex.truncation import truncate
from ulamconvex.ulam import project_Q, ulam_matrix


@pytest.mark.parametrize("name", sorted(catalog.CATALOG))
def test_constructors_validate(name):
    rep = validate(catalog.get(name).build())
    assert rep.admissible, rep.problems


def test_example1_partition_and_density():
    m = catalog.example1()
    i = np.arange(1, 41)
    np.testing.assert_allclose(m.partition_points()[1:], 1 - np.sqrt(i / (i + 1)), atol=1e-16)
    g = catalog.get("example1").exact_density
    assert g(0.0) == 2.0 and g(1.0) == 0.0
    assert project_Q(g, 1).values[0] == pytest.approx(1.0)


def test_example1_conjugacy():
    # tau = h^{-1} o T o h with T the piecewise linear map and h(x) = 1 - (1-x)^2
    m = catalog.example1()
    x = np.random.default_rng(5).uniform(m.floor, 1, 2000)
    h = 1 - (1 - x) ** 2
    i = np.floor(1 / h)
    T = i * (i + 1) * (h - 1 / (i + 1))
    expect = 1 - np.sqrt(1 - T)
    keep = np.abs(1 / h - np.round(1 / h)) > 1e-9  # stay clear of partition points
    np.testing.assert_allclose(eval_map(m, x)[keep], expect[keep], atol=1e-10)


def test_example1_exact_density_is_invariant():
    # the Ulam densities converge to 2(1-x) on the full map; check a large truncation
    m = truncate(catalog.example1(30), 30).spec
    f = stationary_density(ulam_matrix(m, 200)).density
    from ulamconvex.analysis import l1_vs_exact
    assert l1_vs_exact(f, catalog.EXAMPLE1_DENSITY) < 0.07


def test_example2_closed_forms():
    m = catalog.example2()
    for i in (1, 2, 10):
        b = m.branch(i)
        assert (b.left, b.right) == pytest.approx((1 / (i + 1), 1 / i))
        assert b.derivative(b.left) == pytest.approx(i * i)
        assert b.forward(b.left) == pytest.approx(0.0, abs=1e-12)
    assert catalog.get("example2").exact_density is None


def test_toys():
    assert catalog.get("doubling").exact_density(0.3) == 1.0
    np.testing.assert_allclose(eval_map(catalog.full_linear(3), [0.1, 0.5, 0.9]), [0.3, 0.5, 0.7])
    assert [e.name for e in catalog.toy_maps()] == ["identity", "doubling"]
    with pytest.raises(KeyError):
        catalog.get("tent")
    with pytest.raises(ValueError):
        catalog.example1(0)
