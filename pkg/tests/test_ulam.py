import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ulamconvex import catalog
from ulamconvex.errors import DimensionMismatch, InvalidK
from ulamconvex.map_model import Branch, MapSpec, eval_map
from ulamconvex.truncation import truncate
from ulamconvex.ulam import (
    DensityVector,
    PartitionGrid,
    apply_operator,
    project_Q,
    transfer_breakpoints,
    transfer_pointwise,
    ulam_matrix,
)


def _truncated(name, n):
    return truncate(catalog.get(name).build(), n).spec


def _sampled_matrix(m, k, samples=2**21):
    """Oracle: midpoint-rule estimate of k * lambda(J_i cap tau^{-1}(J_j))."""
    x = (np.arange(samples) + 0.5) / samples
    i = np.minimum((x * k).astype(int), k - 1)
    j = np.minimum((eval_map(m, x) * k).astype(int), k - 1)
    out = np.zeros((k, k))
    np.add.at(out, (i, j), k / samples)
    return out


# examples ------------------------------------------------------------------

@pytest.mark.parametrize("k", [1, 3, 4, 17])
def test_identity_matrix(k):
    M = ulam_matrix(catalog.identity(), k)
    np.testing.assert_array_equal(M.toarray(), np.eye(k))


def test_doubling_k2():
    np.testing.assert_allclose(ulam_matrix(catalog.doubling(), 2).toarray(), 0.5, rtol=0, atol=1e-15)


def test_example2_n1_k4_first_row():
    M = ulam_matrix(_truncated("example2", 1), 4).toarray()
    np.testing.assert_allclose(M[0], [0.5, 0.5, 0.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("name, n", [("example1", 3), ("example2", 4), ("example1", 8)])
def test_matches_sampling_oracle(name, n):
    m = _truncated(name, n)
    k = 16
    np.testing.assert_allclose(ulam_matrix(m, k).toarray(), _sampled_matrix(m, k), atol=2e-4)


def test_finite_map_with_bisection_only():
    # x -> x^2 + x mapped onto [0, 2) then folded: two convex branches, no inverse given
    def mk(left, right):
        w = right - left
        return Branch(left, right, lambda x: ((x - left) / w) ** 2 * 0.5 + (x - left) / w * 0.5,
                      lambda x: ((x - left) / w + 0.5) / w)
    m = MapSpec.finite([mk(0.5, 1.0), mk(0.0, 0.5)])
    np.testing.assert_allclose(ulam_matrix(m, 8, tol=1e-13).toarray(), _sampled_matrix(m, 8), atol=2e-4)


# invariants ----------------------------------------------------------------

@pytest.mark.parametrize("name", ["example1", "example2"])
@pytest.mark.parametrize("n", [2, 5, 10])
@pytest.mark.parametrize("k", [16, 100, 1000])
def test_row_stochastic_closed_form(name, n, k):
    M = ulam_matrix(_truncated(name, n), k)
    assert M.max_row_defect() <= 1e-8
    data = M.matrix.data
    assert np.all((data >= 0) & (data <= 1 + 1e-12))


def _strip_inverses(m):
    return MapSpec.finite([Branch(b.left, b.right, b.forward, b.derivative, None, b.index, b.image)
                           for b in m.branches])


@pytest.mark.parametrize("name", ["example1", "example2"])
@pytest.mark.parametrize("k", [16, 100, 1000])
def test_row_stochastic_bisection(name, k):
    m = _strip_inverses(_truncated(name, 5))
    assert ulam_matrix(m, k, tol=1e-10).max_row_defect() <= 1e-6


def test_bisection_and_closed_form_assemble_alike():
    m = _truncated("example1", 6)
    a = ulam_matrix(m, 100).toarray()
    b = ulam_matrix(_strip_inverses(m), 100, tol=1e-12).toarray()
    assert np.max(np.abs(a - b)) <= 1e-9


def test_parallel_assembly_is_identical(monkeypatch):
    m = _truncated("example2", 10)
    serial = ulam_matrix(m, 300, workers=1)
    pooled = ulam_matrix(m, 300, workers=4)
    assert (serial.matrix != pooled.matrix).nnz == 0
    monkeypatch.setenv("ULAM_THREADS", "3")
    assert (ulam_matrix(m, 300).matrix != serial.matrix).nnz == 0


def test_renormalize_option():
    M = ulam_matrix(_truncated("example1", 5), 100, renormalize=True)
    assert M.renormalized
    assert M.max_row_defect() <= 1e-15
    assert M.raw_row_defect <= 1e-8


def test_sparsity_is_banded():
    M = ulam_matrix(_truncated("example2", 10), 1000)
    # each row meets at most two branches; each contributes a contiguous band
    assert M.nnz_per_row().max() < 1000
    assert M.matrix.nnz < 0.2 * 1000 * 1000


def test_invalid_k():
    with pytest.raises(InvalidK):
        ulam_matrix(catalog.identity(), 0)
    with pytest.raises(InvalidK):
        PartitionGrid(0)
    with pytest.raises(ValueError):
        ulam_matrix(catalog.example2(), 10)


# operator ------------------------------------------------------------------

def test_apply_operator_examples():
    f = DensityVector([0.3, 1.2, 1.5])
    assert np.array_equal(apply_operator(ulam_matrix(catalog.identity(), 3), f).values, f.values)
    g = apply_operator(ulam_matrix(catalog.doubling(), 2), DensityVector([2.0, 0.0]))
    np.testing.assert_allclose(g.values, [1.0, 1.0], atol=1e-15)
    with pytest.raises(DimensionMismatch):
        apply_operator(ulam_matrix(catalog.identity(), 3), DensityVector([1.0, 1.0]))


@pytest.fixture(scope="module")
def ex_matrices():
    return [ulam_matrix(_truncated(name, n), k)
            for name in ("example1", "example2") for n, k in ((3, 40), (10, 200))]


def test_uniform_mass(ex_matrices):
    for M in ex_matrices:
        g = apply_operator(M, DensityVector.uniform(M.k))
        assert abs(g.mass() - 1.0) <= M.max_row_defect() + 1e-13


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_mass_conservation(ex_matrices, seed):
    rng = np.random.default_rng(seed)
    for M in ex_matrices:
        f = DensityVector(rng.exponential(size=M.k))
        g = apply_operator(M, f)
        assert np.all(g.values >= 0)
        assert abs(g.mass() - f.mass()) <= (M.max_row_defect() + 1e-13) * f.mass() * 2


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_monotone_preservation(ex_matrices, seed):
    rng = np.random.default_rng(seed)
    for M in ex_matrices:
        f = DensityVector(np.sort(rng.exponential(size=M.k))[::-1])
        assert apply_operator(M, f).monotonicity_defect() <= 1e-9


# projection ----------------------------------------------------------------

def test_project_examples():
    g = catalog.EXAMPLE1_DENSITY
    np.testing.assert_allclose(project_Q(g, 2).values, [1.5, 0.5], atol=1e-14)
    assert np.allclose(project_Q(lambda x: np.ones_like(x), 7).values, 1.0, atol=1e-14)
    np.testing.assert_allclose(project_Q(g, 1).values, [1.0], atol=1e-14)


def test_project_polynomial_oracle():
    # exact cell averages of 3x^2 are (b^3 - a^3) k
    k = 13
    e = np.arange(k + 1) / k
    np.testing.assert_allclose(project_Q(lambda x: 3 * x * x, k).values,
                               (e[1:] ** 3 - e[:-1] ** 3) * k, atol=1e-12)


def test_project_respects_breakpoints():
    f = lambda x: np.where(x < 1 / 3, 3.0, 0.0)
    v = project_Q(f, 2, quad_tol=1e-12, breakpoints=[1 / 3]).values
    np.testing.assert_allclose(v, [2.0, 0.0], atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=60))
def test_project_idempotent(vals):
    f = DensityVector(vals)
    assert np.array_equal(project_Q(f, f.k).values, f.values)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=20), st.integers(1, 5))
def test_project_refine_then_coarsen(vals, r):
    f = DensityVector(vals)
    fine = project_Q(f, f.k * r)
    np.testing.assert_allclose(project_Q(fine, f.k).values, f.values, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("name, n, k", [("example1", 4, 16), ("example2", 6, 24)])
def test_commutes_with_continuous_operator(name, n, k):
    m = _truncated(name, n)
    M = ulam_matrix(m, k)
    bp = transfer_breakpoints(m, k)
    rng = np.random.default_rng(11)
    for _ in range(20):
        f = DensityVector(rng.exponential(size=k)).normalized()
        Pf = project_Q(lambda x: transfer_pointwise(m, f, x), k, quad_tol=1e-10, breakpoints=bp)
        assert np.sum(np.abs(Pf.values - apply_operator(M, f).values)) / k <= 1e-9


def test_transfer_pointwise_doubling():
    x = np.linspace(0, 0.999, 31)
    np.testing.assert_allclose(transfer_pointwise(catalog.doubling(), lambda z: np.ones_like(z), x), 1.0)
    f = DensityVector([2.0, 0.0])
    np.testing.assert_allclose(transfer_pointwise(catalog.doubling(), f, x), 1.0)
