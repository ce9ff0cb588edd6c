import numpy as np
import pytest

from weakdep.blocks import (
    BlockLayout,
    conditional_block_sums,
    conditional_variances,
    degeneracy_probability,
    make_layout,
)
from weakdep.errors import LayoutError, ModelMismatchError, PreconditionError
from weakdep.innovations import get_law
from weakdep.processes import (
    DoublingModel,
    GeometricScheme,
    LinearModel,
    identity_scheme,
)

GAUSS = get_law("standard-gaussian")


# --------------------------------------------------------------------------
# layout
# --------------------------------------------------------------------------

def test_layout_boundary_case_accepted():
    for N, m in ((2, 4), (5, 16), (9, 3)):
        n = 2 * (N - 1) * m + m
        lay = make_layout(n, m)
        assert lay.N == N and lay.m_prime == m


def test_layout_errors_from_exhaustive_search():
    with pytest.raises(LayoutError):
        make_layout(100, 10)
    with pytest.raises(LayoutError):
        make_layout(95, 10)


def test_layout_picks_largest_valid_n_blocks():
    # brute-force oracle over all N
    for n, m in ((1000, 16), (700, 10), (333, 7), (93, 5)):
        best = None
        for N in range(2, n):
            mp = n - 2 * (N - 1) * m
            if 2 * mp >= m and mp <= m:
                best = max(best or 0, N)
        if best is None:
            with pytest.raises(LayoutError):
                make_layout(n, m)
        else:
            lay = make_layout(n, m)
            assert lay.N == best


def test_layout_invariants_enforced():
    with pytest.raises(LayoutError):
        BlockLayout(n=100, m=10, N=5, m_prime=25)
    with pytest.raises(PreconditionError):
        make_layout(20, 10)  # n < 3m


# --------------------------------------------------------------------------
# conditional block sums
# --------------------------------------------------------------------------

def test_identity_scheme_block_sums_are_plain_sums():
    # with no temporal dependence the conditional mean of an unobserved
    # innovation is 0, so U_j is the plain sum of its unobserved block
    from weakdep.innovations import SERIES_BASE, law_values
    m = LinearModel(identity_scheme(), GAUSS)
    lay = make_layout(16 * 11, 16)
    bs = conditional_block_sums(m, lay, replication=0, seed=1)
    eps = law_values(GAUSS, 1, 0, SERIES_BASE, np.arange(1, lay.n + 1))
    for j in (1, lay.N):
        lo = (2 * j - 2) * lay.m + 1
        hi = min((2 * j - 1) * lay.m, lay.n)
        if j % 2 == 1:  # odd block pair index: U-range is an odd block
            expect = eps[lo - 1:hi].sum()
            assert bs.U[j - 1] == pytest.approx(expect, rel=1e-12)


def test_exact_mode_rejects_nonlinear():
    lay = make_layout(16 * 11, 16)
    with pytest.raises(ModelMismatchError):
        conditional_block_sums(DoublingModel("cos2pi"), lay, 0, mode="exact")


def test_nested_mc_matches_exact_linear():
    m = LinearModel(GeometricScheme(0.5, length=16), GAUSS)
    lay = make_layout(16 * 11, 16)
    exact = conditional_block_sums(m, lay, replication=3, seed=2)
    mc = conditional_block_sums(m, lay, replication=3, seed=2,
                                mode="nested-mc", K=8192)
    # Y1 residuals are MC noise of the conditional-mean estimate; each block
    # mean has sd ~ sigma_block/sqrt(K)
    sd_block = np.sqrt(2 * lay.m * 2.0)  # crude block-sum scale
    tol = 5 * sd_block / np.sqrt(8192)
    assert np.max(np.abs(mc.Y1 - exact.Y1)) <= tol
    assert np.max(np.abs(mc.Y2 - exact.Y2)) <= tol


def test_block_sums_deterministic():
    m = LinearModel(GeometricScheme(0.5, length=16), GAUSS)
    lay = make_layout(16 * 11, 16)
    a = conditional_block_sums(m, lay, 5, seed=7)
    b = conditional_block_sums(m, lay, 5, seed=7)
    assert np.array_equal(a.Y1, b.Y1) and np.array_equal(a.Y2, b.Y2)


# --------------------------------------------------------------------------
# conditional variances
# --------------------------------------------------------------------------

def test_identity_scheme_sigma_half():
    m = LinearModel(identity_scheme(), GAUSS)
    lay = make_layout(16 * 11, 16)
    d = conditional_variances(m, lay)
    np.testing.assert_allclose(d.sigma_j, 0.5)
    assert d.identity_residual < 1e-12


@pytest.mark.parametrize("n,m", [(16 * 11, 16), (1000, 16), (350, 10),
                                 (93, 5)])
def test_variance_identity_residual(n, m):
    mod = LinearModel(GeometricScheme(0.5, length=64), GAUSS)
    d = conditional_variances(mod, make_layout(n, m))
    assert d.identity_residual < 1e-10
    assert d.ss_nm2 == pytest.approx(d.sigma_bar_m2 + d.varsigma_bar_m2)


def test_conditional_independence_exact():
    # Y1 blocks draw on disjoint unobserved innovation sets: their sample
    # covariance over replications is pure noise
    m = LinearModel(GeometricScheme(0.5, length=16), GAUSS)
    lay = make_layout(16 * 11, 16)
    R = 3000
    y1 = np.array([conditional_block_sums(m, lay, r, seed=11).Y1
                   for r in range(R)])
    c = np.corrcoef(y1[:, 0], y1[:, 1])[0, 1]
    assert abs(c) <= 4.0 / np.sqrt(R)


def test_sigma_j_matches_mc_second_moment():
    # sigma_{j|m}^2 = E Y1_j^2 / (2m): check the deterministic exact value
    # against the replication average
    m = LinearModel(GeometricScheme(0.5, length=16), GAUSS)
    lay = make_layout(16 * 11, 16)
    d = conditional_variances(m, lay)
    R = 4000
    y1 = np.array([conditional_block_sums(m, lay, r, seed=13).Y1
                   for r in range(R)])
    est = (y1 ** 2).mean(axis=0) / (2 * lay.m)
    se = (y1 ** 2).std(axis=0, ddof=1) / np.sqrt(R) / (2 * lay.m)
    assert np.all(np.abs(est - d.sigma_j) <= 5 * se)


def test_last_block_not_padded():
    # with m' < m the last pair has a shorter R-range, so sigma_N != sigma_1
    mod = LinearModel(GeometricScheme(0.5, length=32), GAUSS)
    lay = make_layout(1000, 16)
    assert lay.m_prime < lay.m
    d = conditional_variances(mod, lay)
    assert d.sigma_j[-1] != pytest.approx(d.sigma_j[0], rel=1e-6)


# --------------------------------------------------------------------------
# degeneracy probability
# --------------------------------------------------------------------------

def test_degeneracy_identity_scheme_zero():
    m = LinearModel(identity_scheme(), GAUSS)
    lay = make_layout(16 * 17, 16)  # N >= 8
    assert lay.N >= 8
    assert degeneracy_probability(m, lay, R=10_000) == 0.0


def test_degeneracy_adversarial_threshold():
    m = LinearModel(identity_scheme(), GAUSS)
    lay = make_layout(16 * 17, 16)
    freq = degeneracy_probability(m, lay, R=1000, threshold_factor=2.0)
    assert freq == 1.0


def test_degeneracy_requires_replications():
    m = LinearModel(identity_scheme(), GAUSS)
    with pytest.raises(PreconditionError):
        degeneracy_probability(m, make_layout(16 * 11, 16), R=10)
