import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from vwqc.dataset import pooled_within_class_sd
from vwqc.errors import DataError
from vwqc.simgen import (ScenarioSpec, build_covariance, correlation_range, covariance_to_correlation,
                         ddv_blocks, derive_seed, generate, metadata, paper_grid)


@pytest.mark.parametrize("p", [1, 2, 3, 10, 50, 100])
def test_covariance_symmetric_positive_definite(p):
    s = build_covariance(p)
    np.testing.assert_array_equal(s, s.T)
    assert np.linalg.eigvalsh(s).min() > 0


def test_p_one_is_identity():
    assert build_covariance(1).tolist() == [[1.0]]


@pytest.mark.parametrize("p", [10, 50])
def test_householder_factor_of_rank_two_fill(p):
    from vwqc.simgen import _householder_q, scale_profile
    b = np.linspace(1, 2, p * p).reshape((p, p), order="F")
    q, rank = _householder_q(b)
    assert rank == np.linalg.matrix_rank(b) == 2
    np.testing.assert_allclose(q.T @ q, np.eye(p), atol=1e-12)
    # leading columns agree with LAPACK up to sign; R = Q'B vanishes below row `rank`
    ref = np.linalg.qr(b)[0][:, :2]
    np.testing.assert_allclose(np.abs(np.sum(q[:, :2] * ref, axis=0)), 1.0, atol=1e-10)
    r = q.T @ b
    assert np.abs(r[2:]).max() < 1e-12 * np.abs(b).max() * p
    np.testing.assert_allclose(build_covariance(p), q.T @ np.diag(scale_profile(p)) @ q, atol=1e-14)


def test_householder_full_rank_matches_lapack_up_to_sign():
    from vwqc.simgen import _householder_q
    b = np.random.default_rng(0).standard_normal((6, 6))
    q, rank = _householder_q(b)
    assert rank == 6
    ref = np.linalg.qr(b)[0]
    np.testing.assert_allclose(np.abs(q), np.abs(ref), atol=1e-12)


def test_scale_profile_known_values():
    from vwqc.simgen import scale_profile
    p = 10
    raw = np.array([(p + 2 - j) ** (1.1 + 0.8 * j / (p - 1)) for j in range(1, p + 1)])
    np.testing.assert_allclose(scale_profile(p), raw / raw.max())
    assert scale_profile(p).max() == 1.0


def test_fifty_variable_correlation_range():
    lo, hi = correlation_range(50)
    assert abs(lo - -0.42) <= 0.02 and abs(hi - 0.62) <= 0.02


def test_exp_class_means():
    train, _ = generate(ScenarioSpec("exp", 20000, 3, 1.0, seed=11))
    for k, target in ((0, 1.0), (1, 1.2)):
        x = train.values[train.labels == k]
        se = x.std(axis=0, ddof=1) / np.sqrt(x.shape[0])
        assert np.all(np.abs(x.mean(axis=0) - target) < 5 * se)


def test_exp_marginal_is_exponential():
    train, _ = generate(ScenarioSpec("exp", 4000, 1, 1.0, correlated=False, seed=2))
    assert stats.kstest(train.values[train.labels == 0, 0], "expon").pvalue > 1e-3


def test_t3_marginal_is_student():
    train, _ = generate(ScenarioSpec("t3", 4000, 2, 0.5, correlated=True, seed=2))
    assert stats.kstest(train.values[train.labels == 0, 0], "t", args=(3,)).pvalue > 1e-3


@pytest.mark.parametrize("kind", ["t3", "exp", "logabst", "ddv"])
def test_irrelevant_variables_unshifted(kind):
    train, _ = generate(ScenarioSpec(kind, 10000, 10, 0.1, seed=5))
    a, b = train.values[train.labels == 0], train.values[train.labels == 1]
    for j in range(1, 10):
        assert abs(stats.ttest_ind(a[:, j], b[:, j]).statistic) < 4


def test_relevant_variables_shifted():
    train, _ = generate(ScenarioSpec("t3", 10000, 4, 0.5, seed=5))
    a, b = train.values[train.labels == 0], train.values[train.labels == 1]
    assert np.all(np.median(b[:, :2], axis=0) - np.median(a[:, :2], axis=0) > 0.4)


@pytest.mark.parametrize("kind", ["t3", "exp"])
def test_copula_rank_correlation(kind):
    p = 6
    train, _ = generate(ScenarioSpec(kind, 20000, p, 1.0, correlated=True, seed=9))
    x = train.values[train.labels == 0]
    rho = covariance_to_correlation(build_covariance(p))
    implied = 6 / np.pi * np.arcsin(rho / 2)
    observed = stats.spearmanr(x).statistic
    assert np.max(np.abs(observed - implied)) < 0.05


def test_gaussian_block_pearson_correlation():
    p = 10
    train, _ = generate(ScenarioSpec("ddv", 20000, p, 0.1, correlated=True, seed=1, standardize=True))
    x = train.values[train.labels == 0][:, :2]  # first block is the identity transform
    rho = covariance_to_correlation(build_covariance(p))[0, 1]
    assert abs(np.corrcoef(x.T)[0, 1] - rho) < 0.05


def test_generate_is_bit_reproducible():
    spec = ScenarioSpec("logabst", 50, 7, 0.5, correlated=True, seed=123)
    a, b = generate(spec), generate(spec)
    for x, y in zip(a, b):
        assert x.values.tobytes() == y.values.tobytes()


def test_train_and_test_independent():
    train, test = generate(ScenarioSpec("t3", 40, 3, seed=1))
    assert not np.array_equal(train.values, test.values)
    assert train.class_sizes().tolist() == [20, 20] == test.class_sizes().tolist()


def test_standardization_uses_train_divisors():
    spec = ScenarioSpec("exp", 200, 4, 1.0, seed=3, standardize=True)
    train, test = generate(spec)
    np.testing.assert_allclose(pooled_within_class_sd(train), 1.0)
    raw_train, raw_test = generate(ScenarioSpec("exp", 200, 4, 1.0, seed=3))
    sd = pooled_within_class_sd(raw_train)
    np.testing.assert_allclose(test.values, raw_test.values / sd)


def test_ddv_forces_standardization():
    assert ScenarioSpec("ddv", 10, 5).standardize is True


@given(st.integers(1, 600))
def test_ddv_blocks_partition(p):
    blocks = ddv_blocks(p)
    flat = np.concatenate(blocks)
    assert flat.tolist() == list(range(p))
    sizes = [b.size for b in blocks]
    assert max(sizes) - min(sizes) <= 1 and sizes == sorted(sizes, reverse=True)


def test_logabst_shift_halves():
    from vwqc.simgen import _shift_vector
    s = _shift_vector(ScenarioSpec("logabst", 10, 10, 0.5))
    assert s.tolist() == [0.4, 0.4, 0.4, -0.4, -0.4, 0, 0, 0, 0, 0]


def test_shift_ordering_matters_for_logabst():
    a = ScenarioSpec("logabst", 20, 2, 1.0, seed=1)
    b = ScenarioSpec("logabst", 20, 2, 1.0, seed=1, shift_before_transform=False)
    assert not np.array_equal(generate(a)[0].values, generate(b)[0].values)


@pytest.mark.parametrize("frac, p, r", [(0.1, 10, 1), (0.5, 5, 3), (1.0, 7, 7), (0.1, 50, 5)])
def test_relevant_count(frac, p, r):
    assert ScenarioSpec("t3", 10, p, frac).relevant_count == r


@pytest.mark.parametrize("kw", [dict(kind="gauss"), dict(n=11), dict(p=0), dict(relevant_fraction=0.0),
                                dict(relevant_fraction=0.1, p=2), dict(seed=-1)])
def test_invalid_spec(kw):
    base = dict(kind="t3", n=10, p=5, relevant_fraction=1.0)
    base.update(kw)
    with pytest.raises(DataError):
        ScenarioSpec(**base)


def test_seed_derivation():
    assert derive_seed(1, "cell", 0) == derive_seed(1, "cell", 0)
    seeds = {derive_seed(1, c, r) for c in ("a", "b") for r in range(50)}
    assert len(seeds) == 100
    assert derive_seed(2, "a", 0) != derive_seed(1, "a", 0)


def test_paper_grid_size():
    grid = paper_grid()
    assert len(grid) == 288
    assert len({g.label for g in grid}) == 288


def test_metadata_flags_assumptions():
    doc = metadata(ScenarioSpec("exp", 10, 3, correlated=True))
    assert doc["copula"] == "gaussian" and doc["joint_distribution_assumed"] is True
    assert doc["shift_ordering"] == "before_transform" and doc["fill_order"] == "F"
