import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vwqc.quantile import (DiscrepancyParams, discrepancy, empirical_quantile, phi,
                           quantile_index, variability)

from oracles import brute_quantile, check_loss

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
thetas = st.integers(1, 999).map(lambda i: i / 1000)


def test_median_of_four_is_second_order_statistic():
    assert empirical_quantile([1, 2, 3, 4], 0.5) == 2


@pytest.mark.parametrize("theta", [0.01, 0.5, 0.99])
def test_singleton(theta):
    assert empirical_quantile([5], theta) == 5


def test_just_above_jump_point():
    x = [1, 2, 3, 4, 5]
    assert empirical_quantile(x, 0.2 + 1e-12) == 2 == brute_quantile(x, 0.2 + 1e-12)


def test_exactly_at_jump_point_is_left_continuous():
    assert empirical_quantile([1, 2, 3, 4, 5], 0.2) == 1
    # 10 * 0.3 rounds to 3.0000000000000004 in floating point
    assert empirical_quantile(np.arange(1, 11), 0.3) == 3


def test_empty_sample_rejected():
    with pytest.raises(ValueError):
        empirical_quantile([], 0.5)


@pytest.mark.parametrize("theta", [0.0, 1.0, -0.1, 1.5])
def test_theta_outside_open_interval_rejected(theta):
    with pytest.raises(ValueError):
        empirical_quantile([1.0, 2.0], theta)
    with pytest.raises(ValueError):
        DiscrepancyParams(theta, 0.0)


def test_params_reject_non_finite_location():
    with pytest.raises(ValueError):
        DiscrepancyParams(0.5, float("nan"))


@given(st.lists(finite, min_size=1, max_size=25), thetas)
def test_quantile_matches_brute_force_scan(sample, theta):
    assert empirical_quantile(sorted(sample), theta) == brute_quantile(sample, theta)


@given(st.integers(1, 500), thetas)
def test_quantile_index_is_smallest_k_reaching_theta(m, theta):
    k = int(quantile_index(m, theta)) + 1
    assert 1 <= k <= m
    assert k / m >= theta or k == m
    assert k == 1 or (k - 1) / m < theta


def test_phi_examples():
    assert phi(3.0, DiscrepancyParams(0.7, 3.0)) == 0.0
    assert phi(2.0, DiscrepancyParams(0.5, 0.0)) == 1.0
    assert phi(-1.0, DiscrepancyParams(0.2, 0.0)) == pytest.approx(0.8)


def test_phi_at_location_is_positive_zero():
    assert np.signbit(discrepancy(1.0, 0.3, 1.0)) == np.False_


@given(finite, thetas, finite)
def test_phi_matches_reference_and_is_nonnegative(z, theta, xi):
    v = float(discrepancy(z, theta, xi))
    assert v >= 0
    assert v == pytest.approx(check_loss(z, theta, xi), rel=1e-12, abs=1e-12)
    assert (v == 0) == (z == xi)


@given(finite, thetas, finite, st.floats(1e-3, 1e3))
def test_phi_positive_homogeneity(z, theta, xi, a):
    lhs = float(discrepancy(a * z, theta, a * xi))
    rhs = a * float(discrepancy(z, theta, xi))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


@given(finite, thetas)
def test_phi_continuous_at_location(z, theta):
    for eps in (1e-6, -1e-6):
        assert float(discrepancy(z, theta, z + eps)) <= 1e-6


def test_variability_examples():
    assert variability([0, 10], 0.5, 0) == 5
    assert variability([4.2], 0.3, 4.2) == 0


def test_variability_minimiser_of_four_points():
    x = [1, 2, 3, 4]
    values = {xi: variability(x, 0.5, xi) for xi in x}
    best = min(values.values())
    assert values[2] == best


@settings(max_examples=200)
@given(st.lists(st.integers(-50, 50).map(float), min_size=1, max_size=20), thetas)
def test_empirical_quantile_minimises_variability(sample, theta):
    q = empirical_quantile(sorted(sample), theta)
    v = variability(sample, theta, q)
    grid = np.linspace(min(sample) - 1, max(sample) + 1, 401)
    assert all(v <= variability(sample, theta, xi) + 1e-9 for xi in np.concatenate([grid, sample]))


@given(st.lists(finite, min_size=1, max_size=25), thetas)
def test_reference_quantiles_agree(sample, theta):
    from oracles import exact_quantile
    assert exact_quantile(sample, theta) == brute_quantile(sample, theta)
