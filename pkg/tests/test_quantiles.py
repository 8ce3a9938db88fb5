import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetdetect import quantiles as qt
from hetdetect.model import VarianceProfile

# inverse-CDF oracles evaluated with mpmath at 30 digits
CHI2_1_95 = 3.84145882069412446910
CHI2_2_95 = 5.99146454710798187585
Z_975 = 1.95996398454005385560
MAX2_95 = 5.00182778165248016649
BOUND_D1 = 10.45310131231255266324


def mc(reps=10**6, seed=0):
    return qt.QuantileMethod("monte-carlo", reps, seed)


def test_weighted_chisq_monte_carlo_single():
    p = VarianceProfile.constant(1.0, 1)
    v = qt.weighted_chisq_quantile(p, 1, 0.05, mc())
    draws = qt.null_draws((1.0,), 10**6, 0)
    assert abs(v - CHI2_1_95) < 4 * qt.exact_bootstrap_se(draws, 0.05)


def test_weighted_chisq_analytic_bound():
    p = VarianceProfile.constant(1.0, 1)
    assert qt.weighted_chisq_quantile(p, 1, 0.05, qt.ANALYTIC) == pytest.approx(BOUND_D1, rel=1e-14)


def test_weighted_chisq_exact_equal_weights():
    p = VarianceProfile.constant(1.0, 2)
    assert qt.weighted_chisq_quantile(p, 2, 0.05, qt.EXACT) == pytest.approx(CHI2_2_95, rel=1e-12)
    with pytest.raises(ValueError):
        qt.weighted_chisq_quantile(VarianceProfile.polynomial(1.0, 1.0, 3), 3, 0.05, qt.EXACT)


def test_weighted_chisq_errors():
    p = VarianceProfile.constant(1.0, 3)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            qt.weighted_chisq_quantile(p, 1, bad)
    with pytest.raises(ValueError):
        qt.weighted_chisq_quantile(p, 4, 0.05)
    with pytest.raises(ValueError):
        qt.QuantileMethod("monte-carlo", reps=999)


def test_monte_carlo_quantile_seed_stability():
    sig = (1.0, 2.0, 0.5, 3.0)
    a = qt.null_draws(sig, 10**6, 0)
    b = qt.null_draws(sig, 10**6, 1)
    se = qt.exact_bootstrap_se(a, 0.05)
    assert abs(qt.empirical_quantile(a, 0.05) - qt.empirical_quantile(b, 0.05)) < 3 * se


def test_monte_carlo_quantile_worker_independent():
    sig = (1.0, 2.0)
    a = qt.null_draws(sig, 40000, 3, workers=1).copy()
    qt._draw_cache.clear()
    b = qt.null_draws(sig, 40000, 3, workers=4)
    assert np.array_equal(a, b)


def test_exact_bootstrap_se_matches_resampling():
    x = np.sort(np.random.default_rng(1).chisquare(3, size=200))
    k = qt.order_index(200, 0.1)
    boot = np.random.default_rng(2).choice(x, size=(40000, 200), replace=True)
    brute = np.std(np.sort(boot, axis=1)[:, k - 1])
    assert qt.exact_bootstrap_se(x, 0.1) == pytest.approx(brute, rel=0.05)


def test_order_index():
    assert qt.order_index(10**6, 0.05) == 950000
    assert qt.order_index(10, 0.05) == 10
    assert qt.order_index(100, 0.999) == 1


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.1, 10.0), min_size=1, max_size=50), st.sampled_from([0.01, 0.05, 0.2]))
def test_analytic_bound_dominates_monte_carlo(values, alpha):
    p = VarianceProfile.explicit(values)
    D = p.horizon
    est = qt.weighted_chisq_quantile(p, D, alpha, mc(10**4, 5))
    assert qt.weighted_chisq_quantile(p, D, alpha, qt.ANALYTIC) >= est


def test_max_quantile_examples():
    assert qt.max_chisq_quantile(1, 0.05) == pytest.approx(Z_975**2, rel=1e-13)
    assert qt.max_chisq_quantile(1, 0.05, qt.ANALYTIC) == pytest.approx(2 * math.log(20), rel=1e-15)
    assert qt.max_chisq_quantile(2, 0.05) == pytest.approx(MAX2_95, rel=1e-13)


@pytest.mark.parametrize("n", [1, 2, 7, 30, 1000])
@pytest.mark.parametrize("alpha", [0.001, 0.05, 0.5])
def test_max_quantile_round_trip(n, alpha):
    q = qt.max_chisq_quantile(n, alpha)
    assert abs(qt.max_cdf(q, n) - (1 - alpha)) < 1e-10
    assert q <= qt.max_chisq_quantile(n, alpha, qt.ANALYTIC)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10**5), st.floats(1e-4, 0.9))
def test_max_quantile_nondecreasing_in_n(n, alpha):
    assert qt.max_chisq_quantile(n + 1, alpha) >= qt.max_chisq_quantile(n, alpha)


def test_max_quantile_monte_carlo_agrees():
    q = qt.max_chisq_quantile(5, 0.05, mc(2 * 10**5, 2))
    assert q == pytest.approx(qt.max_chisq_quantile(5, 0.05), rel=0.02)


def test_gaussian_abs_quantile():
    assert qt.gaussian_abs_quantile(1.0, 0.05) == pytest.approx(Z_975, rel=1e-14)
    assert qt.gaussian_abs_quantile(2.0, 0.05) == 2 * qt.gaussian_abs_quantile(1.0, 0.05)
    levels = [0.01, 0.1, 0.5, 0.9, 0.999999]
    vals = [qt.gaussian_abs_quantile(1.0, a) for a in levels]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-5
    with pytest.raises(ValueError):
        qt.gaussian_abs_quantile(1.0, 1.0)
    with pytest.raises(ValueError):
        qt.gaussian_abs_quantile(0.0, 0.5)
