import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from hetdetect import priors, rng
from hetdetect.model import SignalClass, VarianceProfile, membership
from hetdetect.priors import PriorSpec
from hetdetect.procedures import TestProcedure
from hetdetect.rates import rho_D_sq

THRESH = 1 + 4 * 0.9**2


def test_rademacher_norm_is_exact():
    p = VarianceProfile.polynomial(1.0, 1.0, 10)
    spec = PriorSpec.rademacher(p, 6, 2.5)
    th = priors.prior_means(spec, 4, 0, 500)
    np.testing.assert_allclose(np.linalg.norm(th, axis=1), 2.5, rtol=1e-14)
    assert np.all(th[:, 6:] == 0) if th.shape[1] > 6 else True
    assert membership(priors.prior_sample(spec, 4, 7), SignalClass.s_d(6))


def test_sparse_prior_norm_and_support():
    const = VarianceProfile.constant(0.8, 10)
    spec = PriorSpec.sparse(const, 3, 10, 2, 1.7)
    th = priors.prior_means(spec, 1, 0, 300)
    np.testing.assert_allclose(np.sum(th**2, axis=1), 1.7**2, rtol=1e-13)
    assert np.all(np.count_nonzero(th, axis=1) == 3)
    het = VarianceProfile.explicit([5.0, 1.0, 3.0, 2.0, 4.0, 0.5])
    spec = PriorSpec.sparse(het, 2, 6, 1, 1.0)
    th = priors.prior_means(spec, 2, 0, 300)
    assert np.all(np.sum(th**2, axis=1) >= 1.0 - 1e-12)
    # rank 1 (sigma = 0.5 at index 6) is excluded when l = 1
    assert np.all(th[:, 5] == 0)
    for row in th[:5]:
        assert membership(priors.prior_sample(spec, 2, 0), SignalClass.sparse(2, 6))


def test_sparse_prior_subset_frequencies():
    p = VarianceProfile.polynomial(1.0, 1.0, 2)
    spec = PriorSpec.sparse(p, 1, 2, 0, 1.0)
    th = priors.prior_means(spec, 9, 0, 20000)
    counts = [np.count_nonzero(th[:, 0]), np.count_nonzero(th[:, 1])]
    assert sum(counts) == 20000
    assert stats.chisquare(counts).pvalue > 1e-3


def test_tail_prior():
    p = VarianceProfile.explicit([3.0, 1.0, 2.0, 5.0])
    spec = PriorSpec.tail(p, 2, 4, 1.3)
    th = priors.prior_means(spec, 0, 0, 50)
    assert set(np.nonzero(th[0])[0]) == {0, 3}
    np.testing.assert_allclose(np.linalg.norm(th, axis=1), 1.3, rtol=1e-14)


def test_spec_validation():
    p = VarianceProfile.constant(1.0, 5)
    with pytest.raises(ValueError):
        PriorSpec.rademacher(p, 6, 1.0)
    with pytest.raises(ValueError):
        PriorSpec.sparse(p, 3, 5, 3, 1.0)
    with pytest.raises(ValueError):
        PriorSpec.rademacher(p, 3, -1.0)


def _brute_sparse_lr(Y, sig, k, l, rho):
    order = np.argsort(sig, kind="stable")
    ranks = order[l:]
    block = sum(np.sort(sig**2)[l : l + k])
    total = 0.0
    subsets = list(itertools.combinations(ranks, k))
    for m in subsets:
        total += np.prod([np.cosh(rho * Y[j] / (sig[j] * math.sqrt(block))) for j in m])
    return math.exp(-k * rho**2 / (2 * block)) * total / len(subsets)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.data())
def test_sparse_likelihood_ratio_matches_enumeration(n, data):
    k = data.draw(st.integers(1, n))
    l = data.draw(st.integers(0, n - k))
    rho = data.draw(st.floats(0.1, 3.0))
    sig = np.array(data.draw(st.lists(st.floats(0.2, 5.0), min_size=n, max_size=n)))
    Y = np.array(data.draw(st.lists(st.floats(-6.0, 6.0), min_size=n, max_size=n)))
    spec = PriorSpec.sparse(VarianceProfile.explicit(sig), k, n, l, rho)
    assert priors.likelihood_ratio(Y, spec) == pytest.approx(_brute_sparse_lr(Y, sig, k, l, rho), rel=1e-10)


def test_rademacher_likelihood_ratio_at_zero():
    p = VarianceProfile.explicit([1.0, 2.0, 0.5])
    rho = 1.1
    spec = PriorSpec.rademacher(p, 3, rho)
    s2 = p.sigmas**2
    assert priors.likelihood_ratio(np.zeros(3), spec) == pytest.approx(math.exp(-(rho**2) * s2.sum() / (2 * (s2**2).sum())), rel=1e-14)


def test_single_subset_is_product_form():
    p = VarianceProfile.explicit([1.0, 2.0, 3.0])
    spec = PriorSpec.sparse(p, 2, 3, 1, 1.0)
    Y = np.array([0.3, -1.0, 2.0])
    b = 4.0 + 9.0
    ref = math.exp(-1.0 / b) * math.cosh(-1.0 / (2 * math.sqrt(b))) * math.cosh(2.0 / (3 * math.sqrt(b)))
    assert priors.likelihood_ratio(Y, spec) == pytest.approx(ref, rel=1e-14)


def test_likelihood_ratio_is_stable_for_large_inputs():
    p = VarianceProfile.constant(1.0, 20)
    spec = PriorSpec.sparse(p, 4, 20, 0, 30.0)
    val = priors.log_likelihood_ratio(np.full(20, 50.0), spec)
    assert np.isfinite(val)


def test_second_moment_closed_forms():
    p = VarianceProfile.constant(1.5, 4)
    rho = 1.2
    spec = PriorSpec.sparse(p, 1, 4, 2, rho)
    exact, _ = priors.second_moment(spec)
    assert exact == pytest.approx((math.cosh(rho**2 / 1.5**2) + 1) / 2, rel=1e-14)
    q = VarianceProfile.explicit([1.0, 2.0, 3.0])
    sd = PriorSpec.rademacher(q, 3, 2.0)
    s2 = q.sigmas**2
    S4 = (s2**2).sum()
    exact, bound = priors.second_moment(sd)
    assert exact == pytest.approx(np.prod(np.cosh(4.0 * s2 / S4)), rel=1e-13)
    assert bound == pytest.approx(math.exp(16.0 / (2 * S4)), rel=1e-14)
    assert priors.second_moment(PriorSpec.rademacher(q, 3, 0.0)) == (1.0, 1.0)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 30), st.data())
def test_binomial_bound_dominates_hypergeometric(pool, data):
    k = data.draw(st.integers(1, pool))
    rho = data.draw(st.floats(0.01, 3.0))
    p = VarianceProfile.constant(1.0, pool)
    exact, bound = priors.second_moment(PriorSpec.sparse(p, k, pool, 0, rho))
    assert 1.0 <= exact <= bound * (1 + 1e-12)


def test_divergence_check_at_the_critical_radius():
    p = VarianceProfile.polynomial(1.0, 1.0, 10)
    rho = math.sqrt(rho_D_sq(p, 7, 0.05, 0.05))
    ok, margin, rep = priors.divergence_check(PriorSpec.rademacher(p, 7, rho), 0.05, 0.05)
    assert abs(rep.bound - THRESH) < 1e-9 and abs(margin) < 1e-9 and ok
    assert priors.divergence_check(PriorSpec.rademacher(p, 7, 0.0), 0.05, 0.05)[0]
    assert not priors.divergence_check(PriorSpec.rademacher(p, 7, 2 * rho), 0.05, 0.05)[0]


@pytest.mark.parametrize(
    "kind,kw",
    [("rademacher-SD", {"D": 6}), ("tail-rademacher", {"k": 3, "n": 9}), ("sparse-subset", {"k": 2, "n": 9, "l": 3})],
)
def test_certified_radius_meets_threshold(kind, kw):
    p = VarianceProfile.polynomial(1.0, 0.5, 9)
    rho = priors.certified_radius(kind, p, 0.05, 0.05, **kw)
    spec = PriorSpec(kind, p, rho, **kw)
    ok, margin, rep = priors.divergence_check(spec, 0.05, 0.05)
    assert ok and rep.bound <= THRESH * (1 + 1e-12)


def test_null_moments_identities():
    p = VarianceProfile.explicit([1.0, 2.0, 0.5, 1.5])
    spec = PriorSpec.rademacher(p, 4, 1.0)
    m1, m2 = priors.null_moments(spec, 10**5, 13)
    assert m1.within(1.0)
    assert m2.within(priors.second_moment(spec)[0])


@pytest.mark.parametrize("lam", [0.1, 0.5, 1.0])
def test_cosh_square_identity(lam):
    z = rng.normals(77, 0, 0, 10**5, 1)[:, 0]
    v = np.cosh(lam * z) ** 2
    mean, se = v.mean(), v.std(ddof=1) / math.sqrt(v.size)
    assert abs(mean - math.exp(lam**2) * math.cosh(lam**2)) < 3 * se


def test_indistinguishability_directions():
    p = VarianceProfile.polynomial(1.0, 0.5, 6)
    proc = TestProcedure.chisq(6, 0.05)
    tiny = priors.empirical_indistinguishability(PriorSpec.rademacher(p, 6, 1e-6), 0.05, 0.05, proc, 20000, 3)
    assert tiny.within(0.95)
    huge = priors.empirical_indistinguishability(PriorSpec.rademacher(p, 6, 60.0), 0.05, 0.05, proc, 20000, 3)
    assert huge.value < 0.01
