"""Null quantiles for the test statistics and their analytic upper bounds."""

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import ndtri

from . import rng


@dataclass(frozen=True)
class QuantileMethod:
    """How to obtain a null quantile.

    ``exact`` is available only where a closed form exists (max statistic,
    Gaussian quantiles, equal-weight chi-square).
    """

    kind: str = "monte-carlo"
    reps: int = 10**6
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("monte-carlo", "analytic-bound", "exact"):
            raise ValueError(f"unknown quantile method {self.kind!r}")
        if self.kind == "monte-carlo" and self.reps < 10**4:
            raise ValueError("monte-carlo quantiles need at least 10^4 replicates")

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "monte-carlo":
            d.update(reps=self.reps, seed=self.seed)
        return d


MONTE_CARLO = QuantileMethod("monte-carlo")
EXACT = QuantileMethod("exact")
ANALYTIC = QuantileMethod("analytic-bound")


def method_from_dict(d):
    if d is None:
        return MONTE_CARLO
    if isinstance(d, str):
        d = {"kind": d}
    return QuantileMethod(d.get("kind", "monte-carlo"), int(d.get("reps", 10**6)), int(d.get("seed", 0)))


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def _weights(profile, D):
    if not 1 <= D <= profile.horizon:
        raise ValueError(f"D={D} outside 1..{profile.horizon}")
    return profile.head(D)


_draw_cache = {}
_draw_lock = threading.Lock()


def null_draws(sigmas, reps, seed, workers=1):
    """Sorted Monte Carlo draws of sum_j sigma_j^2 eps_j^2 (cached)."""
    sig = tuple(float(s) for s in sigmas)
    key = (sig, int(reps), int(seed))
    with _draw_lock:
        hit = _draw_cache.get(key)
    if hit is not None:
        return hit
    scale = np.array(sig)
    zero = np.zeros_like(scale)
    draws = rng.replicate_map(
        lambda r0, m: rng.sumsq(seed, rng.STREAM_QUANTILE, r0, m, zero, scale),
        reps,
        workers=workers,
    )
    draws.sort(kind="stable")
    draws.setflags(write=False)
    with _draw_lock:
        if len(_draw_cache) >= 16:
            _draw_cache.pop(next(iter(_draw_cache)))
        _draw_cache[key] = draws
    return draws


def order_index(reps, alpha):
    """1-based order statistic ceil(reps * (1 - alpha)) used as the MC quantile."""
    return max(1, math.ceil(round(reps * (1.0 - alpha), 9)))


def empirical_quantile(sorted_draws, alpha):
    return float(sorted_draws[order_index(len(sorted_draws), alpha) - 1])


def exact_bootstrap_se(sorted_draws, alpha):
    """Bootstrap standard error of the MC quantile, computed exactly.

    Under resampling, the k-th order statistic equals x_(i) with probability
    P(Bin(n, i/n) >= k) - P(Bin(n, (i-1)/n) >= k); no resampling is needed.
    """
    x = np.asarray(sorted_draws)
    n = len(x)
    k = order_index(n, alpha)
    half = int(8 * math.sqrt(n * alpha * (1 - alpha))) + 8
    i = np.arange(max(1, k - half), min(n, k + half) + 1)
    cdf_hi = stats.binom.sf(k - 1, n, i / n)
    cdf_lo = stats.binom.sf(k - 1, n, (i - 1) / n)
    w = cdf_hi - cdf_lo
    w = w / w.sum()
    v = x[i - 1]
    mean = np.dot(w, v)
    return float(math.sqrt(max(np.dot(w, (v - mean) ** 2), 0.0)))


def weighted_chisq_bound(sigmas, alpha):
    """sum sigma^2 + 2 sqrt(x) (sum sigma^4)^(1/2) + 2 x max sigma^2, x = ln(1/alpha)."""
    s2 = np.asarray(sigmas, dtype=np.float64) ** 2
    x = math.log(1.0 / alpha)
    return math.fsum(s2) + 2 * math.sqrt(x) * math.sqrt(math.fsum(s2 * s2)) + 2 * x * float(s2.max())


def weighted_chisq_quantile(profile, D, alpha, method=MONTE_CARLO, workers=1):
    """The 1-alpha quantile t_{D,1-alpha}(sigma) of sum_{j<=D} sigma_j^2 eps_j^2."""
    _check_alpha(alpha)
    sig = _weights(profile, D)
    if method.kind == "analytic-bound":
        return weighted_chisq_bound(sig, alpha)
    if method.kind == "exact":
        if not np.all(sig == sig[0]):
            raise ValueError("exact weighted chi-square quantile needs equal weights")
        return float(sig[0] ** 2 * stats.chi2.isf(alpha, D))
    return empirical_quantile(null_draws(sig, method.reps, method.seed, workers), alpha)


def max_chisq_quantile(n, alpha, method=EXACT, workers=1):
    """The 1-alpha quantile q_{n,1-alpha} of max_{j<=n} eps_j^2."""
    _check_alpha(alpha)
    if n < 1:
        raise ValueError("n must be at least 1")
    if method.kind == "analytic-bound":
        return 2.0 * math.log(n / alpha)
    if method.kind == "exact":
        # each |eps_j| exceeds z with probability 1 - (1-alpha)^(1/n)
        tail = -math.expm1(math.log1p(-alpha) / n)
        z = -float(ndtri(tail / 2.0))
        return z * z
    draws = rng.replicate_map(
        lambda r0, m: np.max(rng.normals(method.seed, rng.STREAM_QUANTILE, r0, m, n) ** 2, axis=1),
        method.reps,
        workers=workers,
    )
    draws.sort()
    return empirical_quantile(draws, alpha)


def gaussian_abs_quantile(sigma, alpha):
    """Threshold q with P(|N(0, sigma^2)| >= q) = alpha."""
    _check_alpha(alpha)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return sigma * -float(ndtri(alpha / 2.0))


def max_cdf(q, n):
    """P(max_{j<=n} eps_j^2 <= q) = (2 Phi(sqrt q) - 1)^n."""
    return float((1.0 - 2.0 * stats.norm.sf(math.sqrt(q))) ** n)
