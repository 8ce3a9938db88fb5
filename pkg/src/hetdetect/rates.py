"""Closed-form separation rates, their bounds and the rate table for ellipsoids.

Sups and infs over a truncation level are exhaustive scans. Where one side
of a min is monotone the scan stops as soon as no later index can change the
result; the returned value is the same as a full scan.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import logsumexp, ndtri

from ._backend import kernels
from .model import order_stats


@dataclass(frozen=True)
class RateResult:
    name: str
    value: float
    side: str
    formula: str
    args: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.side not in ("lower", "upper", "factor"):
            raise ValueError(f"unknown side {self.side!r}")
        if not self.value >= 0:
            raise ValueError(f"rate {self.name} must be nonnegative, got {self.value}")


def strict_ceil(x):
    """Smallest integer strictly greater than x, i.e. floor(x) + 1."""
    return math.floor(x) + 1


def ceil_sqrt(d):
    """floor(sqrt(d)) + 1 for a nonnegative integer d, without float error."""
    return math.isqrt(d) + 1


def _check_ab(alpha, beta):
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError("alpha and beta must lie in (0, 1)")
    if alpha + beta >= 1:
        raise ValueError("need alpha + beta < 1")


def c_alpha_beta(alpha, beta):
    """sqrt(2 ln(1 + 4 (1 - alpha - beta)^2))."""
    _check_ab(alpha, beta)
    return math.sqrt(2.0 * math.log1p(4.0 * (1.0 - alpha - beta) ** 2))


def power_constant(alpha, beta):
    """8 (x_a + x_b + sqrt(x_a) + sqrt(x_b)) with x_g = ln(1/g): the chi-square test radius factor."""
    xa, xb = math.log(1 / alpha), math.log(1 / beta)
    return 8.0 * (xa + xb + math.sqrt(xa) + math.sqrt(xb))


def abs_normal_quantile(beta):
    """q_beta with P(|eps| >= q_beta) = beta."""
    return -float(ndtri(beta / 2.0))


def _check_d(profile, D):
    if not 1 <= D <= profile.horizon:
        raise ValueError(f"D={D} outside 1..{profile.horizon}")


def fourth_moment_root(profile, D):
    """(sum_{j<=D} sigma_j^4)^(1/2) over the first D coordinates."""
    _check_d(profile, D)
    s2 = profile.head(D) ** 2
    return math.sqrt(math.fsum(s2 * s2))


def rho_D_sq(profile, D, alpha, beta):
    return c_alpha_beta(alpha, beta) * fourth_moment_root(profile, D)


def chisq_power_radius_sq(profile, D, alpha, beta):
    """8 [max sigma^2 (x_a + x_b) + (sum sigma^4)^(1/2) (sqrt(x_a) + sqrt(x_b))] over the first D coordinates.

    At or above this squared norm the chi-square test on D coordinates has
    power at least 1 - beta for every theta supported there.
    """
    xa, xb = math.log(1 / alpha), math.log(1 / beta)
    top = float(np.max(profile.head(D) ** 2))
    return 8.0 * (top * (xa + xb) + fourth_moment_root(profile, D) * (math.sqrt(xa) + math.sqrt(xb)))


def _check_kn(profile, k, n):
    if not 1 <= k <= n <= profile.horizon:
        raise ValueError(f"need 1 <= k <= n <= horizon, got k={k}, n={n}")


def _block_terms(os, k, n):
    l = np.arange(0, n - k + 1)
    blocks = os.prefix_sq[l + k] - os.prefix_sq[l]
    x = (n - l) / float(k * k)
    return blocks * np.log1p(np.maximum(x, np.sqrt(x)))


def rho_kn_terms(profile, k, n):
    """(block maximum, maximising l, tail fourth-moment term) for the sparse rate."""
    _check_kn(profile, k, n)
    os = order_stats(profile, n)
    terms = _block_terms(os, k, n)
    l_best = int(np.argmax(terms))
    return float(terms[l_best]), l_best, os.tail_4th_root(k)


def rho_kn_sq(profile, k, n):
    """max over l of Sigma^2_{l,k} ln(1 + x v sqrt(x)), x = (n-l)/k^2, joined with the tail term."""
    _check_kn(profile, k, n)
    os = order_stats(profile, n)
    return max(kernels.block_log_max(os.prefix_sq, k, n), os.tail_4th_root(k))


def rho_n_inf(profile, n):
    """max_{0<=l<n} sigma_(l+1) sqrt(ln(1 + n - l))."""
    if not 1 <= n <= profile.horizon:
        raise ValueError(f"n={n} outside 1..{profile.horizon}")
    srt = order_stats(profile, n).sorted_sigma
    l = np.arange(n)
    return float(np.max(srt * np.sqrt(np.log1p(n - l))))


@dataclass(frozen=True)
class SparseUpperBound:
    chisq_channel: float  # (sum_{j<=n} sigma_j^4)^(1/2)
    max_channel: float  # Sigma^2_{n-k,k} ln n
    chisq_constant: float
    max_constant: float

    @property
    def value(self):
        return min(self.chisq_constant * self.chisq_channel, self.max_constant * self.max_channel)

    @property
    def unscaled(self):
        return min(self.chisq_channel, self.max_channel)


def sparse_upper_sq(profile, k, n, alpha, beta):
    _check_kn(profile, k, n)
    _check_ab(alpha, beta)
    os = order_stats(profile, n)
    q = abs_normal_quantile(beta) + math.sqrt(2.0 * math.log(n / alpha))
    return SparseUpperBound(
        chisq_channel=fourth_moment_root(profile, n),
        max_channel=os.block_sq(n - k, k) * math.log(n),
        chisq_constant=power_constant(alpha, beta),
        max_constant=q * q,
    )


@dataclass(frozen=True)
class EllipsoidBounds:
    lower: float
    lower_D: int
    upper: float
    upper_D: int
    constant: float


def _bias(a, R, n):
    return R * R / a.values_upto(n) ** 2


def ellipsoid_rate_bounds(a, R, profile, alpha, beta, constant=None):
    """sup_D min(rho_D^2, R^2/a_D^2) and inf_D (C rho_D^2 + R^2/a_D^2) over D = 1..horizon.

    The default C makes C rho_D^2 equal the proved chi-square radius, so the
    upper value is an explicit bound rather than a rate up to constants.
    """
    c = c_alpha_beta(alpha, beta)
    if constant is None:
        constant = max(1.0, power_constant(alpha, beta) / c)
    if constant < 1:
        raise ValueError("the upper-bound constant must be at least 1")
    n = profile.horizon
    s2 = profile.head(n) ** 2
    rho = c * np.sqrt(np.cumsum(s2 * s2))
    bias = _bias(a, R, n)
    low = np.minimum(rho, bias)
    up = constant * rho + bias
    i, j = int(np.argmax(low)), int(np.argmin(up))
    return EllipsoidBounds(float(low[i]), i + 1, float(up[j]), j + 1, float(constant))


# -- rate table for ellipsoids ----------------------------------------------

RATE_TABLE_CASES = ("poly-poly", "exp-poly", "poly-exp", "exp-exp")


def _balance_root(log_lhs, hi=1.0):
    # smallest positive root of an increasing function going from -inf to +inf
    while log_lhs(hi) <= 0:
        hi *= 2.0
        if hi > 1e12:
            raise ArithmeticError("no balancing index below 1e12")
    lo = hi / 2.0
    while lo > 1e-12 and log_lhs(lo) > 0:
        lo /= 2.0
    return optimize.brentq(log_lhs, lo, hi, xtol=1e-12, rtol=1e-14)


def balancing_index(nu, s, sigma, gamma, r, R=1.0, alpha=0.05, beta=0.05):
    """Continuous root of rho_D^2 a_D^2 / R^2 = 1 for sigma_j = sigma e^{gamma j^r}, a_j = e^{nu j^s}.

    The partial sum of sigma_j^4 is interpolated linearly between integers.
    """
    logc = math.log(c_alpha_beta(alpha, beta))

    def log_s4(D):
        m = int(math.floor(D))
        frac = D - m
        j = np.arange(1, m + 2, dtype=np.float64)
        logs = 4.0 * (math.log(sigma) + gamma * j**r)
        whole = logsumexp(logs[:m]) if m else -np.inf
        part = logs[m] + math.log(frac) if frac > 0 else -np.inf
        return float(np.logaddexp(whole, part))

    def g(D):
        return logc + 0.5 * log_s4(D) + 2.0 * nu * D**s - 2.0 * math.log(R)

    return _balance_root(g)


def minimax_rate(case, sigma, s, t=None, nu=None, gamma=None, r=None, R=1.0, alpha=0.05, beta=0.05):
    """Rate-table value f(sigma) for the four smoothness / ill-posedness combinations."""
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")
    L = math.log(sigma ** -2)
    if case == "poly-poly":
        return sigma ** (4 * s / (2 * s + 2 * t + 0.5))
    if case == "exp-poly":
        return sigma**2 * L ** ((2 * t + 0.5) / s)
    if case == "poly-exp":
        return L ** (-2 * s / r)
    if case == "exp-exp":
        if s > 1:
            raise ValueError("the exp-exp entry needs s <= 1")
        D = math.floor(balancing_index(nu, s, sigma, gamma, r, R, alpha, beta))
        return math.exp(-2 * nu * D**s)
    raise ValueError(f"unknown case {case!r}")


def poly_poly_slope(s, t):
    return 4 * s / (2 * s + 2 * t + 0.5)


# -- l_p bodies -----------------------------------------------------------------


def lp_bias(a, p, R, D):
    """sqrt(D)^(1 - 2/p) R^2 a_D^(-2)."""
    return math.sqrt(D) ** (1 - 2 / p) * R * R / a.at(D) ** 2


def _check_lp(p, D):
    if not 0 < p < 2:
        raise ValueError("p must lie in (0, 2)")
    if D < 2:
        raise ValueError("D must be at least 2 so that floor(sqrt D) + 1 <= D")


def lp_lower_bound(a, p, R, profile, D):
    """(rho_1(D), rho_2(D)) with k = floor(sqrt D) + 1 and order statistics of sigma_1..sigma_D."""
    _check_lp(p, D)
    _check_d(profile, D)
    k = ceil_sqrt(D)
    os = order_stats(profile, D)
    bias = lp_bias(a, p, R, D)
    l = np.arange(0, D - k + 1)
    blocks = os.prefix_sq[l + k] - os.prefix_sq[l]
    top = os.block_sq(D - k, k)
    rho1 = np.max(np.minimum(bias * blocks / top, blocks * np.log1p(np.sqrt(1.0 - l / D))))
    rho2 = min(bias, os.tail_4th_root(k))
    return float(rho1), float(rho2)


def sparse_rate_at(profile, D):
    """rho^2_{k,D} with k = floor(sqrt D) + 1."""
    return rho_kn_sq(profile, ceil_sqrt(D), D)


def sparse_rate_profile(profile, nmax=None):
    """rho^2_{floor(sqrt D)+1, D} for D = 0..nmax (NaN below 2)."""
    nmax = profile.horizon if nmax is None else nmax
    if profile.is_nondecreasing:
        os = order_stats(profile, profile.horizon)
        return kernels.sparse_rate_scan(os.prefix_sq, os.prefix_4th, nmax)
    out = np.full(nmax + 1, np.nan)
    for D in range(2, nmax + 1):
        out[D] = sparse_rate_at(profile, D)
    return out


def _sparse_rate_fn(profile):
    if profile.is_nondecreasing:
        os = order_stats(profile, profile.horizon)

        def at(D):
            k = ceil_sqrt(D)
            tail = math.sqrt(os.prefix_4th[D] - os.prefix_4th[D - k])
            return max(kernels.block_log_max(os.prefix_sq, k, D), tail)

        return at
    return lambda D: sparse_rate_at(profile, D)


def lp_rate_combined(a, p, R, profile):
    """(sup_D min(rho^2_{k,D}, lp_bias(D)), maximising D) over D = 2..horizon."""
    _check_lp(p, 2)
    rate = _sparse_rate_fn(profile)
    best, best_D = -1.0, 2
    for D in range(2, profile.horizon + 1):
        bias = lp_bias(a, p, R, D)
        if bias <= best:  # bias is nonincreasing in D: nothing later can win
            break
        v = min(rate(D), bias)
        if v > best:
            best, best_D = v, D
    return best, best_D


def d_dagger(a, p, R, profile, N=None):
    """First D in 2..N with lp_bias(D) <= rho^2_{k,D}; N when there is none."""
    N = profile.horizon if N is None else N
    _check_lp(p, 2)
    if not 2 <= N <= profile.horizon:
        raise ValueError(f"N={N} outside 2..{profile.horizon}")
    rate = _sparse_rate_fn(profile)
    for D in range(2, N + 1):
        if lp_bias(a, p, R, D) <= rate(D):
            return D
    return N


def lp_lambda(regime, N, D_dagger, p):
    """Multiplier shape of the l_p upper bound with the unspecified constant set to 1."""
    if N < 2 or not 1 <= D_dagger <= N:
        raise ValueError("need N >= 2 and 1 <= D_dagger <= N")
    if regime == "mildly":
        return math.log(N)
    if regime == "severely":
        return math.log(N) * math.sqrt(D_dagger) ** (1 - p / 2)
    raise ValueError(f"unknown regime {regime!r}")


corollary1_rate = minimax_rate
