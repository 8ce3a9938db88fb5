"""Least-favourable priors, their likelihood ratios and chi-square divergences.

Three priors are supported. ``rademacher-SD`` puts random signs on the
first D coordinates with magnitudes proportional to sigma_j^2.
``sparse-subset`` draws a uniform k-subset of the variance ranks l+1..n.
``tail-rademacher`` signs the k largest-variance coordinates among the
first n. Likelihood ratios are evaluated in log space throughout.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng
from .model import Signal, VarianceProfile, order_stats

PRIOR_KINDS = ("rademacher-SD", "sparse-subset", "tail-rademacher")


def log_cosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0)


@dataclass(frozen=True)
class PriorSpec:
    kind: str
    profile: VarianceProfile
    rho: float
    D: Optional[int] = None
    k: Optional[int] = None
    n: Optional[int] = None
    l: int = 0

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if not self.rho >= 0:
            raise ValueError("rho must be nonnegative")
        N = self.profile.horizon
        if self.kind == "rademacher-SD":
            if self.D is None or not 1 <= self.D <= N:
                raise ValueError(f"need 1 <= D <= {N}")
        else:
            if self.k is None or self.n is None or not 1 <= self.k <= self.n <= N:
                raise ValueError(f"need 1 <= k <= n <= {N}")
            if self.kind == "sparse-subset" and not 0 <= self.l <= self.n - self.k:
                raise ValueError("need 0 <= l <= n - k")

    @classmethod
    def rademacher(cls, profile, D, rho):
        return cls("rademacher-SD", profile, rho, D=D)

    @classmethod
    def sparse(cls, profile, k, n, l, rho):
        return cls("sparse-subset", profile, rho, k=k, n=n, l=l)

    @classmethod
    def tail(cls, profile, k, n, rho):
        return cls("tail-rademacher", profile, rho, k=k, n=n)

    @property
    def width(self):
        return self.D if self.kind == "rademacher-SD" else self.n

    def to_dict(self):
        d = {"kind": self.kind, "rho": self.rho}
        for name in ("D", "k", "n"):
            if getattr(self, name) is not None:
                d[name] = getattr(self, name)
        if self.kind == "sparse-subset":
            d["l"] = self.l
        return d

    # fixed-sign layouts: coordinates (0-based) and magnitudes |theta_j|
    def _signed_layout(self):
        if self.kind == "rademacher-SD":
            idx = np.arange(self.D)
        else:
            os = order_stats(self.profile, self.n)
            idx = np.sort(os.perm[self.n - self.k :])
        s2 = self.profile.head(self.width)[idx] ** 2
        mag = self.rho * s2 / math.sqrt(math.fsum(s2 * s2))
        return idx, mag

    def _block(self):
        return order_stats(self.profile, self.n).block_sq(self.l, self.k)


def _signs(seed, rep0, nrep, ncol):
    return np.where(rng.uniforms(seed, rng.STREAM_PRIOR_SIGN, rep0, nrep, ncol) < 0.5, -1.0, 1.0)


def prior_means(spec, seed, rep0, nrep):
    """theta for replicates rep0..rep0+nrep-1 as an (nrep, width) array."""
    out = np.zeros((nrep, spec.width))
    if spec.kind != "sparse-subset":
        idx, mag = spec._signed_layout()
        out[:, idx] = mag * _signs(seed, rep0, nrep, len(idx))
        return out
    os = order_stats(spec.profile, spec.n)
    pool = spec.n - spec.l
    # a uniform k-subset: ranks of the k smallest of i.i.d. uniform keys
    keys = rng.uniforms(seed, rng.STREAM_PRIOR_SUBSET, rep0, nrep, pool)
    pick = np.argpartition(keys, spec.k - 1, axis=1)[:, : spec.k] if spec.k < pool else np.tile(np.arange(pool), (nrep, 1))
    cols = os.perm[spec.l + pick]
    sig = spec.profile.head(spec.n)[cols]
    vals = spec.rho * sig / math.sqrt(spec._block()) * _signs(seed, rep0, nrep, spec.k)
    np.put_along_axis(out, cols, vals, axis=1)
    return out


def prior_sample(spec, seed, replicate=0):
    return Signal.from_dense(prior_means(spec, seed, replicate, 1)[0])


def _log_esp(logc, k):
    """log e_k(c_1..c_m) row-wise from log c, via the elementary symmetric recursion."""
    nrep, m = logc.shape
    E = np.full((nrep, k + 1), -np.inf)
    E[:, 0] = 0.0
    for i in range(m):
        top = min(i + 1, k)
        E[:, 1 : top + 1] = np.logaddexp(E[:, 1 : top + 1], E[:, 0:top] + logc[:, i : i + 1])
    return E[:, k]


def log_likelihood_ratio(Y, spec):
    """log L(Y) for each row of Y (or a single vector)."""
    Y = np.asarray(Y, dtype=np.float64)
    single = Y.ndim == 1
    Y = np.atleast_2d(Y)
    if Y.shape[1] < spec.width:
        raise ValueError(f"need at least {spec.width} observations")
    sig = spec.profile.head(spec.width)
    if spec.kind != "sparse-subset":
        idx, mag = spec._signed_layout()
        s2 = sig[idx] ** 2
        out = np.sum(log_cosh(Y[:, idx] * (mag / s2)), axis=1) - math.fsum(mag * mag / (2 * s2))
    else:
        os = order_stats(spec.profile, spec.n)
        cols = os.perm[spec.l : spec.n]
        root = math.sqrt(spec._block())
        logc = log_cosh(spec.rho * Y[:, cols] / (sig[cols] * root))
        pool = spec.n - spec.l
        out = (
            _log_esp(logc, spec.k)
            - spec.k * spec.rho**2 / (2 * spec._block())
            - (math.lgamma(pool + 1) - math.lgamma(spec.k + 1) - math.lgamma(pool - spec.k + 1))
        )
    return float(out[0]) if single else out


def likelihood_ratio(Y, spec):
    return np.exp(log_likelihood_ratio(Y, spec))


def divergence_threshold(alpha, beta):
    """1 + 4 (1 - alpha - beta)^2."""
    if not alpha + beta < 1:
        raise ValueError("need alpha + beta < 1")
    return 1.0 + 4.0 * (1.0 - alpha - beta) ** 2


@dataclass(frozen=True)
class DivergenceReport:
    value: float
    kind: str  # "exact" or "bound"
    exact: float
    bound: float
    threshold: float

    def __post_init__(self):
        if not self.value >= 1.0 - 1e-12:
            raise ValueError("E_0 L^2 cannot be below 1")

    @property
    def margin(self):
        return self.threshold - self.value

    def to_dict(self):
        return {
            "value": self.value,
            "kind": self.kind,
            "exact": self.exact,
            "bound": self.bound,
            "threshold": self.threshold,
            "margin": self.margin,
        }


def second_moment(spec):
    """(exact E_0 L^2, analytic upper bound) for the prior."""
    if spec.rho == 0:
        return 1.0, 1.0
    if spec.kind != "sparse-subset":
        idx, mag = spec._signed_layout()
        s2 = spec.profile.head(spec.width)[idx] ** 2
        x = mag * mag / s2  # rho^2 sigma_j^2 / sum sigma^4
        exact = math.exp(math.fsum(log_cosh(x)))
        bound = math.exp(spec.rho**4 / (2 * math.fsum(s2 * s2)))
        return exact, bound
    k, pool = spec.k, spec.n - spec.l
    ch = math.cosh(spec.rho**2 / spec._block())
    total = math.comb(pool, k)
    # overlap of two independent uniform k-subsets is hypergeometric
    exact = math.fsum(math.comb(k, h) * math.comb(pool - k, k - h) / total * ch**h for h in range(k + 1))
    bound = math.exp(k * math.log1p(k / pool * (ch - 1.0)))
    return exact, bound


def chi2_divergence(spec, alpha=0.05, beta=0.05, kind="exact"):
    exact, bound = second_moment(spec)
    value = exact if kind == "exact" else bound
    return DivergenceReport(value, kind, exact, bound, divergence_threshold(alpha, beta))


def divergence_check(spec, alpha, beta, kind="bound"):
    """(passes, margin, report): E_0 L^2 against 1 + 4 (1 - alpha - beta)^2."""
    rep = chi2_divergence(spec, alpha, beta, kind)
    return rep.value <= rep.threshold, rep.margin, rep


def certified_radius(kind, profile, alpha, beta, D=None, k=None, n=None, l=0):
    """Largest rho for which the analytic E_0 L^2 bound stays under the threshold."""
    logc = math.log(divergence_threshold(alpha, beta))
    if kind == "rademacher-SD":
        s2 = profile.head(D) ** 2
        return math.sqrt(math.sqrt(2 * logc * math.fsum(s2 * s2)))
    if kind == "tail-rademacher":
        return math.sqrt(math.sqrt(2 * logc) * order_stats(profile, n).tail_4th_root(k))
    if kind == "sparse-subset":
        A = (n - l) / k**2 * logc
        return math.sqrt(order_stats(profile, n).block_sq(l, k) * math.log(1 + A + math.sqrt(2 * A + A * A)))
    raise ValueError(f"unknown prior kind {kind!r}")


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    se: float

    def within(self, target, k=3.0):
        return abs(self.mean - target) <= k * self.se


def null_moments(spec, reps, seed, workers=1):
    """Monte Carlo E_0 L and E_0 L^2 under the null, each with its standard error."""
    sig = spec.profile.head(spec.width)

    def chunk(r0, m):
        Y = sig * rng.normals(seed, rng.STREAM_NOISE, r0, m, spec.width)
        L = np.exp(log_likelihood_ratio(Y, spec))
        return np.stack([L, L * L], axis=1)

    vals = rng.replicate_map(chunk, reps, workers=workers)
    out = []
    for col in vals.T:
        out.append(MomentEstimate(float(np.mean(col)), float(np.std(col, ddof=1) / math.sqrt(reps))))
    return out[0], out[1]


def empirical_indistinguishability(spec, alpha, beta, procedure, reps, seed, workers=1, level_reps=10**5):
    """Average type-II error of ``procedure`` against the prior, after certifying its level.

    Raises ``RuntimeError`` if the level check fails.
    """
    from . import harness

    return harness.prior_type_two(spec, procedure, reps, seed, workers=workers, level_reps=level_reps, beta=beta)


lemgene_check = divergence_check
