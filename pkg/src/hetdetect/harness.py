"""Monte Carlo estimates of level, power, separation radii and rate exponents.

Replicate r of an experiment with seed s always sees the noise draws keyed by
(s, r), so every estimate is reproducible bit for bit and independent of the
number of worker threads. Power at different radii reuses the same draws.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from . import priors, rng
from .model import Signal, VarianceProfile
from .procedures import TestProcedure
from .rates import chisq_power_radius_sq, poly_poly_slope


class LevelNotCertified(RuntimeError):
    pass


@dataclass(frozen=True)
class Estimate:
    """Rejection frequency with a Wilson 95% interval."""

    hits: int
    reps: int

    @property
    def value(self):
        return self.hits / self.reps

    @property
    def interval(self):
        ci = stats.binomtest(self.hits, self.reps).proportion_ci(0.95, method="wilson")
        return float(ci.low), float(ci.high)

    @property
    def half_width(self):
        lo, hi = self.interval
        return (hi - lo) / 2

    def se_at(self, p):
        return math.sqrt(p * (1 - p) / self.reps)

    def within(self, p, k=3.0):
        """|estimate - p| <= k binomial standard errors at p."""
        return abs(self.value - p) <= k * self.se_at(p)

    def at_most(self, p, k=3.0):
        return self.value <= p + k * math.sqrt(p / self.reps)

    def to_dict(self):
        lo, hi = self.interval
        return {"estimate": self.value, "hits": self.hits, "reps": self.reps, "ci_low": lo, "ci_high": hi}


@dataclass(frozen=True)
class BisectionSettings:
    lo: float = 0.0
    hi: Optional[float] = None  # None: start from a proved radius
    rel_tol: float = 0.02
    max_iter: int = 20
    reps: int = 20000

    def __post_init__(self):
        if self.lo < 0 or (self.hi is not None and not self.hi > self.lo):
            raise ValueError("bracket must satisfy 0 <= lo < hi")
        if self.reps < 10**3:
            raise ValueError("need at least 10^3 replicates per point")


@dataclass(frozen=True)
class ExperimentConfig:
    profile: VarianceProfile
    procedure: TestProcedure
    alternative: object = None  # Signal, PriorSpec or None for the null
    reps: int = 10**5
    seed: int = 0
    workers: int = 1
    bisection: BisectionSettings = field(default_factory=BisectionSettings)

    def __post_init__(self):
        if self.reps < 10**3:
            raise ValueError("need at least 10^3 replicates")


@dataclass(frozen=True)
class PowerCurvePoint:
    rho: float
    power: float
    half_width: float

    def __post_init__(self):
        if not 0 <= self.power <= 1:
            raise ValueError("power must lie in [0, 1]")


def _width(procedure, profile):
    return procedure.width or profile.horizon


def count_rejections(profile, procedure, mean, reps, seed, workers=1):
    """Rejections over ``reps`` replicates; ``mean`` is a vector or ``f(rep0, m) -> (m, n)`` array."""
    rule = procedure.prepare(profile, workers)
    n = _width(procedure, profile)
    sig = profile.head(n)

    if callable(mean):
        def chunk(r0, m):
            mu = np.zeros((m, n))
            mm = mean(r0, m)
            w = min(n, mm.shape[1])
            mu[:, :w] = mm[:, :w]
            Y = mu + sig * rng.normals(seed, rng.STREAM_NOISE, r0, m, n)
            return np.array([np.count_nonzero(rule.reject_many(Y))])
    else:
        mu = np.zeros(n)
        mean = np.asarray(mean, dtype=np.float64)
        # coordinates beyond the test's window do not affect it
        mu[: min(n, len(mean))] = mean[:n]
        if procedure.kind == "chisq":
            thr = rule.threshold

            def chunk(r0, m):
                T = rng.sumsq(seed, rng.STREAM_NOISE, r0, m, mu, sig)
                return np.array([np.count_nonzero(T > thr)])
        else:
            def chunk(r0, m):
                Y = mu + sig * rng.normals(seed, rng.STREAM_NOISE, r0, m, n)
                return np.array([np.count_nonzero(rule.reject_many(Y))])

    return int(rng.replicate_map(chunk, reps, workers=workers).sum())


def estimate_level(config):
    alt = config.alternative
    if alt is not None and not (isinstance(alt, Signal) and not alt.entries):
        raise ValueError("level estimation needs the zero signal")
    hits = count_rejections(config.profile, config.procedure, np.zeros(0), config.reps, config.seed, config.workers)
    return Estimate(hits, config.reps)


_certified = {}


def certify_level(profile, procedure, reps, seed, workers=1):
    """Estimate the level once and raise if it exceeds alpha + 3 sqrt(alpha / reps)."""
    key = (profile, procedure, reps, seed)
    est = _certified.get(key)
    if est is None:
        est = estimate_level(ExperimentConfig(profile, procedure, None, reps, seed, workers))
        _certified[key] = est
    if not est.at_most(procedure.alpha):
        raise LevelNotCertified(f"empirical level {est.value:.5f} exceeds alpha={procedure.alpha}")
    return est


def estimate_power(config, alternative=None, level_reps=None):
    """Rejection frequency under a fixed signal or a prior, after certifying the level."""
    alt = config.alternative if alternative is None else alternative
    if alt is None:
        raise ValueError("no alternative given")
    certify_level(config.profile, config.procedure, level_reps or config.reps, config.seed, config.workers)
    if isinstance(alt, priors.PriorSpec):
        mean = lambda r0, m: priors.prior_means(alt, config.seed, r0, m)  # noqa: E731
    else:
        mean = alt.dense(max(alt.max_index, 1))
    hits = count_rejections(config.profile, config.procedure, mean, config.reps, config.seed, config.workers)
    return Estimate(hits, config.reps)


def prior_type_two(spec, procedure, reps, seed, workers=1, level_reps=10**5, beta=None):
    """Average acceptance probability of ``procedure`` when theta is drawn from ``spec``."""
    cfg = ExperimentConfig(spec.profile, procedure, spec, reps, seed, workers)
    power = estimate_power(cfg, level_reps=level_reps)
    return Estimate(reps - power.hits, reps)


# -- separation ---------------------------------------------------------------


@dataclass(frozen=True)
class Placement:
    """How a unit of signal energy is spread over coordinates.

    ``worst-case-top-variances``: the k largest variances among the first n,
    with |theta_j| proportional to sigma_j. ``fixed-support``: the given
    coordinates, again proportional to sigma_j. ``uniform-prior``: a fresh
    uniform k-subset of the first n per replicate with random signs.
    """

    kind: str
    k: int = 1
    n: Optional[int] = None
    support: tuple = ()

    def __post_init__(self):
        if self.kind not in ("worst-case-top-variances", "uniform-prior", "fixed-support"):
            raise ValueError(f"unknown placement {self.kind!r}")
        if self.kind == "fixed-support" and not self.support:
            raise ValueError("fixed-support placement needs a support")
        if self.kind != "fixed-support" and self.n is None:
            raise ValueError("placement needs n")

    def direction(self, profile):
        """Unit vector over the first max-index coordinates (fixed placements only)."""
        if self.kind == "uniform-prior":
            raise ValueError("uniform-prior placement is random")
        if self.kind == "fixed-support":
            idx = np.array(sorted(self.support)) - 1
            width = int(idx.max()) + 1
        else:
            head = profile.head(self.n)
            idx = np.sort(np.argsort(head, kind="stable")[self.n - self.k :])
            width = self.n
        u = np.zeros(width)
        u[idx] = profile.head(width)[idx]
        return u / np.linalg.norm(u)

    def means(self, profile, rho, seed):
        if self.kind != "uniform-prior":
            return rho * self.direction(profile)
        spec = priors.PriorSpec.sparse(profile, self.k, self.n, 0, 1.0)

        def draw(r0, m):
            th = priors.prior_means(spec, seed, r0, m)
            return rho * th / np.linalg.norm(th, axis=1, keepdims=True)

        return draw


@dataclass(frozen=True)
class SeparationResult:
    rho: float
    curve: tuple
    placement: Placement
    iterations: int

    def to_dict(self):
        return {
            "rho": self.rho,
            "rho_sq": self.rho**2,
            "placement": self.placement.kind,
            "note": "lower bound on the uniform separation radius over this placement family",
            "iterations": self.iterations,
            "curve": [{"rho": p.rho, "power": p.power, "half_width": p.half_width} for p in self.curve],
        }


def power_at(profile, procedure, placement, rho, reps, seed, workers=1):
    hits = count_rejections(profile, procedure, placement.means(profile, rho, seed), reps, seed, workers)
    return Estimate(hits, reps)


def default_upper_radius(profile, procedure, beta):
    """The chi-square radius with the explicit constant, over the test window."""
    return math.sqrt(chisq_power_radius_sq(profile, _width(procedure, profile), procedure.alpha, beta))


def empirical_separation(profile, procedure, beta, placement, settings=None, seed=0, workers=1, certify=True):
    """Bisection for the smallest radius whose power reaches 1 - beta along ``placement``.

    Returns the upper end of the final bracket, where power >= 1 - beta was observed.
    """
    settings = settings or BisectionSettings()
    if certify:
        certify_level(profile, procedure, max(settings.reps, 10**4), seed, workers)
    target = 1 - beta
    curve = {}

    def power(rho):
        if rho not in curve:
            est = power_at(profile, procedure, placement, rho, settings.reps, seed, workers)
            curve[rho] = PowerCurvePoint(rho, est.value, est.half_width)
        return curve[rho].power

    lo = settings.lo
    hi = settings.hi if settings.hi is not None else default_upper_radius(profile, procedure, beta)
    if settings.hi is None:
        for _ in range(8):  # the proved radius should suffice; allow a little slack
            if power(hi) >= target:
                break
            lo, hi = hi, 2 * hi
    if power(hi) < target or (lo > 0 and power(lo) >= target) or (lo == 0 and procedure.alpha >= target):
        raise ValueError("bracket does not straddle the 1 - beta power level")
    it = 0
    while it < settings.max_iter and (hi - lo) > settings.rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if power(mid) >= target:
            hi = mid
        else:
            lo = mid
        it += 1
    pts = tuple(curve[r] for r in sorted(curve))
    return SeparationResult(hi, pts, placement, it)


# -- scaling ------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingPoint:
    sigma: float
    D: int
    window_sq: float
    bias_sq: float

    @property
    def rho_sq(self):
        return self.window_sq + self.bias_sq


@dataclass(frozen=True)
class ScalingResult:
    slope: float
    intercept: float
    residuals: tuple
    points: tuple
    theoretical: float

    @property
    def relative_error(self):
        return abs(self.slope - self.theoretical) / self.theoretical

    def to_dict(self):
        return {
            "slope": self.slope,
            "theoretical": self.theoretical,
            "relative_error": self.relative_error,
            "intercept": self.intercept,
            "residuals": list(self.residuals),
            "points": [
                {"sigma": p.sigma, "D": p.D, "window_sq": p.window_sq, "bias_sq": p.bias_sq, "rho_sq": p.rho_sq}
                for p in self.points
            ],
        }


def scaling_profile(sigma, t, horizon):
    """sigma_j = sigma j^t, the noise levels of a polynomially ill-posed problem."""
    return VarianceProfile.polynomial(sigma, t, horizon)


def separation_over_window(sigma, s, t, R, alpha, beta, settings, seed, workers, quantile=None, max_D=200):
    """Smallest total radius over truncation levels D for one noise level.

    At level D the chi-square test on the first D coordinates is separated
    empirically with all energy on coordinate D (the largest variance in the
    window); the part of an ellipsoid signal beyond D adds R^2 a_{D+1}^{-2}.
    """
    profile = scaling_profile(sigma, t, max_D + 1)
    best = None
    for D in range(1, max_D + 1):
        proc = TestProcedure.chisq(D, alpha, quantile)
        place = Placement("fixed-support", support=(D,))
        sep = empirical_separation(profile, proc, beta, place, settings, seed, workers, certify=False)
        window = sep.rho**2
        if best is not None and window > best.rho_sq:
            break
        bias = R * R / float(D + 1) ** (2 * s)
        pt = ScalingPoint(sigma, D, window, bias)
        if best is None or pt.rho_sq < best.rho_sq:
            best = pt
    return best


def scaling_experiment(s, t, sigmas, R=1.0, alpha=0.05, beta=0.05, settings=None, seed=0, workers=1, quantile=None):
    """Fit log rho^2 against log sigma across a decreasing noise grid."""
    sigmas = [float(x) for x in sigmas]
    if len(sigmas) < 4:
        raise ValueError("need at least 4 noise levels")
    if any(b >= a for a, b in zip(sigmas, sigmas[1:])):
        raise ValueError("noise grid must be decreasing")
    settings = settings or BisectionSettings()
    pts = [separation_over_window(sg, s, t, R, alpha, beta, settings, seed, workers, quantile) for sg in sigmas]
    x = np.log(sigmas)
    y = np.log([p.rho_sq for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return ScalingResult(float(slope), float(intercept), tuple(float(r) for r in resid), tuple(pts), poly_poly_slope(s, t))
