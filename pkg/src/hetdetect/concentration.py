"""Deviation bounds for noncentral weighted chi-square statistics and their Monte Carlo check."""

import math
from dataclasses import dataclass

import numpy as np

from . import rng


@dataclass(frozen=True)
class TailBound:
    """Thresholds for T = sum_{j<=D} Y_j^2 around its exact mean.

    P(T - E T >= upper) <= exp(-x) and P(T - E T <= -lower) <= exp(-x).
    """

    x: float
    variance_proxy: float  # sum sigma^4 + 2 sum sigma^2 theta^2
    max_var: float
    mean: float  # sum theta^2 + sum sigma^2

    @property
    def upper(self):
        return 2 * math.sqrt(self.variance_proxy * self.x) + 2 * self.max_var * self.x

    @property
    def lower(self):
        return 2 * math.sqrt(self.variance_proxy * self.x)

    @property
    def probability(self):
        return math.exp(-self.x)


def _parts(profile, signal, D):
    if not 1 <= D <= profile.horizon:
        raise ValueError(f"D={D} outside 1..{profile.horizon}")
    s2 = profile.head(D) ** 2
    th = signal.dense(max(D, signal.max_index))[:D]
    return s2, th


def deviation_bounds(profile, signal, D, x):
    if x < 0:
        raise ValueError("x must be nonnegative")
    s2, th = _parts(profile, signal, D)
    t2 = th * th
    return TailBound(
        x=float(x),
        variance_proxy=math.fsum(s2 * s2) + 2 * math.fsum(s2 * t2),
        max_var=float(s2.max()),
        mean=math.fsum(t2) + math.fsum(s2),
    )


def laurent_massart_central(profile, D, x):
    """2 sqrt(x) (sum sigma^4)^(1/2) + 2 x max sigma^2."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    if not 1 <= D <= profile.horizon:
        raise ValueError(f"D={D} outside 1..{profile.horizon}")
    s2 = profile.head(D) ** 2
    return 2 * math.sqrt(x) * math.sqrt(math.fsum(s2 * s2)) + 2 * x * float(s2.max())


@dataclass(frozen=True)
class TailRow:
    x: float
    threshold_up: float
    threshold_down: float
    emp_up: float
    emp_down: float
    bound: float
    se_up: float
    se_down: float

    @property
    def ok(self):
        return self.emp_up <= self.bound + 3 * self.se_up and self.emp_down <= self.bound + 3 * self.se_down


def verify_tail(profile, signal, D, xs, reps, seed, workers=1):
    """Empirical exceedance frequencies of both deviation thresholds for each x."""
    if reps < 10**4:
        raise ValueError("need at least 10^4 replicates")
    s2, th = _parts(profile, signal, D)
    scale = np.sqrt(s2)
    T = rng.replicate_map(lambda r0, m: rng.sumsq(seed, rng.STREAM_NOISE, r0, m, th, scale), reps, workers=workers)
    rows = []
    for x in xs:
        tb = deviation_bounds(profile, signal, D, x)
        dev = T - tb.mean
        up = float(np.count_nonzero(dev >= tb.upper)) / reps
        down = float(np.count_nonzero(dev <= -tb.lower)) / reps
        b = tb.probability
        # standard error of a frequency whose mean is at most the bound
        se = math.sqrt(b * (1 - b) / reps)
        rows.append(TailRow(float(x), tb.upper, tb.lower, up, down, b, se, se))
    return rows


khideux_bounds = deviation_bounds
