"""Observation model Y_j = theta_j + sigma_j * eps_j and its building blocks."""

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np

from . import rng

MAX_HORIZON = 10**6


def default_horizon(sigma):
    """Truncation level for a countable index set: ceil(sigma^-2), capped at 10^6."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return int(min(math.ceil(sigma**-2), MAX_HORIZON))


def _readonly(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class VarianceProfile:
    """Noise levels sigma_1..sigma_N on the index set J = {1..N}.

    ``kind`` is one of ``constant`` (sigma), ``polynomial`` (sigma * j**gamma),
    ``exponential`` (sigma * exp(gamma * j)) or ``explicit`` (``values``).
    """

    kind: str
    horizon: int
    sigma: float = 1.0
    gamma: float = 0.0
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "polynomial", "exponential", "explicit"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "explicit":
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            if len(self.values) != self.horizon:
                raise ValueError("explicit profile length must equal horizon")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.kind != "explicit" and not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.kind == "polynomial" and self.gamma < 0:
            raise ValueError("polynomial profile needs gamma >= 0")
        if self.kind == "exponential" and not self.gamma > 0:
            raise ValueError("exponential profile needs gamma > 0")
        s = self.sigmas
        if not (np.all(s > 0) and np.all(np.isfinite(s))):
            raise ValueError("all sigma_j must be positive and finite")

    @classmethod
    def constant(cls, sigma, horizon):
        return cls("constant", horizon, sigma=sigma)

    @classmethod
    def polynomial(cls, sigma, gamma, horizon):
        return cls("polynomial", horizon, sigma=sigma, gamma=gamma)

    @classmethod
    def exponential(cls, sigma, gamma, horizon):
        return cls("exponential", horizon, sigma=sigma, gamma=gamma)

    @classmethod
    def explicit(cls, values):
        values = tuple(values)
        return cls("explicit", len(values), values=values)

    @cached_property
    def sigmas(self):
        """Read-only array of sigma_1..sigma_N."""
        j = np.arange(1, self.horizon + 1, dtype=np.float64)
        with np.errstate(over="ignore"):
            if self.kind == "constant":
                s = np.full(self.horizon, float(self.sigma))
            elif self.kind == "polynomial":
                s = self.sigma * j**self.gamma
            elif self.kind == "exponential":
                s = self.sigma * np.exp(self.gamma * j)
            else:
                s = np.array(self.values, dtype=np.float64)
        return _readonly(s)

    def sigma_at(self, j):
        if not 1 <= j <= self.horizon:
            raise ValueError(f"index {j} outside 1..{self.horizon}")
        return float(self.sigmas[j - 1])

    def head(self, n):
        """sigma_1..sigma_n as a read-only array."""
        if not 1 <= n <= self.horizon:
            raise ValueError(f"n={n} outside 1..{self.horizon}")
        return self.sigmas[:n]

    @cached_property
    def is_nondecreasing(self):
        s = self.sigmas
        return bool(np.all(s[1:] >= s[:-1]))

    def with_horizon(self, horizon):
        if self.kind == "explicit":
            if horizon > self.horizon:
                raise ValueError("cannot extend an explicit profile")
            return VarianceProfile.explicit(self.values[:horizon])
        return VarianceProfile(self.kind, horizon, sigma=self.sigma, gamma=self.gamma)

    def to_dict(self):
        if self.kind == "explicit":
            return {"kind": "explicit", "values": list(self.values)}
        d = {"kind": self.kind, "sigma": self.sigma, "horizon": self.horizon}
        if self.kind != "constant":
            d["gamma"] = self.gamma
        return d


def sigma_at(profile, j):
    return profile.sigma_at(j)


def from_inverse_problem(b, sigma):
    """Profile sigma_j = sigma / b_j for the singular values b_j of an operator."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.size == 0:
        raise ValueError("b must be a nonempty sequence")
    if not sigma > 0:
        raise ValueError("noise level must be positive")
    if not np.all(b > 0):
        raise ValueError("singular values must be positive")
    return VarianceProfile.explicit(sigma / b)


@dataclass(frozen=True, eq=False)
class OrderStats:
    """Sorted sigma_(1) <= ... <= sigma_(n) with prefix sums of powers."""

    n: int
    perm: np.ndarray  # 0-based original positions in sorted order (stable)
    sorted_sigma: np.ndarray
    prefix_sq: np.ndarray  # prefix_sq[i] = sum_{j<=i} sigma_(j)^2, prefix_sq[0] = 0
    prefix_4th: np.ndarray

    def block_sq(self, l, k):
        """Sigma^2_{l,k} = sum_{j=l+1}^{l+k} sigma_(j)^2."""
        if l < 0 or k < 1 or l + k > self.n:
            raise ValueError(f"block (l={l}, k={k}) exceeds n={self.n}")
        # summed directly: prefix differences can break monotonicity by an ulp
        blk = self.sorted_sigma[l : l + k]
        return math.fsum(blk * blk)

    def tail_4th_root(self, k):
        """(sum_{j=n-k+1}^n sigma_(j)^4)^(1/2)."""
        top = self.sorted_sigma[self.n - k :] ** 2
        return math.sqrt(math.fsum(top * top))


@lru_cache(maxsize=256)
def order_stats(profile, n):
    s = profile.head(n)
    if profile.is_nondecreasing:
        perm = np.arange(n)
    else:
        perm = np.argsort(s, kind="stable")
    srt = s[perm]
    sq = srt * srt
    p2 = np.concatenate(([0.0], np.cumsum(sq)))
    p4 = np.concatenate(([0.0], np.cumsum(sq * sq)))
    return OrderStats(n, _readonly(perm), _readonly(srt), _readonly(p2), _readonly(p4))


def ordered_variances(profile, n):
    """sigma_(1)..sigma_(n): the first n noise levels sorted, ties kept in index order."""
    return order_stats(profile, n).sorted_sigma


def sigma_block(profile, l, k, n=None):
    """Sigma^2_{l,k} over the order statistics of sigma_1..sigma_n (default n = horizon)."""
    n = profile.horizon if n is None else n
    if l + k > n:
        raise ValueError(f"l + k = {l + k} exceeds n = {n}")
    return order_stats(profile, n).block_sq(l, k)


@dataclass(frozen=True)
class Signal:
    """Sparse mean vector theta stored as sorted (index, value) pairs; absent means 0."""

    entries: tuple = ()

    def __post_init__(self):
        items = {}
        for j, v in self.entries:
            j = int(j)
            if j < 1:
                raise ValueError("signal indices start at 1")
            items[j] = float(v)
        clean = tuple(sorted((j, v) for j, v in items.items() if v != 0.0))
        object.__setattr__(self, "entries", clean)

    @classmethod
    def from_mapping(cls, mapping):
        return cls(tuple((int(j), float(v)) for j, v in mapping.items()))

    @classmethod
    def from_dense(cls, values):
        return cls(tuple((j + 1, float(v)) for j, v in enumerate(values)))

    @classmethod
    def zero(cls):
        return cls(())

    @property
    def support(self):
        return tuple(j for j, _ in self.entries)

    @property
    def max_index(self):
        return self.entries[-1][0] if self.entries else 0

    @property
    def norm2_sq(self):
        return math.fsum(v * v for _, v in self.entries)

    @property
    def norm_inf(self):
        return max((abs(v) for _, v in self.entries), default=0.0)

    def dense(self, n):
        if self.max_index > n:
            raise ValueError(f"signal index {self.max_index} beyond n={n}")
        out = np.zeros(n)
        for j, v in self.entries:
            out[j - 1] = v
        return out

    def scaled(self, c):
        return Signal(tuple((j, c * v) for j, v in self.entries))

    def to_dict(self):
        return {"entries": {str(j): v for j, v in self.entries}}


@dataclass(frozen=True)
class SmoothnessSequence:
    """Nondecreasing positive weights a_j defining ellipsoids and l_p bodies.

    ``polynomial``: scale * j**s. ``exponential``: scale * exp(nu * j**s).
    ``explicit``: given values a_1..a_m.
    """

    kind: str
    s: float = 0.0
    nu: float = 0.0
    scale: float = 1.0
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("polynomial", "exponential", "explicit"):
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if self.kind == "explicit":
            vals = tuple(float(v) for v in self.values)
            object.__setattr__(self, "values", vals)
            if not vals or min(vals) <= 0:
                raise ValueError("explicit weights must be positive")
            if any(b < a for a, b in zip(vals, vals[1:])):
                raise ValueError("weights must be nondecreasing")
        else:
            if not self.scale > 0:
                raise ValueError("scale must be positive")
            if self.s < 0 or self.nu < 0:
                raise ValueError("exponents must be nonnegative")

    @classmethod
    def polynomial(cls, s, scale=1.0):
        return cls("polynomial", s=s, scale=scale)

    @classmethod
    def exponential(cls, nu, s=1.0, scale=1.0):
        return cls("exponential", s=s, nu=nu, scale=scale)

    @classmethod
    def explicit(cls, values):
        return cls("explicit", values=tuple(values))

    def values_upto(self, n):
        j = np.arange(1, n + 1, dtype=np.float64)
        if self.kind == "polynomial":
            return self.scale * j**self.s
        if self.kind == "exponential":
            return self.scale * np.exp(self.nu * j**self.s)
        if n > len(self.values):
            raise ValueError(f"explicit weights have only {len(self.values)} entries")
        return np.array(self.values[:n])

    def at(self, j):
        if self.kind == "polynomial":
            return self.scale * float(j) ** self.s
        if self.kind == "exponential":
            return self.scale * math.exp(self.nu * float(j) ** self.s)
        return self.values[j - 1]

    def to_dict(self):
        if self.kind == "explicit":
            return {"kind": "explicit", "values": list(self.values)}
        d = {"kind": self.kind, "s": self.s, "scale": self.scale}
        if self.kind == "exponential":
            d["nu"] = self.nu
        return d


@dataclass(frozen=True)
class SignalClass:
    """One of S_D, the sparse class S_{k,n}, an ellipsoid E_{a,2}(R) or an l_p body E_{a,p}(R)."""

    kind: str
    D: Optional[int] = None
    k: Optional[int] = None
    n: Optional[int] = None
    a: Optional[SmoothnessSequence] = None
    R: Optional[float] = None
    p: Optional[float] = None

    def __post_init__(self):
        if self.kind == "S_D":
            if self.D is None or self.D < 1:
                raise ValueError("S_D needs D >= 1")
        elif self.kind == "sparse":
            if self.k is None or self.n is None or not 1 <= self.k <= self.n:
                raise ValueError("sparse class needs 1 <= k <= n")
        elif self.kind in ("ellipsoid", "lp-body"):
            if self.a is None or self.R is None or not self.R > 0:
                raise ValueError(f"{self.kind} needs weights a and R > 0")
            if self.kind == "lp-body" and not (self.p is not None and 0 < self.p < 2):
                raise ValueError("l_p body needs 0 < p < 2")
        else:
            raise ValueError(f"unknown class kind {self.kind!r}")

    @classmethod
    def s_d(cls, D):
        return cls("S_D", D=D)

    @classmethod
    def sparse(cls, k, n):
        return cls("sparse", k=k, n=n)

    @classmethod
    def ellipsoid(cls, a, R):
        return cls("ellipsoid", a=a, R=R)

    @classmethod
    def lp_body(cls, a, p, R):
        return cls("lp-body", a=a, p=p, R=R)

    def check_horizon(self, horizon):
        if self.kind == "S_D" and self.D > horizon:
            raise ValueError(f"D={self.D} exceeds horizon {horizon}")
        if self.kind == "sparse" and self.n > horizon:
            raise ValueError(f"n={self.n} exceeds horizon {horizon}")

    def to_dict(self):
        d = {"kind": self.kind}
        for name in ("D", "k", "n", "R", "p"):
            if getattr(self, name) is not None:
                d[name] = getattr(self, name)
        if self.a is not None:
            d["a"] = self.a.to_dict()
        return d


def membership(signal, cls):
    """Exact evaluation of the constraint defining ``cls``.

    The l_p body constraint uses |theta_j|^p.
    """
    if not signal.entries:
        return True
    if cls.kind == "S_D":
        return signal.max_index <= cls.D
    if cls.kind == "sparse":
        return signal.max_index <= cls.n and len(signal.entries) <= cls.k
    if cls.kind == "ellipsoid":
        total = math.fsum(cls.a.at(j) ** 2 * v * v for j, v in signal.entries)
        return total <= cls.R**2
    total = math.fsum((cls.a.at(j) * abs(v)) ** cls.p for j, v in signal.entries)
    return total <= cls.R**cls.p


@dataclass(frozen=True, eq=False)
class Observation:
    values: np.ndarray
    seed: int
    replicate: int
    stream: int = rng.STREAM_NOISE
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.values)


def sample(profile, signal, seed, replicate=0, n=None):
    """Draw Y_1..Y_n for one replicate; eps_j is keyed by (seed, replicate, j)."""
    n = profile.horizon if n is None else n
    mean = signal.dense(n)
    eps = rng.normals(seed, rng.STREAM_NOISE, replicate, 1, n)[0]
    y = _readonly(mean + profile.head(n) * eps)
    return Observation(y, int(seed), int(replicate), provenance={"n": n})


def sample_batch(profile, mean, seed, rep0, nrep):
    """Y for replicates rep0..rep0+nrep-1; ``mean`` is (n,) or one row per replicate."""
    mean = np.asarray(mean, dtype=np.float64)
    n = mean.shape[-1]
    return mean + profile.head(n) * rng.normals(seed, rng.STREAM_NOISE, rep0, nrep, n)


# -- JSON config --------------------------------------------------------------


def sequence_from_dict(d):
    kind = d["kind"]
    if kind == "explicit":
        return SmoothnessSequence.explicit(d["values"])
    if kind == "polynomial":
        return SmoothnessSequence.polynomial(d["s"], d.get("scale", 1.0))
    if kind == "exponential":
        return SmoothnessSequence.exponential(d["nu"], d.get("s", 1.0), d.get("scale", 1.0))
    raise ValueError(f"unknown sequence kind {kind!r}")


def profile_from_dict(d):
    kind = d["kind"]
    if kind == "explicit":
        return VarianceProfile.explicit(d["values"])
    if kind == "inverse-problem":
        sigma = d["sigma"]
        b = d["b"]
        if isinstance(b, dict):
            horizon = d.get("horizon") or default_horizon(sigma)
            j = np.arange(1, horizon + 1, dtype=np.float64)
            if b["kind"] == "polynomial":
                b = j ** -float(b["t"])
            elif b["kind"] == "exponential":
                b = np.exp(-float(b["gamma"]) * j ** float(b.get("r", 1.0)))
            else:
                raise ValueError(f"unknown spectrum kind {b['kind']!r}")
        return from_inverse_problem(b, sigma)
    sigma = d.get("sigma", 1.0)
    horizon = d.get("horizon") or default_horizon(sigma)
    return VarianceProfile(kind, int(horizon), sigma=sigma, gamma=d.get("gamma", 0.0))


def signal_from_dict(d):
    if d is None:
        return Signal.zero()
    if "dense" in d:
        return Signal.from_dense(d["dense"])
    return Signal.from_mapping(d.get("entries", {}))


def class_from_dict(d):
    a = sequence_from_dict(d["a"]) if "a" in d else None
    return SignalClass(d["kind"], D=d.get("D"), k=d.get("k"), n=d.get("n"), a=a, R=d.get("R"), p=d.get("p"))
