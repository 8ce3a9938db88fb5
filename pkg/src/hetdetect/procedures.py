"""Detection tests as configured, reproducible decision rules.

A :class:`TestProcedure` fixes the kind, level and quantile method. Its
thresholds depend only on the noise profile and are cached, so deciding many
replicates costs one threshold computation.
"""

import math
import threading
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import quantiles as qt
from . import rates
from .model import SignalClass

KINDS = ("chisq", "max", "combined", "local", "sparse-dagger")


@dataclass(frozen=True)
class TestOutcome:
    """Decision record.

    Atomic kinds reject iff ``statistic > threshold`` (the local test uses
    ``>=``). Composite kinds store the number of rejecting branches as the
    statistic with threshold 0.
    """

    __test__ = False

    kind: str
    reject: bool
    statistic: float
    threshold: float
    subs: tuple = ()
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        d = {
            "kind": self.kind,
            "reject": self.reject,
            "statistic": self.statistic,
            "threshold": self.threshold,
        }
        if self.detail:
            d["detail"] = self.detail
        if self.subs:
            d["subs"] = [s.to_dict() for s in self.subs]
        return d


def _composite(kind, subs, **detail):
    hits = sum(s.reject for s in subs)
    return TestOutcome(kind, hits > 0, float(hits), 0.0, tuple(subs), detail)


@dataclass(frozen=True)
class TestProcedure:
    """A test of kind ``chisq`` (D), ``max``/``combined`` (n), ``local`` (j) or ``sparse-dagger`` (lp body)."""

    __test__ = False

    kind: str
    alpha: float
    D: Optional[int] = None
    n: Optional[int] = None
    j: Optional[int] = None
    body: Optional[SignalClass] = None
    quantile: Optional[qt.QuantileMethod] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown test kind {self.kind!r}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"level must lie in (0, 1), got {self.alpha}")
        need = {"chisq": "D", "max": "n", "combined": "n", "local": "j", "sparse-dagger": "body"}[self.kind]
        if getattr(self, need) is None:
            raise ValueError(f"{self.kind} test needs {need}")
        if self.kind == "sparse-dagger" and self.body.kind != "lp-body":
            raise ValueError("the dagger test needs an l_p body")
        if self.quantile is None:
            default = qt.MONTE_CARLO if self.kind in ("chisq", "combined", "sparse-dagger") else qt.EXACT
            object.__setattr__(self, "quantile", default)

    @classmethod
    def chisq(cls, D, alpha, quantile=None):
        return cls("chisq", alpha, D=D, quantile=quantile)

    @classmethod
    def max(cls, n, alpha, quantile=None):
        return cls("max", alpha, n=n, quantile=quantile)

    @classmethod
    def combined(cls, n, alpha, quantile=None):
        return cls("combined", alpha, n=n, quantile=quantile)

    @classmethod
    def local(cls, j, alpha):
        return cls("local", alpha, j=j)

    @classmethod
    def sparse_dagger(cls, body, alpha, quantile=None):
        return cls("sparse-dagger", alpha, body=body, quantile=quantile)

    @property
    def width(self):
        """Number of leading coordinates the test looks at, or None if it needs the horizon."""
        return {"chisq": self.D, "max": self.n, "combined": self.n, "local": self.j}.get(self.kind)

    def to_dict(self):
        d = {"kind": self.kind, "alpha": self.alpha}
        for name in ("D", "n", "j"):
            if getattr(self, name) is not None:
                d[name] = getattr(self, name)
        if self.body is not None:
            d["class"] = self.body.to_dict()
        d["quantile"] = self.quantile.to_dict()
        return d

    def prepare(self, profile, workers=1):
        return thresholds(self, profile, workers)

    def run(self, Y, profile, workers=1):
        return thresholds(self, profile, workers).decide(np.asarray(Y, dtype=np.float64))

    def reject_many(self, Y, profile, workers=1):
        return thresholds(self, profile, workers).reject_many(np.asarray(Y, dtype=np.float64))


def _check_len(Y, m, what):
    if Y.shape[-1] < m:
        raise ValueError(f"{what}={m} exceeds the {Y.shape[-1]} observations supplied")


# -- prepared rules -------------------------------------------------------------


@dataclass(frozen=True)
class _Chisq:
    D: int
    threshold: float

    def decide(self, Y):
        _check_len(Y, self.D, "D")
        stat = math.fsum(Y[: self.D] ** 2)
        return TestOutcome("chisq", stat > self.threshold, stat, self.threshold, detail={"D": self.D})

    def reject_many(self, Y):
        _check_len(Y, self.D, "D")
        x = Y[:, : self.D]
        return np.einsum("ij,ij->i", x, x) > self.threshold


@dataclass(frozen=True, eq=False)
class _Max:
    n: int
    sigma: np.ndarray
    threshold: float

    def decide(self, Y):
        _check_len(Y, self.n, "n")
        z = (Y[: self.n] / self.sigma) ** 2
        i = int(np.argmax(z))
        stat = float(z[i])
        return TestOutcome("max", stat > self.threshold, stat, self.threshold, detail={"n": self.n, "argmax": i + 1})

    def reject_many(self, Y):
        _check_len(Y, self.n, "n")
        return np.max((Y[:, : self.n] / self.sigma) ** 2, axis=1) > self.threshold


@dataclass(frozen=True)
class _Combined:
    chisq: _Chisq
    max: _Max

    def decide(self, Y):
        return _composite("combined", [self.chisq.decide(Y), self.max.decide(Y)])

    def reject_many(self, Y):
        return self.chisq.reject_many(Y) | self.max.reject_many(Y)


@dataclass(frozen=True)
class _Local:
    j: int
    threshold: float

    def decide(self, Y):
        _check_len(Y, self.j, "j")
        stat = abs(float(Y[self.j - 1]))
        return TestOutcome("local", stat >= self.threshold, stat, self.threshold, detail={"j": self.j})

    def reject_many(self, Y):
        _check_len(Y, self.j, "j")
        return np.abs(Y[:, self.j - 1]) >= self.threshold


@dataclass(frozen=True, eq=False)
class _LocalScan:
    """Local tests at coordinates first..last with per-coordinate thresholds."""

    first: int
    thresholds: np.ndarray

    def decide(self, Y):
        last = self.first + len(self.thresholds) - 1
        _check_len(Y, last, "N")
        ratio = np.abs(Y[self.first - 1 : last]) / self.thresholds
        i = int(np.argmax(ratio))
        stat = float(ratio[i])
        return TestOutcome("local-scan", stat >= 1.0, stat, 1.0, detail={"from": self.first, "to": last, "argmax": self.first + i})

    def reject_many(self, Y):
        last = self.first + len(self.thresholds) - 1
        _check_len(Y, last, "N")
        return np.any(np.abs(Y[:, self.first - 1 : last]) >= self.thresholds, axis=1)


@dataclass(frozen=True)
class _Dagger:
    d_dagger: int
    chisq: _Chisq
    local: Optional[_LocalScan]

    def decide(self, Y):
        subs = [self.chisq.decide(Y)]
        if self.local is not None:
            subs.append(self.local.decide(Y))
        return _composite("sparse-dagger", subs, d_dagger=self.d_dagger)

    def reject_many(self, Y):
        out = self.chisq.reject_many(Y)
        if self.local is not None:
            out = out | self.local.reject_many(Y)
        return out


def dagger_levels(alpha, d_dagger, N):
    """Levels 3 alpha / (pi^2 (j - D)^2) for j = D+1..N; they sum to less than alpha/2."""
    m = np.arange(1, N - d_dagger + 1, dtype=np.float64)
    return 3.0 * alpha / (math.pi**2 * m * m)


def _build(proc, profile, workers):
    a, q = proc.alpha, proc.quantile
    if proc.kind == "chisq":
        return _Chisq(proc.D, qt.weighted_chisq_quantile(profile, proc.D, a, q, workers))
    if proc.kind == "max":
        return _Max(proc.n, profile.head(proc.n), qt.max_chisq_quantile(proc.n, a, q, workers))
    if proc.kind == "combined":
        # chi-square part keeps the configured method; the max part has a closed form
        mq = qt.EXACT if q.kind == "monte-carlo" else q
        return _Combined(
            _Chisq(proc.n, qt.weighted_chisq_quantile(profile, proc.n, a / 2, q, workers)),
            _Max(proc.n, profile.head(proc.n), qt.max_chisq_quantile(proc.n, a / 2, mq, workers)),
        )
    if proc.kind == "local":
        if proc.j > profile.horizon:
            raise ValueError(f"j={proc.j} exceeds horizon {profile.horizon}")
        return _Local(proc.j, qt.gaussian_abs_quantile(profile.sigma_at(proc.j), a))
    body = proc.body
    N = profile.horizon
    dd = rates.d_dagger(body.a, body.p, body.R, profile, N)
    chi = _Chisq(dd, qt.weighted_chisq_quantile(profile, dd, a / 2, q, workers))
    local = None
    if dd < N:
        levels = dagger_levels(a, dd, N)
        sig = profile.head(N)[dd:]
        # sigma * z_{1 - level/2}, vectorised gaussian_abs_quantile
        thr = np.array([qt.gaussian_abs_quantile(s, lv) for s, lv in zip(sig, levels)])
        local = _LocalScan(dd + 1, thr)
    return _Dagger(dd, chi, local)


_cache = {}
_lock = threading.Lock()


def thresholds(proc, profile, workers=1):
    """Prepared decision rule for ``proc`` on ``profile`` (cached)."""
    key = (proc, profile)
    with _lock:
        hit = _cache.get(key)
    if hit is None:
        hit = _build(proc, profile, workers)
        with _lock:
            if len(_cache) >= 256:
                _cache.clear()
            _cache[key] = hit
    return hit


# -- functional front end -----------------------------------------------------------


def chisq_test(Y, profile, D, alpha, quantile=None, workers=1):
    return TestProcedure.chisq(D, alpha, quantile).run(Y, profile, workers)


def max_test(Y, profile, n, alpha, quantile=None):
    return TestProcedure.max(n, alpha, quantile).run(Y, profile)


def combined_test(Y, profile, n, alpha, quantile=None, workers=1):
    return TestProcedure.combined(n, alpha, quantile).run(Y, profile, workers)


def local_test(Y, profile, j, level):
    return TestProcedure.local(j, level).run(Y, profile)


def sparse_dagger_test(Y, profile, body, alpha, quantile=None, workers=1):
    return TestProcedure.sparse_dagger(body, alpha, quantile).run(Y, profile, workers)


def procedure_from_dict(d):
    from .model import class_from_dict

    body = class_from_dict(d["class"]) if "class" in d else None
    q = qt.method_from_dict(d["quantile"]) if "quantile" in d else None
    return TestProcedure(d["kind"], float(d["alpha"]), D=d.get("D"), n=d.get("n"), j=d.get("j"), body=body, quantile=q)


def with_level(proc, alpha):
    return replace(proc, alpha=alpha)
