"""Order statistics, tail-index estimators and the heavy/light regime test."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._numerics import norm_ppf
from .errors import DegenerateTail, DomainError, PreconditionViolated, TooFewTailSamples
from .tail_models import TailRegime


@dataclass(frozen=True)
class EmpiricalSample:
    """Losses sorted in descending order: values[0] is the maximum."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise DomainError("sample must be one-dimensional")
        if v.size and np.any(np.diff(v) > 0):
            raise DomainError("values must be sorted in descending order")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, x) -> "EmpiricalSample":
        x = np.asarray(x, dtype=float).ravel()
        if not np.all(np.isfinite(x)):
            raise DomainError("sample contains non-finite values")
        order = np.argsort(-x, kind="stable")
        return cls(x[order])

    @property
    def n(self) -> int:
        return int(self.values.size)

    def order_stat(self, i: int) -> float:
        """Z_(i), the i-th largest value (1-based)."""
        if not 1 <= i <= self.n:
            raise DomainError(f"order statistic {i} out of range 1..{self.n}")
        return float(self.values[i - 1])


def _as_sample(sample) -> EmpiricalSample:
    if isinstance(sample, EmpiricalSample):
        return sample
    return EmpiricalSample.from_values(sample)


def tail_count(n: int, beta0: float) -> int:
    """floor(n * beta0), guarded against round-off just below an integer."""
    return int(math.floor(n * beta0 + 1e-9))


def intermediate_var(sample, beta0: float) -> float:
    s = _as_sample(sample)
    k = tail_count(s.n, beta0)
    if k < 1:
        raise TooFewTailSamples(f"floor(n*beta0) = {k} < 1")
    return s.order_stat(min(k, s.n))


def hill_estimate(sample, k: int) -> float:
    """Reciprocal Hill estimator of the tail index from the top k values."""
    s = _as_sample(sample)
    if not 2 <= k <= s.n - 1:
        raise TooFewTailSamples(f"Hill needs 2 <= k <= n-1 (k={k}, n={s.n})")
    base = s.order_stat(k + 1)
    if base <= 0:
        raise DomainError("Hill needs a positive threshold order statistic")
    mean_log = float(np.mean(np.log(s.values[:k] / base)))
    if mean_log <= 0:
        raise DegenerateTail("top order statistics are all equal")
    return 1.0 / mean_log


def light_tail_estimate(sample, beta0: float, kappa1: float = 0.5) -> float:
    """Weibull-type index from two intermediate order statistics.

    With k = floor(n beta0) and k1 = floor(n beta0^kappa1), the hazard at
    Z_(k) is about log(1/beta0) and at Z_(k1) about kappa1 log(1/beta0), so
    the ratio of the two levels pins down the hazard's index.
    """
    s = _as_sample(sample)
    if not 0 < kappa1 < 1:
        raise DomainError("kappa1 must lie in (0, 1)")
    k = tail_count(s.n, beta0)
    k1 = tail_count(s.n, beta0 ** kappa1)
    if k < 2:
        raise TooFewTailSamples(f"light-tail estimator needs floor(n*beta0) >= 2, got {k}")
    if k1 <= k or k1 > s.n:
        raise TooFewTailSamples(f"second level index {k1} must lie in ({k}, n]")
    hi, lo = s.order_stat(k), s.order_stat(k1)
    if lo <= 0:
        raise DomainError("light-tail estimator needs positive order statistics")
    if hi <= lo:
        raise DegenerateTail("order statistics at the two levels coincide")
    return math.log(1.0 / kappa1) / math.log(hi / lo)


@dataclass(frozen=True)
class RegimeDecision:
    hill_gamma: float
    threshold: float
    reject: bool
    regime: TailRegime
    k: int
    M: float
    alpha: float


def regime_threshold(M: float, k: int, alpha: float) -> float:
    return M * (1.0 - norm_ppf(1.0 - alpha) / math.sqrt(k))


def regime_test(sample, k: int | None = None, M: float | None = None, alpha: float = 0.05,
                beta0: float | None = None, kappa1: float = 0.5) -> RegimeDecision:
    """Test H0: light (Weibull-type) tail against a heavy alternative.

    H0 is rejected when the Hill estimate falls below M(1 - z_{1-alpha}/sqrt(k));
    M bounds the Hill index attainable under light tails and must be given.
    On rejection the regime is Frechet with the Hill index; otherwise the
    regime is Gumbel with the light-tail estimate at level beta0 (default k/n).
    """
    s = _as_sample(sample)
    if M is None:
        raise PreconditionViolated("the index bound M has no default and must be supplied")
    if M <= 0:
        raise DomainError("M must be positive")
    if not 0 < alpha < 0.5:
        raise DomainError("alpha must lie in (0, 0.5)")
    if k is None:
        k = tail_count(s.n, s.n ** -0.5)
    g = hill_estimate(s, k)
    thr = regime_threshold(M, k, alpha)
    reject = g < thr
    if reject:
        regime = TailRegime("frechet", g)
    else:
        b0 = beta0 if beta0 is not None else k / s.n
        regime = TailRegime("gumbel", light_tail_estimate(s, b0, kappa1))
    return RegimeDecision(g, thr, bool(reject), regime, int(k), float(M), float(alpha))


@dataclass(frozen=True)
class EvtCalibration:
    theta: float
    beta0: float
    k_n: int
    gamma: float
    regime: TailRegime
    v: float
    beta0_hat: float
    n: int
    decision: RegimeDecision | None = None


def calibrate(sample, *, theta: float | None = None, beta0: float | None = None,
              M: float | None = None, alpha: float = 0.05, kappa1: float = 0.5,
              regime: str | None = None, diag_k: int | None = None,
              decision: RegimeDecision | None = None) -> EvtCalibration:
    """Intermediate level, splice point and tail index for one sample.

    Exactly one of ``theta`` (beta0 = n^-theta) or ``beta0`` is required.
    ``regime`` may force "frechet" or "gumbel"; otherwise the regime test runs
    with index bound ``M`` (a precomputed ``decision`` may be reused).
    """
    s = _as_sample(sample)
    n = s.n
    if n < 2:
        raise TooFewTailSamples("calibration needs at least two observations")
    if (theta is None) == (beta0 is None):
        raise DomainError("give exactly one of theta or beta0")
    if theta is not None:
        if not 0 < theta < 1:
            raise DomainError("theta must lie in (0, 1)")
        beta0 = n ** (-theta)
    else:
        if not 0 < beta0 < 1:
            raise DomainError("beta0 must lie in (0, 1)")
        theta = -math.log(beta0) / math.log(n)
    k_n = tail_count(n, beta0)
    if k_n < 2:
        raise TooFewTailSamples(f"k_n = floor(n*beta0) = {k_n} < 2")
    if k_n > n - 1:
        raise TooFewTailSamples("intermediate level leaves no bulk")
    v = s.order_stat(k_n)
    if regime is None:
        if decision is None:
            decision = regime_test(s, diag_k, M, alpha, beta0=beta0, kappa1=kappa1)
        kind = decision.regime.kind
    else:
        kind = regime
    if kind == "frechet":
        gamma = hill_estimate(s, k_n)
    elif kind == "gumbel":
        gamma = light_tail_estimate(s, beta0, kappa1)
    else:
        raise DomainError(f"unknown regime {kind!r}")
    return EvtCalibration(theta=float(theta), beta0=float(beta0), k_n=k_n, gamma=gamma,
                          regime=TailRegime(kind, gamma), v=v, beta0_hat=(k_n - 1) / n,
                          n=n, decision=decision)
