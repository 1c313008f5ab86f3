"""Loss laws with explicit tails, spectral weights and tail-weighted risk.

Every law exposes ``survival`` (P(Z > x)) and ``quantile`` (the generalised
inverse of survival, indexed by tail probability). Risk measures are
integrals of quantiles against a spectral weight,

    rho(beta) = int_0^1 w(t) * quantile(beta * t) dt,

so CVaR is the flat weight w = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import beta as beta_fn
from scipy.special import gammaln

from ._numerics import integrate, norm_ppf, norm_sf, solve_increasing, invert_decreasing
from .errors import DivergentIntegral, DomainError
from .rng import as_generator


@dataclass(frozen=True)
class TailRegime:
    """Frechet: survival is regularly varying with index -gamma.
    Gumbel: the cumulative hazard is regularly varying with index gamma."""

    kind: str
    gamma: float

    def __post_init__(self):
        if self.kind not in ("frechet", "gumbel"):
            raise DomainError(f"unknown regime kind {self.kind!r}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise DomainError("regime index must be positive and finite")

    @property
    def heavy(self) -> bool:
        return self.kind == "frechet"


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _finish(out, scalar):
    return float(out) if scalar else out


class TailLaw:
    """Base class; subclasses implement ``_sf`` and optionally ``_quantile``."""

    regime: TailRegime | None = None

    def survival(self, x):
        arr, scalar = _as_array(x)
        return _finish(np.clip(self._sf(np.atleast_1d(arr)), 0.0, 1.0).reshape(arr.shape), scalar)

    def quantile(self, beta):
        arr, scalar = _as_array(beta)
        b = np.atleast_1d(arr)
        if np.any((b <= 0) | (b >= 1)):
            raise DomainError("tail probability must lie in (0, 1)")
        x = self._settle(self._quantile(b), b)
        return _finish(x.reshape(arr.shape), scalar)

    def _quantile(self, b):
        return invert_decreasing(self._sf, b, lo=0.0, hi=1.0)

    def _settle(self, x, b):
        # Nudge upward by a few ulps so that survival(quantile(b)) <= b holds
        # exactly in floating point (the generalised-inverse contract).
        x = np.asarray(x, dtype=float).copy()
        for _ in range(60):
            bad = self._sf(x) > b
            if not bad.any():
                break
            x[bad] = np.nextafter(x[bad], np.inf) + 4.0 * np.spacing(x[bad])
        return x


@dataclass(frozen=True)
class GeneralizedPareto(TailLaw):
    alpha: float
    sigma: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.sigma <= 0:
            raise DomainError("GeneralizedPareto needs alpha > 0 and sigma > 0")

    @property
    def regime(self):
        return TailRegime("frechet", 1.0 / self.alpha)

    def _sf(self, x):
        x = np.maximum(x, 0.0)
        return np.exp(-np.log1p(self.alpha * x / self.sigma) / self.alpha)

    def _quantile(self, b):
        return self.sigma / self.alpha * np.expm1(-self.alpha * np.log(b))

    def cvar(self, beta):
        v = float(self._quantile(np.array([beta]))[0])
        if self.alpha >= 1:
            return math.inf
        return v + (self.sigma + self.alpha * v) / (1.0 - self.alpha)


@dataclass(frozen=True)
class WeibullType(TailLaw):
    c: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        if self.c <= 0 or self.q <= 0:
            raise DomainError("WeibullType needs c > 0 and q > 0")

    @property
    def regime(self):
        return TailRegime("gumbel", self.q)

    def _sf(self, x):
        x = np.maximum(x, 0.0)
        return np.exp(-self.c * x ** self.q)

    def _quantile(self, b):
        return (-np.log(b) / self.c) ** (1.0 / self.q)


def Exponential(rate: float = 1.0) -> WeibullType:
    return WeibullType(c=rate, q=1.0)


@dataclass(frozen=True)
class SurvivalFormula(TailLaw):
    """k * x^-a * (log x)^b beyond the splice point, uniform bulk below it."""

    a: float
    b: float = 0.0
    k: float = 1.0

    def __post_init__(self):
        if self.a <= 0 or self.b < 0 or self.k <= 0:
            raise DomainError("SurvivalFormula needs a > 0, b >= 0, k > 0")

    @property
    def regime(self):
        return TailRegime("frechet", self.a)

    def _log_formula(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.log(x)
            out = math.log(self.k) - self.a * lx
            if self.b:
                out = out + self.b * np.log(lx)
        return out

    @property
    def x0(self) -> float:
        # formula decreases for log x > b/a; splice where it is also <= 1
        start = math.exp(self.b / self.a) if self.b > 0 else 0.0
        if self.b == 0:
            return self.k ** (1.0 / self.a)
        if self._log_formula(np.array([start]))[0] <= 0:
            return start
        hi = start * 2.0
        while self._log_formula(np.array([hi]))[0] > 0:
            hi *= 2.0
        return brentq(lambda t: float(self._log_formula(np.array([t]))[0]), start, hi, xtol=1e-15, rtol=1e-15)

    @property
    def tail_mass(self) -> float:
        return float(np.exp(self._log_formula(np.array([self.x0]))[0]))

    def _sf(self, x):
        x0, m0 = self.x0, self.tail_mass
        out = np.ones_like(x, dtype=float)
        bulk = (x > 0) & (x < x0)
        out[bulk] = 1.0 - (1.0 - m0) * x[bulk] / x0
        tail = x >= x0
        out[tail] = np.exp(self._log_formula(x[tail]))
        return out

    def _quantile(self, b):
        x0, m0 = self.x0, self.tail_mass
        out = np.empty_like(b)
        bulk = b >= m0
        out[bulk] = x0 * (1.0 - b[bulk]) / (1.0 - m0) if m0 < 1 else x0
        tail = ~bulk
        if tail.any():
            # solve log k - a*y + b*log y = log beta in y = log x (decreasing)
            def neg(y):
                val = -(math.log(self.k) - self.a * y + (self.b * np.log(y) if self.b else 0.0))
                der = self.a - (self.b / y if self.b else 0.0)
                return val, der

            target = -np.log(b[tail])
            y0 = math.log(x0) if x0 > 0 else -50.0
            hi = np.full(target.shape, y0 + 1.0)
            while True:
                v, _ = neg(hi)
                short = v < target
                if not short.any():
                    break
                hi = np.where(short, y0 + 2.0 * (hi - y0), hi)
            out[tail] = np.exp(solve_increasing(neg, target, y0, hi, rtol=0.0, atol=1e-13))
        return out


@dataclass(frozen=True)
class ShiftedSurvivalFormula(TailLaw):
    """(1 + x/s)^-a * (1 + log(1 + x/s))^b with s = k^(1/a).

    A proper survival function on [0, inf) that is asymptotically equal to
    k x^-a (log x)^b, without a bulk atom at a splice point.
    """

    a: float
    b: float = 0.0
    k: float = 1.0

    def __post_init__(self):
        if self.a <= 0 or self.b < 0 or self.k <= 0:
            raise DomainError("ShiftedSurvivalFormula needs a > 0, b >= 0, k > 0")
        if self.b > self.a:
            raise DomainError("needs b <= a for a decreasing survival function")

    @property
    def regime(self):
        return TailRegime("frechet", self.a)

    @property
    def scale(self) -> float:
        return self.k ** (1.0 / self.a)

    def _sf(self, x):
        out = np.ones_like(x, dtype=float)
        pos = x > 0
        u = np.log1p(x[pos] / self.scale)
        out[pos] = np.exp(-self.a * u + self.b * np.log1p(u))
        return out

    def _quantile(self, b):
        # g(u) = a u - b log(1+u) is increasing in u = log(1 + x/s) >= 0
        def g(u):
            return self.a * u - self.b * np.log1p(u), self.a - self.b / (1.0 + u)

        target = -np.log(b)
        hi = target / max(self.a - self.b, 1e-12) + 1.0
        hi = np.maximum(hi, 1.0)
        while True:
            short = g(hi)[0] < target
            if not short.any():
                break
            hi = np.where(short, 2.0 * hi, hi)
        u = solve_increasing(g, target, np.zeros_like(target), hi, rtol=1e-15, atol=0.0)
        return self.scale * np.expm1(u)


@dataclass(frozen=True)
class HazardFormula(TailLaw):
    """Survival exp(-x^q * log(1+x)^r)."""

    q: float
    r: float = 0.0

    def __post_init__(self):
        if self.q <= 0 or self.r < 0:
            raise DomainError("HazardFormula needs q > 0 and r >= 0")

    @property
    def regime(self):
        return TailRegime("gumbel", self.q)

    @property
    def x0(self) -> float:
        # the hazard is increasing from 0, so the formula holds on all of [0, inf)
        return 0.0

    def hazard(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return x ** self.q * np.log1p(x) ** self.r

    def _sf(self, x):
        return np.exp(-self.hazard(x))

    def _quantile(self, b):
        # solve q*y + r*log(log(1+e^y)) = log(-log beta) in y = log x
        target = np.log(-np.log(b))
        q, r = self.q, self.r

        def h(y):
            ex = np.exp(y)
            l1 = np.log1p(ex)
            val = q * y + (r * np.log(l1) if r else 0.0)
            der = q + (r * ex / ((1.0 + ex) * l1) if r else 0.0)
            return val, der

        lo = np.minimum((target - r * math.log(math.log(2.0))) / q, target / (q + r)) - 1.0
        hi = np.maximum(target / q, target / (q + r)) + 1.0
        lo = np.minimum(lo, hi - 2.0)
        while True:
            vlo, _ = h(lo)
            vhi, _ = h(hi)
            bad_lo, bad_hi = vlo > target, vhi < target
            if not (bad_lo.any() or bad_hi.any()):
                break
            lo = np.where(bad_lo, lo - 2.0 * (np.abs(lo) + 1.0), lo)
            hi = np.where(bad_hi, hi + 2.0 * (np.abs(hi) + 1.0), hi)
        return np.exp(solve_increasing(h, target, lo, hi, rtol=0.0, atol=1e-13))


@dataclass(frozen=True)
class LognormalStd(TailLaw):
    regime = None

    def _sf(self, x):
        with np.errstate(divide="ignore"):
            return np.where(x > 0, norm_sf(np.log(np.maximum(x, 1e-300))), 1.0)

    def _quantile(self, b):
        return np.exp(-norm_ppf(b))


@dataclass(frozen=True)
class Mixture(TailLaw):
    base: TailLaw
    contaminant: TailLaw
    eps: float

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise DomainError("mixing probability must lie in [0, 1]")

    @property
    def regime(self):
        if self.eps == 0:
            return self.base.regime
        if self.eps == 1:
            return self.contaminant.regime
        regs = [r for r in (self.base.regime, self.contaminant.regime) if r is not None]
        heavy = [r for r in regs if r.heavy]
        if heavy:
            return min(heavy, key=lambda r: r.gamma)
        if len(regs) == 2:
            return min(regs, key=lambda r: r.gamma)
        return None

    def _sf(self, x):
        if self.eps == 0:
            return self.base._sf(x)
        if self.eps == 1:
            return self.contaminant._sf(x)
        return (1.0 - self.eps) * self.base._sf(x) + self.eps * self.contaminant._sf(x)

    def _quantile(self, b):
        if self.eps == 0:
            return self.base._quantile(b)
        if self.eps == 1:
            return self.contaminant._quantile(b)
        qa, qb = self.base._quantile(b), self.contaminant._quantile(b)
        lo = np.minimum(qa, qb)
        hi = np.maximum(qa, qb)
        return invert_decreasing(self._sf, b, lo=lo * (1 - 1e-12), hi=np.maximum(hi, 1e-300))

    def _sample(self, n, rng):
        pick = rng.random(n) < self.eps
        u = 1.0 - rng.random(n)
        out = np.empty(n)
        if (~pick).any():
            out[~pick] = self.base.quantile(u[~pick])
        if pick.any():
            out[pick] = self.contaminant.quantile(u[pick])
        return out


def survival(law: TailLaw, x):
    return law.survival(x)


def quantile(law: TailLaw, beta):
    """Value-at-Risk at tail level beta: inf{u : P(Z > u) <= beta}."""
    return law.quantile(beta)


def sample(law: TailLaw, n: int, seed) -> np.ndarray:
    """Inverse-transform sample of size n. ``seed`` is an int or a Generator."""
    if n < 0:
        raise DomainError("sample size must be nonnegative")
    rng = as_generator(seed)
    if n == 0:
        return np.empty(0)
    if isinstance(law, Mixture):
        return law._sample(n, rng)
    u = 1.0 - rng.random(n)  # in (0, 1]
    u = np.minimum(u, np.nextafter(1.0, 0.0))
    return law.quantile(u)


# ---------------------------------------------------------------- weights

class Weight:
    """Spectral weight on (0, 1] integrating to one. ``kappa`` is the power
    of t governing the behaviour near 0 (w(t) ~ t^kappa up to slowly varying
    factors); the risk of a tail with index gamma is finite iff 1/gamma < kappa + 1."""

    kappa = 0.0

    def __call__(self, t):
        arr, scalar = _as_array(t)
        out = self._value(np.atleast_1d(arr)).reshape(arr.shape)
        return _finish(out, scalar)


@dataclass(frozen=True)
class CVaRWeight(Weight):
    def _value(self, t):
        return np.ones_like(t)


@dataclass(frozen=True)
class PowerWeight(Weight):
    k: float

    def __post_init__(self):
        if self.k <= 0:
            raise DomainError("Power weight needs k > 0")

    @property
    def kappa(self):
        return self.k - 1.0

    def _value(self, t):
        return self.k * t ** (self.k - 1.0)


@dataclass(frozen=True)
class WangWeight(Weight):
    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise DomainError("Wang weight needs lambda >= 0")

    def _value(self, t):
        if self.lam == 0:
            return np.ones_like(t)
        return np.exp(-self.lam * norm_ppf(t) - 0.5 * self.lam ** 2)


@dataclass(frozen=True)
class LogPowerWeight(Weight):
    p: float
    q: float

    def __post_init__(self):
        if self.p <= 0 or self.q <= -1:
            raise DomainError("LogPower weight needs p > 0 and q > -1")

    @property
    def kappa(self):
        return self.p - 1.0

    def _value(self, t):
        logc = (self.q + 1.0) * math.log(self.p) - gammaln(self.q + 1.0)
        with np.errstate(divide="ignore"):
            return np.exp(logc + (self.p - 1.0) * np.log(t) + self.q * np.log(-np.log(t)))


@dataclass(frozen=True)
class BetaWeight(Weight):
    p: float
    q: float

    def __post_init__(self):
        if self.p <= 0 or self.q <= 0:
            raise DomainError("Beta weight needs p > 0 and q > 0")

    @property
    def kappa(self):
        return self.p - 1.0

    def _value(self, t):
        with np.errstate(divide="ignore"):
            return t ** (self.p - 1.0) * (1.0 - t) ** (self.q - 1.0) / beta_fn(self.p, self.q)


@dataclass(frozen=True)
class PolyLogWeight(Weight):
    q: float

    def __post_init__(self):
        if self.q <= -1:
            raise DomainError("PolyLog weight needs q > -1")

    def _value(self, t):
        with np.errstate(divide="ignore"):
            return np.exp(self.q * np.log(-np.log(t)) - gammaln(self.q + 1.0))


def weight_value(w: Weight, t):
    return w(t)


def _log_integral(fun, tol=1e-9, rtol=1e-8, s_max=None, blowup=1e12):
    """Integrate fun(s) over s in [0, inf) on doubling segments.

    Stops once a segment adds less than ``tol`` relative to the running
    total. Raises DivergentIntegral when the running total explodes or the
    segments stop shrinking before ``s_max``.
    """
    edges = [0.0, 0.5]
    total = 0.0
    first = None
    prev_seg = None
    while True:
        lo, hi = edges[-2], edges[-1]
        seg = integrate(fun, lo, hi, rtol=rtol)
        total += seg
        if first is None:
            first = abs(seg) if seg != 0 else 1e-300
        if not math.isfinite(total) or abs(total) > blowup * max(first, 1e-300) * max(1.0, hi):
            raise DivergentIntegral("quadrature blow-up: integrand not integrable")
        if hi >= 2.0 and abs(seg) <= tol * abs(total):
            return total
        avg = abs(seg) / (hi - lo)
        if prev_seg is not None and hi > 64 and avg >= prev_seg:
            raise DivergentIntegral("integrand does not decay: risk measure is infinite")
        prev_seg = avg
        nxt = 2.0 * hi
        if s_max is not None and nxt > s_max:
            if hi >= s_max:
                raise DivergentIntegral("integrand mass beyond representable tail levels")
            nxt = s_max
        edges.append(nxt)


def risk_integral(quantile_fn, w: Weight, beta: float, rtol=1e-8):
    """int_0^1 w(t) q(beta*t) dt with t = exp(-s) for any quantile function."""
    if not 0.0 < beta < 1.0:
        raise DomainError("beta must lie in (0, 1)")
    lb = math.log(beta)
    s_max = 700.0 + lb  # keeps beta*exp(-s) above ~1e-304

    def f(s):
        t = np.exp(-s)
        return w(t) * quantile_fn(np.exp(lb - s)) * t

    return _log_integral(f, rtol=rtol, s_max=s_max)


def risk_measure(law: TailLaw, w: Weight, beta: float) -> float:
    """Tail-weighted risk of ``law`` at level ``beta`` by quantile integration."""
    reg = law.regime
    if reg is not None and reg.heavy and 1.0 / reg.gamma >= w.kappa + 1.0:
        raise DivergentIntegral(
            f"weight exponent {w.kappa} too small for tail index {reg.gamma}")
    return risk_integral(law.quantile, w, beta)


def cvar(law: TailLaw, beta: float) -> float:
    return risk_measure(law, CVaRWeight(), beta)
