"""phi-divergence generators with closed-form convex conjugates.

Each family is a convex phi on [0, inf) with phi(1) = phi'(1) = 0. The
conjugate phi*(s) = sup_t {s t - phi(t)} is taken over t >= 0 (likelihood
ratios are nonnegative), except for ExpShifted whose conjugate is kept in the
closed form (1+s) log(1+s) on s > -1 used by the tail-sampled dual objective.

Notes per family on the s-branch affected by the t >= 0 restriction:

* CressieRead(p) and ChiSquare: phi*(s) = -1/p for s < -1/(p-1).
* KL: the unrestricted maximiser t = e^s is already positive; no change.
* ExpShifted: +inf for s < -1 and 0 at s = -1 (lower-semicontinuous closure).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._numerics import bracketed_newton
from .errors import DomainError, NonConvergence
from .tail_models import TailRegime


@dataclass(frozen=True)
class GrowthClass:
    kind: str  # "polynomial": phi in RV(p); "superpolynomial": log(phi) in RV(p)
    p: float


def _arr(x):
    a = np.asarray(x, dtype=float)
    return np.atleast_1d(a), a.ndim == 0


def _out(v, scalar):
    return float(v[0]) if scalar else v


class Phi:
    name = "phi"

    # scalar/array wrappers ------------------------------------------------
    def phi(self, t):
        t, sc = _arr(t)
        if np.any(t < 0):
            raise DomainError("phi is defined for t >= 0 only")
        return _out(self._phi(t), sc)

    def phi_shift(self, d):
        """phi(1 + d), accurate for small |d|."""
        d, sc = _arr(d)
        return _out(self._phi_shift(d), sc)

    def prime(self, t):
        t, sc = _arr(t)
        return _out(self._prime(t), sc)

    def second(self, t):
        t, sc = _arr(t)
        return _out(self._second(t), sc)

    def conjugate(self, s):
        s, sc = _arr(s)
        return _out(self._conj(s), sc)

    def conjugate_prime(self, s):
        """Maximiser t*(s) of s t - phi(t): the tilted likelihood ratio."""
        s, sc = _arr(s)
        return _out(self._conj_prime(s), sc)

    def conjugate_second(self, s):
        s, sc = _arr(s)
        return _out(self._conj_second(s), sc)

    def tilted_divergence(self, s):
        """phi(t*(s)) = s t*(s) - phi*(s), the divergence contributed by a probe."""
        s, sc = _arr(s)
        with np.errstate(invalid="ignore"):
            val = s * self._conj_prime(s) - self._conj(s)
        return _out(val, sc)

    def _phi_shift(self, d):
        return self._phi(1.0 + d)

    def inverse_upper(self, y: float) -> float:
        """The unique t >= 1 with phi(t) = y."""
        y = float(y)
        if y < 0:
            raise DomainError("inverse_upper needs y >= 0")
        if y == 0:
            return 1.0
        shift = lambda d: float(self._phi_shift(np.array([d]))[0])
        slope = lambda d: float(self._prime(np.array([1.0 + d]))[0])
        lo = 0.0
        if y <= 1.0:
            # sqrt(2 phi(1+d)) is close to linear in d near 0
            target = math.sqrt(2.0 * y)

            def g(d):
                val = math.sqrt(2.0 * shift(d))
                return val - target, (slope(d) / val if val > 0 else 1.0)
        else:
            # log phi keeps fast-growing families in range
            target = math.log(y)
            lo = 1e-3  # phi(1.001) < 1 for every family

            def g(d):
                val = shift(d)
                return math.log(val) - target, slope(d) / val

        hi = 1.0
        for _ in range(2000):
            if g(hi)[0] >= 0:
                break
            hi *= 2.0
        else:
            raise NonConvergence("inverse_upper could not bracket the root")
        with np.errstate(over="ignore"):
            d = bracketed_newton(g, lo, hi, xtol=0.0, rtol=1e-14, max_iter=200)
        return 1.0 + d

    def __repr__(self):
        return self.name


class CressieRead(Phi):
    """phi(t) = (t^p - 1 - p(t-1)) / (p(p-1)), regularly varying with index p."""

    def __init__(self, p: float):
        if not p > 1:
            raise DomainError("Cressie-Read family needs p > 1")
        self.p = float(p)
        self.name = f"cressie_read({self.p:g})"

    def __eq__(self, other):
        return type(other) is type(self) and other.p == self.p

    def __hash__(self):
        return hash((type(self).__name__, self.p))

    @property
    def growth(self):
        return GrowthClass("polynomial", self.p)

    def _phi(self, t):
        p = self.p
        return (t ** p - 1.0 - p * (t - 1.0)) / (p * (p - 1.0))

    def _phi_shift(self, d):
        p = self.p
        out = self._phi(1.0 + d)
        small = np.abs(d) < 1e-3
        if small.any():
            ds = d[small]
            c2 = 0.5
            c3 = (p - 2.0) / 6.0
            c4 = (p - 2.0) * (p - 3.0) / 24.0
            out[small] = ds * ds * (c2 + ds * (c3 + ds * c4))
        return out

    def _prime(self, t):
        return (t ** (self.p - 1.0) - 1.0) / (self.p - 1.0)

    def _second(self, t):
        return t ** (self.p - 2.0)

    def _base(self, s):
        return 1.0 + (self.p - 1.0) * s

    def _conj(self, s):
        b = self._base(s)
        pos = b > 0
        out = np.full(s.shape, -1.0 / self.p)
        out[pos] = (b[pos] ** (self.p / (self.p - 1.0)) - 1.0) / self.p
        return out

    def _conj_prime(self, s):
        b = self._base(s)
        return np.where(b > 0, np.maximum(b, 0.0) ** (1.0 / (self.p - 1.0)), 0.0)

    def _conj_second(self, s):
        b = self._base(s)
        with np.errstate(divide="ignore"):
            return np.where(b > 0, np.maximum(b, 1e-300) ** ((2.0 - self.p) / (self.p - 1.0)), 0.0)


class ChiSquare(CressieRead):
    """phi(t) = (t-1)^2 / 2."""

    def __init__(self):
        super().__init__(2.0)
        self.name = "chi_square"

    def _phi(self, t):
        return 0.5 * (t - 1.0) ** 2

    def _phi_shift(self, d):
        with np.errstate(over="ignore"):
            return 0.5 * d * d

    def _conj(self, s):
        return np.where(s >= -1.0, s + 0.5 * s * s, -0.5)

    def _conj_prime(self, s):
        return np.maximum(1.0 + s, 0.0)

    def _conj_second(self, s):
        return np.where(s > -1.0, 1.0, 0.0)

    def inverse_upper(self, y):
        if y < 0:
            raise DomainError("inverse_upper needs y >= 0")
        return 1.0 + math.sqrt(2.0 * y)


class KL(Phi):
    """phi(t) = t log t - t + 1."""

    name = "kl"

    def __eq__(self, other):
        return type(other) is type(self)

    def __hash__(self):
        return hash("kl")

    @property
    def growth(self):
        return GrowthClass("polynomial", 1.0)

    def _phi(self, t):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)) - t + 1.0, 1.0)

    def _phi_shift(self, d):
        out = self._phi(1.0 + d)
        small = np.abs(d) < 1e-3
        ds = d[small]
        out[small] = ds * ds * (0.5 + ds * (-1.0 / 6.0 + ds / 12.0))
        return out

    def _prime(self, t):
        with np.errstate(divide="ignore"):
            return np.log(t)

    def _second(self, t):
        with np.errstate(divide="ignore"):
            return 1.0 / t

    def _conj(self, s):
        return np.expm1(s)

    def _conj_prime(self, s):
        return np.exp(s)

    def _conj_second(self, s):
        return np.exp(s)


class ExpShifted(Phi):
    """phi(t) = exp(t-1) - t; log(phi) is regularly varying with index 1."""

    name = "exp_shifted"

    def __eq__(self, other):
        return type(other) is type(self)

    def __hash__(self):
        return hash("exp_shifted")

    @property
    def growth(self):
        return GrowthClass("superpolynomial", 1.0)

    def _phi(self, t):
        with np.errstate(over="ignore"):
            return np.exp(t - 1.0) - t

    def _phi_shift(self, d):
        with np.errstate(over="ignore"):
            out = np.expm1(d) - d
        small = np.abs(d) < 1e-3
        ds = d[small]
        out[small] = ds * ds * (0.5 + ds * (1.0 / 6.0 + ds / 24.0))
        return out

    def _prime(self, t):
        with np.errstate(over="ignore"):
            return np.expm1(t - 1.0)

    def _second(self, t):
        with np.errstate(over="ignore"):
            return np.exp(t - 1.0)

    def _conj(self, s):
        out = np.full(s.shape, np.inf)
        inside = s > -1.0
        a = 1.0 + s[inside]
        out[inside] = a * np.log(a)
        out[s == -1.0] = 0.0
        return out

    def _conj_prime(self, s):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(s >= -1.0, 1.0 + np.log1p(np.maximum(s, -1.0)), np.nan)

    def _conj_second(self, s):
        with np.errstate(divide="ignore"):
            return np.where(s > -1.0, 1.0 / (1.0 + np.maximum(s, -1.0 + 1e-300)), np.inf)

    def tilted_divergence(self, s):
        s, sc = _arr(s)
        # s t* - phi* = s - log(1+s) for s > -1
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(s > -1.0, s - np.log1p(np.maximum(s, -1.0 + 1e-300)), np.inf)
        small = np.abs(s) < 1e-4
        ss = s[small]
        val[small] = ss * ss * (0.5 - ss / 3.0 + ss * ss / 4.0)
        return _out(val, sc)


def phi(spec: Phi, t):
    return spec.phi(t)


def phi_conjugate(spec: Phi, s):
    return spec.conjugate(s)


def phi_second(spec: Phi, t):
    return spec.second(t)


def phi_inverse_upper(spec: Phi, y: float) -> float:
    return spec.inverse_upper(y)


FAMILIES = {
    "chi_square": ChiSquare,
    "chi2": ChiSquare,
    "kl": KL,
    "exp_shifted": ExpShifted,
}


def phi_from_name(name: str) -> Phi:
    """Parse 'chi_square', 'kl', 'exp_shifted' or 'cressie_read(p)'."""
    key = name.strip().lower()
    if key in FAMILIES:
        return FAMILIES[key]()
    if key.startswith("cressie_read(") and key.endswith(")"):
        return CressieRead(float(key[len("cressie_read("):-1]))
    raise DomainError(f"unknown phi family {name!r}")


def worst_case_finite(spec: Phi, regime: TailRegime | None) -> bool:
    """Whether the worst-case CVaR over a phi-ball around a nominal in
    ``regime`` is finite.

    The worst case is finite iff E[phi*(c Z)] < inf for some c > 0:
    KL needs exponential moments (Gumbel with index >= 1), Cressie-Read(p)
    needs moments of order p/(p-1), ExpShifted needs E[Z log Z].
    """
    if regime is None:
        return True
    g = regime.gamma
    if regime.heavy:
        if g <= 1.0:
            return False
        if isinstance(spec, KL):
            return False
        if isinstance(spec, CressieRead):
            return g > spec.p / (spec.p - 1.0)
        return True
    if isinstance(spec, KL):
        return g >= 1.0
    return True
