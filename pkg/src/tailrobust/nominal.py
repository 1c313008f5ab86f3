"""Nominal laws spliced from a bulk and an extrapolated tail.

Below the splice point v the nominal follows either the data (each
observation weighted 1/n) or an analytic law. Beyond v the tail is
extrapolated from the intermediate level: a power law for heavy tails and a
Weibull-type law for light tails.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTail, DomainError
from .evt import EmpiricalSample, EvtCalibration
from .rng import as_generator
from .tail_models import TailLaw, TailRegime


@dataclass(frozen=True)
class NominalModel:
    kind: str  # "data" or "oracle"
    v: float
    beta0_hat: float
    regime: TailRegime
    bulk_values: np.ndarray | None = field(default=None, repr=False)  # descending, data mode
    bulk_weight: float = 0.0
    bulk_law: TailLaw | None = None

    # tail piece -----------------------------------------------------------
    def _tail_sf(self, x):
        r = x / self.v
        g = self.regime.gamma
        if self.regime.heavy:
            return self.beta0_hat * r ** (-g)
        return np.exp(math.log(self.beta0_hat) * r ** g)

    def _tail_quantile(self, t):
        g = self.regime.gamma
        if self.regime.heavy:
            return self.v * (t / self.beta0_hat) ** (-1.0 / g)
        return self.v * (np.log(t) / math.log(self.beta0_hat)) ** (1.0 / g)

    # public ---------------------------------------------------------------
    def survival(self, x):
        arr = np.asarray(x, dtype=float)
        xs = np.atleast_1d(arr)
        out = np.empty(xs.shape)
        tail = xs >= self.v
        out[tail] = self._tail_sf(xs[tail])
        body = ~tail
        if body.any():
            if self.kind == "oracle":
                out[body] = self.bulk_law.survival(xs[body])
            else:
                asc = self.bulk_values[::-1]
                above = asc.size - np.searchsorted(asc, xs[body], side="right")
                out[body] = np.minimum(self.beta0_hat + above * self.bulk_weight, 1.0)
        return float(out[0]) if arr.ndim == 0 else out

    def quantile(self, t):
        arr = np.asarray(t, dtype=float)
        ts = np.atleast_1d(arr)
        if np.any((ts <= 0) | (ts >= 1)):
            raise DomainError("tail probability must lie in (0, 1)")
        out = np.empty(ts.shape)
        tail = ts <= self.beta0_hat
        out[tail] = self._tail_quantile(ts[tail])
        body = ~tail
        if body.any():
            if self.kind == "oracle":
                out[body] = self.bulk_law.quantile(ts[body])
            else:
                j = np.floor((ts[body] - self.beta0_hat) / self.bulk_weight + 1e-9).astype(int)
                j = np.clip(j, 0, self.bulk_values.size - 1)
                out[body] = self.bulk_values[j]
        return float(out[0]) if arr.ndim == 0 else out

    def sample_tail(self, N: int, seed) -> np.ndarray:
        """N draws from the tail beyond v.

        V = 1 - U is drawn directly on (0, beta0_hat] to avoid cancellation.
        """
        rng = as_generator(seed)
        V = self.beta0_hat * (1.0 - rng.random(N))
        return self.tail_from_levels(V)

    def tail_from_levels(self, V) -> np.ndarray:
        V = np.asarray(V, dtype=float)
        g = self.regime.gamma
        if self.regime.heavy:
            return self.v * (V / self.beta0_hat) ** (-1.0 / g)
        return self.v * (np.log(V) / math.log(self.beta0_hat)) ** (1.0 / g)

    def bulk_atoms(self, n_bulk: int = 2000):
        """Atoms and weights representing the bulk (mass 1 - beta0_hat)."""
        if self.kind == "data":
            z = np.asarray(self.bulk_values, dtype=float)
            return z, np.full(z.size, self.bulk_weight)
        t = self.beta0_hat + (1.0 - self.beta0_hat) * (np.arange(n_bulk) + 0.5) / n_bulk
        z = self.bulk_law.quantile(t)
        return z, np.full(n_bulk, (1.0 - self.beta0_hat) / n_bulk)

    def atoms(self, N: int, seed, n_bulk: int = 2000):
        """Bulk atoms plus N tail draws each weighted beta0_hat / N."""
        zb, wb = self.bulk_atoms(n_bulk)
        zt = self.sample_tail(N, seed)
        return (np.concatenate([zb, zt]),
                np.concatenate([wb, np.full(N, self.beta0_hat / N)]))


def build_nominal(calibration: EvtCalibration, sample) -> NominalModel:
    """Data-mode nominal: empirical bulk up to v, extrapolated tail beyond.

    Each bulk point carries weight 1/n. The tail mass is the fraction of
    observations strictly above v, which equals (k_n - 1)/n without ties and
    the realised exceedance fraction when Z_(k_n) is tied.
    """
    s = sample if isinstance(sample, EmpiricalSample) else EmpiricalSample.from_values(sample)
    if s.n != calibration.n:
        raise DomainError("calibration was computed from a different sample")
    v = calibration.v
    above = int(np.count_nonzero(s.values > v))
    if above == 0:
        raise DegenerateTail("no observations strictly above the splice point")
    bulk = s.values[above:]
    return NominalModel(kind="data", v=v, beta0_hat=above / s.n, regime=calibration.regime,
                        bulk_values=bulk, bulk_weight=1.0 / s.n)


def oracle_nominal(law: TailLaw, beta0: float, regime: TailRegime | None = None) -> NominalModel:
    """Nominal built from a known law: exact below v = VaR(beta0), extrapolated above."""
    if not 0 < beta0 < 1:
        raise DomainError("beta0 must lie in (0, 1)")
    reg = regime if regime is not None else law.regime
    if reg is None:
        raise DomainError("the law has no tail regime; pass one explicitly")
    v = law.quantile(beta0)
    return NominalModel(kind="oracle", v=float(v), beta0_hat=float(beta0), regime=reg, bulk_law=law)


def nominal_quantile(model: NominalModel, t):
    return model.quantile(t)


def nominal_survival(model: NominalModel, x):
    return model.survival(x)


def sample_tail(model: NominalModel, N: int, seed):
    return model.sample_tail(N, seed)
