"""Discrete delta hedging of a European call with proportional costs.

The portfolio starts as the cost-free replicating portfolio (option price
split into shares and cash), is rebalanced to the Black-Scholes delta at
t_i = i/m for i = 1..m-1, and carries its last position to maturity. The
loss is the absolute terminal mismatch against the call payoff.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from ._numerics import norm_cdf
from .errors import DomainError
from .rng import as_generator


@dataclass(frozen=True)
class HedgeConfig:
    S0: float = 25.0
    K: float = 25.0
    mu: float = 0.1
    sigma2: float = 0.075
    r: float = 0.1
    k1: float = 0.0025
    m: int = 12
    horizon: float = 1.0

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise DomainError("variance must be positive")
        if self.m < 1 or int(self.m) != self.m:
            raise DomainError("rebalance count must be a positive integer")
        if self.k1 < 0:
            raise DomainError("transaction cost must be nonnegative")
        if self.S0 <= 0 or self.K <= 0 or self.horizon <= 0:
            raise DomainError("prices and horizon must be positive")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def bs_delta(S, K, r, sigma, tau):
    S = np.asarray(S, dtype=float)
    if tau <= 0:
        return (S > K).astype(float)
    d1 = (np.log(S / K) + (r + 0.5 * sigma * sigma) * tau) / (sigma * math.sqrt(tau))
    return norm_cdf(d1)


def bs_call(S, K, r, sigma, tau):
    S = np.asarray(S, dtype=float)
    if tau <= 0:
        return np.maximum(S - K, 0.0)
    sq = sigma * math.sqrt(tau)
    d1 = (np.log(S / K) + (r + 0.5 * sigma * sigma) * tau) / sq
    return S * norm_cdf(d1) - K * math.exp(-r * tau) * norm_cdf(d1 - sq)


def rebalance_cash(cash, S, old, new, growth: float, k1: float):
    """Cash after one period: accrue interest, buy new - old shares, pay k1 per unit traded value."""
    trade = new - old
    return cash * growth - S * trade - k1 * S * np.abs(trade)


def hedging_errors_from_normals(cfg: HedgeConfig, G: np.ndarray) -> np.ndarray:
    """Hedging errors for paths driven by an (n, m) array of N(0,1) increments."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    n, m = G.shape
    if m != cfg.m:
        raise DomainError(f"need {cfg.m} increments per path, got {m}")
    dt = cfg.horizon / m
    sig = cfg.sigma
    growth = math.exp(cfg.r * dt)
    S = np.full(n, float(cfg.S0))
    delta = bs_delta(S, cfg.K, cfg.r, sig, cfg.horizon)
    cash = bs_call(S, cfg.K, cfg.r, sig, cfg.horizon) - delta * S
    # log-moneyness is carried along the path to avoid a log per step
    logm = np.full(n, math.log(cfg.S0 / cfg.K))
    drift = (cfg.mu - 0.5 * cfg.sigma2) * dt
    vol = sig * math.sqrt(dt)
    carry = cfg.r + 0.5 * cfg.sigma2
    steps = np.ascontiguousarray(G.T)
    for i in range(1, m + 1):
        logm += drift + vol * steps[i - 1]
        S = cfg.K * np.exp(logm)
        if i < m:
            tau = cfg.horizon - i * dt
            new = ndtr((logm + carry * tau) / (sig * math.sqrt(tau)))
            cash = rebalance_cash(cash, S, delta, new, growth, cfg.k1)
            delta = new
        else:
            cash = cash * growth
    payoff = np.maximum(S - cfg.K, 0.0)
    return np.abs(payoff - cash - delta * S)


def hedging_errors(cfg: HedgeConfig, n: int, seed, chunk: int = 100_000) -> np.ndarray:
    rng = as_generator(seed)
    parts = []
    left = n
    while left > 0:
        k = min(chunk, left)
        parts.append(hedging_errors_from_normals(cfg, rng.standard_normal((cfg.m, k)).T))
        left -= k
    return np.concatenate(parts) if parts else np.empty(0)


def simulate_hedging_error(cfg: HedgeConfig, seed) -> float:
    """Hedging error of a single simulated path."""
    return float(hedging_errors(cfg, 1, seed)[0])


def with_rebalances(cfg: HedgeConfig, m: int) -> HedgeConfig:
    return replace(cfg, m=int(m))
