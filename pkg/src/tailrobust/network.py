"""Loss of a financial network driven by asset-level risk factors."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg
from scipy.stats import t as student_t

from .errors import DimensionMismatch, DomainError, SingularSystem
from .evt import EmpiricalSample
from .rng import as_generator
from .tail_models import TailLaw


def interpolated_exposure(d: int, K: int, lam: float) -> np.ndarray:
    """(1 - lam) * block-diagonal ownership + lam * uniform ownership (1/K)."""
    if d < 1 or K < 1 or d % K:
        raise DimensionMismatch(f"asset count {d} is not a multiple of firm count {K}")
    if not 0.0 <= lam <= 1.0:
        raise DomainError("interpolation weight must lie in [0, 1]")
    q = d // K
    A0 = np.kron(np.eye(K), np.ones((1, q)))
    return (1.0 - lam) * A0 + lam * np.full((K, d), 1.0 / K)


@dataclass(frozen=True, eq=False)
class NetworkModel:
    A: np.ndarray
    C: np.ndarray | None = None
    p: float = 1.0
    normalize: bool = True
    clamp_negative: bool = False

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2:
            raise DimensionMismatch("exposure matrix must be two-dimensional")
        if np.any(A < 0) or np.any(A > 1):
            raise DomainError("exposure entries must lie in [0, 1]")
        K = A.shape[0]
        C = np.zeros((K, K)) if self.C is None else np.array(self.C, dtype=float)
        if C.shape != (K, K):
            raise DimensionMismatch(f"cross-holdings must be {K}x{K}")
        if np.any(C < 0):
            raise DomainError("cross-holdings must be nonnegative")
        if np.any(C.sum(axis=0) > 1.0 + 1e-12):
            raise DomainError("cross-holding column sums must not exceed 1")
        if not (self.p >= 1):
            raise DomainError("norm order must be >= 1")
        A.setflags(write=False)
        C.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def K(self) -> int:
        return self.A.shape[0]

    @cached_property
    def transfer(self) -> np.ndarray:
        """C_hat (I - C)^-1 A, the map from factors to firm losses."""
        K = self.K
        c_hat = np.diag(1.0 - self.C.sum(axis=0))
        try:
            lu = linalg.lu_factor(np.eye(K) - self.C, check_finite=True)
        except (linalg.LinAlgError, ValueError) as exc:
            raise SingularSystem(str(exc)) from exc
        if np.any(np.abs(np.diag(lu[0])) < 1e-14):
            raise SingularSystem("I - C is singular")
        return c_hat @ linalg.lu_solve(lu, self.A)


def network_loss(model: NetworkModel, z) -> np.ndarray | float:
    """||C_hat (I-C)^-1 A z||_p (over d if normalised); z may be (d,) or (n, d)."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    if Z.shape[1] != model.d:
        raise DimensionMismatch(f"factor vector has length {Z.shape[1]}, expected {model.d}")
    if model.clamp_negative:
        Z = np.maximum(Z, 0.0)
    F = Z @ model.transfer.T
    if math.isinf(model.p):
        out = np.max(np.abs(F), axis=1)
    else:
        out = np.linalg.norm(F, ord=model.p, axis=1)
    if model.normalize:
        out = out / model.d
    return float(out[0]) if single else out


@dataclass(frozen=True, eq=False)
class FactorLaw:
    """Marginals joined by an independent or Student-t copula."""

    marginals: tuple
    copula: str = "independent"  # or "student_t"
    dof: float = 4.0
    correlation: np.ndarray | None = None

    def __post_init__(self):
        margs = tuple(self.marginals)
        if not margs or not all(isinstance(m, TailLaw) for m in margs):
            raise DomainError("marginals must be a nonempty sequence of tail laws")
        object.__setattr__(self, "marginals", margs)
        if self.copula not in ("independent", "student_t"):
            raise DomainError(f"unknown copula {self.copula!r}")
        d = len(margs)
        if self.copula == "student_t":
            if self.dof <= 0:
                raise DomainError("degrees of freedom must be positive")
            R = np.eye(d) if self.correlation is None else np.array(self.correlation, dtype=float)
            if R.shape != (d, d) or not np.allclose(R, R.T) or not np.allclose(np.diag(R), 1.0):
                raise DomainError("correlation must be symmetric with unit diagonal")
            if np.linalg.eigvalsh(R).min() < -1e-10:
                raise DomainError("correlation must be positive semidefinite")
            object.__setattr__(self, "correlation", R)

    @property
    def d(self) -> int:
        return len(self.marginals)

    def uniform_tails(self, n: int, rng) -> np.ndarray:
        """(n, d) array of marginal tail probabilities 1 - U."""
        d = self.d
        if self.copula == "independent":
            return 1.0 - rng.random((n, d))
        R = self.correlation
        if np.allclose(R, np.eye(d)):
            G = rng.standard_normal((n, d))
        else:
            w, V = np.linalg.eigh(R)
            G = rng.standard_normal((n, d)) @ (V * np.sqrt(np.maximum(w, 0.0))).T
        chi = rng.chisquare(self.dof, size=(n, 1))
        T = G / np.sqrt(chi / self.dof)
        return student_t.sf(T, self.dof)


def sample_factors(law: FactorLaw, n: int, seed) -> np.ndarray:
    rng = as_generator(seed)
    V = law.uniform_tails(n, rng)
    out = np.empty_like(V)
    tiny = np.nextafter(0.0, 1.0)
    V = np.clip(V, tiny, 1.0 - 1e-16)
    for j, m in enumerate(law.marginals):
        out[:, j] = m.quantile(V[:, j])
    return out


def pushforward_values(law: FactorLaw, model: NetworkModel, n: int, seed, chunk: int = 200_000):
    """Unsorted losses L(xi_i) for n factor draws, generated in chunks."""
    if law.d != model.d:
        raise DimensionMismatch("factor law and network disagree on asset count")
    if n < 0:
        raise DomainError("n must be nonnegative")
    rng = as_generator(seed)
    parts = []
    left = n
    while left > 0:
        m = min(chunk, left)
        parts.append(network_loss(model, sample_factors(law, m, rng)))
        left -= m
    return np.concatenate(parts) if parts else np.empty(0)


def pushforward_losses(law: FactorLaw, model: NetworkModel, n: int, seed, chunk: int = 200_000):
    """n losses as a descending EmpiricalSample."""
    return EmpiricalSample.from_values(pushforward_values(law, model, n, seed, chunk))
