"""Worst-case risk over Wasserstein and phi-divergence balls.

The phi-divergence worst-case CVaR is computed from its dual

    F(u, eta, lam) = u + (eta + delta*lam + lam * E[phi*(((Z-u)^+ - eta)/lam)]) / beta,

which is jointly convex. The solver minimises it by nested exact
one-dimensional minimisation: eta from its first-order condition, lam from
the condition that the tilted law exhausts the budget delta, and u from
the condition that the tilted law puts mass beta above u.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._numerics import bracketed_newton, golden_section, norm_ppf
from .divergences import ChiSquare, CressieRead, ExpShifted, KL, Phi, worst_case_finite
from .errors import DomainError, InfeasibleBudget, NonConvergence, PreconditionViolated
from .evt import EmpiricalSample, EvtCalibration, calibrate
from .nominal import NominalModel, build_nominal
from .rng import as_generator
from .tail_models import CVaRWeight, TailLaw, TailRegime, Weight, risk_integral, risk_measure

CONVERGED = "Converged"
INFINITE = "WorstCaseInfinite"
NONCONVERGENCE = "NonConvergence"


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-7
    max_iters: int = 500
    lam_floor: float = 1e-12

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError("solver tolerance must be positive")


@dataclass
class RobustEvalResult:
    value: float
    status: str = CONVERGED
    optimizer: dict = field(default_factory=dict)
    iterations: int = 0
    stderr: float | None = None
    label: str = ""
    nominal: float | None = None

    @property
    def ok(self) -> bool:
        return self.status == CONVERGED


# ------------------------------------------------------------------ atoms

def _atoms(z, w=None):
    z = np.asarray(z.values if isinstance(z, EmpiricalSample) else z, dtype=float).ravel()
    if w is None:
        w = np.full(z.size, 1.0 / z.size)
    else:
        w = np.asarray(w, dtype=float).ravel()
        if w.shape != z.shape:
            raise DomainError("weights and atoms differ in length")
        if np.any(w < 0):
            raise DomainError("weights must be nonnegative")
        tot = w.sum()
        if abs(tot - 1.0) > 1e-8:
            raise DomainError(f"weights sum to {tot}, not 1")
        w = w / tot
    if z.size == 0:
        raise DomainError("empty atom set")
    return z, w


def sample_cvar(z, beta: float, w=None) -> float:
    """Exact CVaR of a discrete law: the mean of its upper beta tail."""
    if not 0 < beta < 1:
        raise DomainError("beta must lie in (0, 1)")
    z, w = _atoms(z, w)
    order = np.argsort(-z, kind="stable")
    zs, ws = z[order], w[order]
    cum = np.cumsum(ws)
    j = int(np.searchsorted(cum, beta * (1 - 1e-14), side="left"))
    j = min(j, zs.size - 1)
    head = float(np.dot(ws[:j], zs[:j]))
    before = float(cum[j - 1]) if j > 0 else 0.0
    return (head + (beta - before) * zs[j]) / beta


def sample_var(z, beta: float, w=None) -> float:
    z, w = _atoms(z, w)
    order = np.argsort(-z, kind="stable")
    cum = np.cumsum(w[order])
    j = min(int(np.searchsorted(cum, beta * (1 - 1e-14), side="left")), z.size - 1)
    return float(z[order][j])


def center_risk(center, beta: float, w: Weight | None = None) -> float:
    """Nominal risk of a law, a nominal model, or a discrete sample."""
    w = w or CVaRWeight()
    if isinstance(center, TailLaw):
        return risk_measure(center, w, beta)
    if isinstance(center, NominalModel):
        return risk_integral(center.quantile, w, beta)
    if isinstance(w, CVaRWeight):
        if isinstance(center, tuple):
            return sample_cvar(center[0], beta, center[1])
        return sample_cvar(center, beta)
    raise DomainError("general weights need an analytic center")


def _center_regime(center) -> TailRegime | None:
    if isinstance(center, (TailLaw, NominalModel)):
        return center.regime
    return None


# -------------------------------------------------------------- Wasserstein

class _UpperSums:
    """O(log N) evaluation of E[(Z - t)^+] via sorted suffix sums."""

    def __init__(self, z, w):
        order = np.argsort(z, kind="stable")
        self.z = z[order]
        wz = w[order] * self.z
        self.sw = np.concatenate([np.cumsum(w[order][::-1])[::-1], [0.0]])
        self.swz = np.concatenate([np.cumsum(wz[::-1])[::-1], [0.0]])

    def excess(self, t):
        i = int(np.searchsorted(self.z, t, side="right"))
        return float(self.swz[i] - t * self.sw[i])


def wasserstein_shift(p: float, delta: float, beta: float) -> float:
    return delta / beta ** (1.0 / p)


def wasserstein_worst_cvar(center, p: float, delta: float, beta: float) -> RobustEvalResult:
    """Closed-form worst-case CVaR over a p-Wasserstein ball.

    The worst case shifts the upper beta-tail by delta / beta^(1/p); for p=1
    the constant shift is one of several optimal couplings.
    """
    if p < 1:
        raise DomainError("Wasserstein order must be >= 1")
    if delta < 0:
        raise DomainError("radius must be nonnegative")
    reg = _center_regime(center)
    if reg is not None and reg.heavy and reg.gamma <= p:
        raise PreconditionViolated(f"heavy center needs tail index > p (got {reg.gamma} <= {p})")
    nom = center_risk(center, beta)
    shift = wasserstein_shift(p, delta, beta)
    return RobustEvalResult(nom + shift, optimizer={"shift": shift}, label="wasserstein", nominal=nom)


def wasserstein_worst_risk(center, w: Weight, p: float, delta: float, beta: float) -> RobustEvalResult:
    """Tail-weighted risk of the shifted-tail law; exact only for CVaR."""
    if isinstance(w, CVaRWeight):
        return wasserstein_worst_cvar(center, p, delta, beta)
    reg = _center_regime(center)
    if reg is not None and reg.heavy and reg.gamma <= p:
        raise PreconditionViolated("heavy center needs tail index > p")
    nom = center_risk(center, beta, w)
    shift = wasserstein_shift(p, delta, beta)
    # integrating quantile + shift against a unit-mass weight adds the shift
    return RobustEvalResult(nom + shift, optimizer={"shift": shift},
                            label="map-induced lower bound", nominal=nom)


def _wass_theta_shift(p, lam):
    return (1.0 - 1.0 / p) / (p * lam) ** (1.0 / (p - 1.0))


def wasserstein_dual_expectation(z, p: float, delta: float, u: float, w=None, _sums=None):
    """inf over lam >= 0 of lam*delta^p + E[(Z - theta(u, lam))^+].

    Returns (value, lam*). For p = 1, lam* = 1 and theta = u.
    """
    if p < 1:
        raise DomainError("Wasserstein order must be >= 1")
    sums = _sums or _UpperSums(*_atoms(z, w))
    if p == 1:
        return delta + sums.excess(u), 1.0
    if delta == 0:
        return sums.excess(u), math.inf
    span = sums.z[-1] - sums.z[0] + abs(u) + 1.0

    def lam_of_shift(c):
        return ((1.0 - 1.0 / p) / c) ** (p - 1.0) / p

    lo = math.log(lam_of_shift(1e4 * span))
    hi = math.log(lam_of_shift(1e-13 * span))

    def f(loglam):
        lam = math.exp(loglam)
        return lam * delta ** p + sums.excess(u - _wass_theta_shift(p, lam))

    x, val, _ = golden_section(f, lo, hi, tol=1e-12)
    return val, math.exp(x)


def wasserstein_dual_cvar(z, p: float, delta: float, beta: float, w=None) -> RobustEvalResult:
    """Numeric solve of inf_u { u + dual_expectation(u) / beta } on atoms."""
    zz, ww = _atoms(z, w)
    sums = _UpperSums(zz, ww)
    shift_max = 2.0 * wasserstein_shift(p, delta, beta) + 1.0
    lo = float(zz.min()) - shift_max
    hi = float(zz.max())

    def F(u):
        return u + wasserstein_dual_expectation(None, p, delta, u, _sums=sums)[0] / beta

    u, val, it = golden_section(F, lo, hi, tol=1e-12)
    return RobustEvalResult(val, optimizer={"u": u}, iterations=it, label="wasserstein-dual")


# ----------------------------------------------------------- phi-divergence

class _Inner:
    """sup of E_P[Y] over the phi-ball for fixed payoffs y >= 0.

    Solved through the dual  min_{eta, lam} eta + delta lam + lam E[phi*((Y-eta)/lam)].
    """

    def __init__(self, phi: Phi, w, delta, cfg: SolverConfig):
        self.phi, self.w, self.delta, self.cfg = phi, w, delta, cfg
        self.count = 0

    # eta from its first-order condition E[phi*'((y-eta)/lam)] = 1 ----------
    def eta(self, y, lam, ymin, ymax):
        phi, w = self.phi, self.w
        self.count += 1
        if isinstance(phi, KL):
            return ymax + lam * math.log(float(np.dot(w, np.exp((y - ymax) / lam))))
        if isinstance(phi, CressieRead):
            p = phi.p
            r = 1.0 / (p - 1.0)
            scale = lam / (p - 1.0)
            if r == 1.0:
                # E[(c + y)^+] = scale, piecewise linear in c
                def fc(c):
                    pos = c + y > 0
                    return float(np.dot(w[pos], c + y[pos])) - scale, float(w[pos].sum())
            else:
                target = scale ** r

                def fc(c):
                    b = np.maximum(c + y, 0.0)
                    pos = b > 0
                    return (float(np.dot(w, b ** r)) - target,
                            float(r * np.dot(w[pos], b[pos] ** (r - 1.0))))
            c = bracketed_newton(fc, -ymax, scale - ymin, xtol=1e-15 * (abs(scale) + ymax + 1e-300),
                                 rtol=1e-15, max_iter=self.cfg.max_iters)
            return scale - c
        if isinstance(phi, ExpShifted):
            target = math.log(lam)

            def fa(a):
                t = a + y
                return float(np.dot(w, np.log(t))) - target, float(np.dot(w, 1.0 / t))

            hi = lam - ymin
            gap = max(lam, 1e-300)
            for _ in range(200):
                lo = -ymin + gap
                if lo < hi and fa(lo)[0] < 0:
                    break
                gap *= 1e-2
                if gap < 1e-300:
                    return lam - (-ymin + 1e-300)
            else:
                raise NonConvergence("eta could not be bracketed")
            a = bracketed_newton(fa, lo, hi, xtol=0.0, rtol=1e-15, max_iter=self.cfg.max_iters)
            return lam - a
        raise DomainError(f"unsupported phi family {phi!r}")

    def probe(self, y, lam, ymin, ymax):
        eta = self.eta(y, lam, ymin, ymax)
        s = (y - eta) / lam
        return eta, s

    def divergence(self, s):
        return float(np.dot(self.w, self.phi.tilted_divergence(s)))

    def solve(self, y, lam_hint=None):
        """Return (value, eta, lam, likelihood ratios)."""
        w, delta = self.w, self.delta
        ymax = float(y.max())
        ymin = float(y.min())
        if ymax - ymin <= 1e-14 * max(1.0, abs(ymax)):
            return ymax, ymax, math.inf, np.ones_like(y)
        if delta == 0:
            return float(np.dot(w, y)), math.nan, math.inf, np.ones_like(y)
        sd = math.sqrt(max(float(np.dot(w, (y - np.dot(w, y)) ** 2)), 1e-300))
        lam0 = lam_hint if lam_hint and math.isfinite(lam_hint) else sd / math.sqrt(2 * delta)
        lam0 = max(lam0, self.cfg.lam_floor)

        def excess(loglam):
            lam = math.exp(loglam)
            _, s = self.probe(y, lam, ymin, ymax)
            d = self.divergence(s)
            return math.log(max(d, 1e-300)) - math.log(delta)

        lo = hi = math.log(lam0)
        f_lo = f_hi = excess(lo)
        floor = math.log(self.cfg.lam_floor)
        boundary = False
        step = math.log(4.0)
        n = 0
        while f_hi > 0:
            lo, f_lo = hi, f_hi
            hi += step
            step *= 1.5
            f_hi = excess(hi)
            n += 1
            if n > 200:
                raise NonConvergence("lambda bracket (upper) not found")
        step = math.log(4.0)
        while f_lo < 0:
            hi, f_hi = lo, f_lo
            lo -= step
            step *= 1.5
            if lo <= floor:
                lo = floor
                f_lo = excess(lo)
                if f_lo <= 0:
                    boundary = True
                break
            f_lo = excess(lo)
            n += 1
            if n > 400:
                raise NonConvergence("lambda bracket (lower) not found")
        if boundary:
            loglam = floor
        elif f_lo == 0:
            loglam = lo
        elif f_hi == 0:
            loglam = hi
        else:
            loglam = brentq(excess, lo, hi, xtol=1e-11, rtol=1e-12, maxiter=self.cfg.max_iters)
        lam = math.exp(loglam)
        eta, s = self.probe(y, lam, ymin, ymax)
        with np.errstate(invalid="ignore"):
            value = eta + delta * lam + lam * float(np.dot(w, self.phi.conjugate(s)))
        if not math.isfinite(value):
            value = math.inf
        return min(value, ymax) if boundary else value, eta, lam, self.phi.conjugate_prime(s)


def phi_dual_cvar(z, phi: Phi, delta: float, beta: float, w=None,
                  cfg: SolverConfig | None = None, regime: TailRegime | None = None) -> RobustEvalResult:
    """Worst-case CVaR over a phi-divergence ball around a discrete law.

    ``z, w`` are atoms and weights (a NominalModel should be turned into atoms
    first, e.g. with ``NominalModel.atoms``). If ``regime`` describes the law
    the atoms stand for and the worst case is provably infinite there, the
    result carries status WorstCaseInfinite without solving.
    """
    cfg = cfg or SolverConfig()
    if not 0 < beta < 1:
        raise DomainError("beta must lie in (0, 1)")
    if delta < 0:
        raise DomainError("radius must be nonnegative")
    if regime is not None and not worst_case_finite(phi, regime):
        return RobustEvalResult(math.inf, status=INFINITE, label=phi.name)
    z, w = _atoms(z, w)
    nom = sample_cvar(z, beta, w)
    zmax = float(z.max())
    if float(z.min()) == zmax:
        return RobustEvalResult(zmax, optimizer={"u": zmax}, label=phi.name, nominal=nom)
    inner = _Inner(phi, w, delta, cfg)
    state = {"lam": None}

    def at(u):
        y = np.maximum(z - u, 0.0)
        G, eta, lam, L = inner.solve(y, state["lam"])
        if math.isfinite(lam):
            state["lam"] = lam
        return G, eta, lam, L

    def slope(u):
        _, _, _, L = at(u)
        return 1.0 - float(np.dot(w[z > u], L[z > u])) / beta

    try:
        u_hi = zmax
        u_lo = sample_var(z, beta, w)
        span = max(zmax - float(z.min()), 1e-12)
        u_lo = u_lo - 1e-12 * span
        g_lo = slope(u_lo)
        k = 0
        while g_lo > 0:
            u_lo -= span * 2.0 ** k
            g_lo = slope(u_lo)
            k += 1
            if k > 60:
                raise NonConvergence("u bracket not found")
        if g_lo == 0:
            u_star = u_lo
        else:
            u_star = brentq(slope, u_lo, u_hi, xtol=1e-13 * max(1.0, abs(zmax)), rtol=1e-15,
                            maxiter=cfg.max_iters)
        G, eta, lam, _ = at(u_star)
        value = u_star + G / beta
    except NonConvergence as exc:
        return RobustEvalResult(math.nan, status=NONCONVERGENCE, label=f"{phi.name}: {exc}",
                                iterations=inner.count, nominal=nom)
    except RuntimeError as exc:  # brentq iteration cap
        return RobustEvalResult(math.nan, status=NONCONVERGENCE, label=f"{phi.name}: {exc}",
                                iterations=inner.count, nominal=nom)
    if not math.isfinite(value):
        return RobustEvalResult(math.inf, status=INFINITE, label=phi.name, nominal=nom,
                                iterations=inner.count)
    return RobustEvalResult(value, optimizer={"u": u_star, "eta": eta, "lam": lam},
                            iterations=inner.count, label=phi.name, nominal=nom)


def phi_dual_objective(z, w, phi: Phi, delta, beta, u, eta, lam) -> float:
    """F(u, eta, lam) evaluated directly (used by tests and diagnostics)."""
    y = np.maximum(np.asarray(z, dtype=float) - u, 0.0)
    s = (y - eta) / lam
    with np.errstate(invalid="ignore"):
        val = u + (eta + delta * lam + lam * float(np.dot(w, phi.conjugate(s)))) / beta
    return val if math.isfinite(val) else math.inf


def phi_primal_cvar(z, phi: Phi, delta: float, beta: float, w=None, starts: int = 3) -> float:
    """Brute-force primal for small atom sets: max CVaR of the tilted law.

    Variables are likelihood ratios L and CVaR weights xi, with
    CVaR(Q) = max {sum xi z : 0 <= xi <= w L / beta, sum xi = 1}; the whole
    problem is a linear objective over a convex set, solved by SLSQP from a
    few starting points. Intended for a handful of atoms only.
    """
    from scipy.optimize import minimize

    z, w = _atoms(z, w)
    m = z.size
    if m > 50:
        raise DomainError("the primal oracle is meant for small atom sets")
    cons = [
        {"type": "eq", "fun": lambda x: np.dot(w, x[:m]) - 1.0, "jac": lambda x: np.r_[w, np.zeros(m)]},
        {"type": "eq", "fun": lambda x: x[m:].sum() - 1.0, "jac": lambda x: np.r_[np.zeros(m), np.ones(m)]},
        {"type": "ineq", "fun": lambda x: w * x[:m] / beta - x[m:],
         "jac": lambda x: np.hstack([np.diag(w / beta), -np.eye(m)])},
        {"type": "ineq", "fun": lambda x: delta - float(np.dot(w, phi.phi(np.maximum(x[:m], 0.0)))),
         "jac": lambda x: np.r_[-w * phi.prime(np.maximum(x[:m], 1e-300)), np.zeros(m)]},
    ]
    bounds = [(0.0, None)] * m + [(0.0, None)] * m
    rng = np.random.default_rng(0)
    best = -math.inf
    for k in range(starts):
        L0 = np.ones(m) if k == 0 else np.clip(1.0 + 0.1 * rng.standard_normal(m), 0.5, 1.5)
        L0 = L0 / np.dot(w, L0)
        xi0 = np.minimum(w * L0 / beta, 1.0)
        xi0 = xi0 / xi0.sum()
        res = minimize(lambda x: -np.dot(x[m:], z), np.r_[L0, xi0], jac=lambda x: np.r_[np.zeros(m), -z],
                       method="SLSQP", bounds=bounds, constraints=cons,
                       options={"ftol": 1e-14, "maxiter": 1000})
        x = res.x
        feasible = (abs(np.dot(w, x[:m]) - 1) < 1e-7 and abs(x[m:].sum() - 1) < 1e-7
                    and np.all(w * x[:m] / beta - x[m:] > -1e-7)
                    and np.dot(w, phi.phi(np.maximum(x[:m], 0.0))) <= delta + 1e-7)
        if feasible:
            best = max(best, float(np.dot(x[m:], z)))
    if not math.isfinite(best):
        raise NonConvergence("primal oracle found no feasible point")
    return best


# ---------------------------------------------------------------- pipelines

def evt_phi_cvar(sample, beta: float, *, delta: float, phi: Phi | None = None,
                 theta: float | None = None, beta0: float | None = None,
                 n_tail: int = 10_000, seed=0, M: float | None = None, alpha: float = 0.05,
                 kappa1: float = 0.5, regime: str | None = None, batches: int = 10,
                 cfg: SolverConfig | None = None,
                 calibration: EvtCalibration | None = None) -> RobustEvalResult:
    """Worst-case CVaR over a phi-ball around the EVT-spliced data nominal.

    Pipeline: regime test and calibration, nominal construction, N tail
    draws, dual minimisation. With ``batches > 1`` the tail draws are split
    into batches, each solved separately, to estimate the Monte-Carlo
    standard error of the full-sample value.
    """
    phi = phi or ExpShifted()
    s = sample if isinstance(sample, EmpiricalSample) else EmpiricalSample.from_values(sample)
    cal = calibration or calibrate(s, theta=theta, beta0=beta0, M=M, alpha=alpha,
                                   kappa1=kappa1, regime=regime)
    model = build_nominal(cal, s)
    rng = as_generator(seed)
    zb, wb = model.bulk_atoms()
    zt = model.sample_tail(n_tail, rng)
    z = np.concatenate([zb, zt])
    w = np.concatenate([wb, np.full(n_tail, model.beta0_hat / n_tail)])
    res = phi_dual_cvar(z, phi, delta, beta, w, cfg=cfg, regime=model.regime)
    res.optimizer.update({"v": model.v, "beta0_hat": model.beta0_hat,
                          "gamma": model.regime.gamma, "regime": model.regime.kind})
    if res.ok and batches and batches > 1 and n_tail >= 2 * batches:
        vals = []
        for chunk in np.array_split(zt, batches):
            zc = np.concatenate([zb, chunk])
            wc = np.concatenate([wb, np.full(chunk.size, model.beta0_hat / chunk.size)])
            r = phi_dual_cvar(zc, phi, delta, beta, wc, cfg=cfg)
            if r.ok:
                vals.append(r.value)
        if len(vals) >= 2:
            res.stderr = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    return res


def rpev_dro_cvar(sample, beta: float, *, delta: float, theta: float | None = None,
                  beta0: float | None = None, n_tail: int = 10_000, seed=0, **kw) -> RobustEvalResult:
    """RPEV-DRO: the EVT nominal with the super-polynomial ExpShifted ball."""
    res = evt_phi_cvar(sample, beta, delta=delta, phi=ExpShifted(), theta=theta, beta0=beta0,
                       n_tail=n_tail, seed=seed, **kw)
    res.label = "rpev"
    return res


def gaussian_atoms(mean: float, sd: float, n_cells: int = 4000):
    """Deterministic discretisation of N(mean, sd^2).

    Probability cells are uniform in the body and log-spaced in both tails
    (down to 1e-14); each atom is the conditional mean of its cell, so the
    discrete law has the exact mean and reaches far into the tails.
    """
    if sd <= 0:
        raise DomainError("sd must be positive")
    half = max(n_cells // 4, 8)
    body = np.linspace(0.0, 0.5, 2 * half + 1)
    tail = np.logspace(-14, math.log10(body[1]), half, endpoint=False)
    p = np.unique(np.concatenate([[0.0], tail, body]))  # lower-half cdf levels
    x = np.concatenate([[-np.inf], norm_ppf(p[1:-1]), [0.0]])
    dens = np.exp(-0.5 * np.where(np.isfinite(x), x, 0.0) ** 2) / math.sqrt(2 * math.pi)
    dens[0] = 0.0
    w = np.diff(p)
    m = (dens[:-1] - dens[1:]) / w  # E[X | cell] for X ~ N(0, 1)
    z = np.concatenate([m, -m[::-1]])
    w = np.concatenate([w, w[::-1]])
    return mean + sd * z, w / w.sum()


def gaussian_phi_cvar(sample, beta: float, *, delta: float, phi: Phi | None = None,
                      n_cells: int = 4000, cfg: SolverConfig | None = None,
                      mean: float | None = None, sd: float | None = None) -> RobustEvalResult:
    """phi-ball worst case around a normal law matched to the sample moments."""
    phi = phi or ChiSquare()
    if mean is None or sd is None:
        x = np.asarray(sample.values if isinstance(sample, EmpiricalSample) else sample, dtype=float)
        mean = float(x.mean()) if mean is None else mean
        sd = float(x.std(ddof=1)) if sd is None else sd
    z, w = gaussian_atoms(mean, sd, n_cells)
    res = phi_dual_cvar(z, phi, delta, beta, w, cfg=cfg)
    res.optimizer.update({"mean": mean, "sd": sd})
    res.label = "gaussian"
    return res


# ------------------------------------------------------ worst-case tail cdf

def _center_sf(center, x):
    if isinstance(center, (TailLaw, NominalModel)):
        return center.survival(x)
    raise DomainError("worst-case survival needs an analytic or nominal center")


def _tilt_excess(phi: Phi, fbar, d, delta):
    """Divergence of the two-point tilt minus delta, and its derivative in d."""
    q = 1.0 - fbar
    inner_d = -fbar * d / q
    val = q * phi.phi_shift(inner_d) + fbar * phi.phi_shift(d) - delta
    der = -fbar * phi.prime(1.0 + inner_d) + fbar * phi.prime(1.0 + d)
    return val, der


def tilt_factor(phi: Phi, fbar, delta: float):
    """Vectorised tilt s >= 1 with (1-F) phi((1-sF)/(1-F)) + F phi(s) = delta.

    Entries without a root on [1, 1/F] are returned as nan.
    """
    f = np.atleast_1d(np.asarray(fbar, dtype=float))
    out = np.full(f.shape, np.nan)
    if delta == 0:
        return np.where((f > 0) & (f < 1), 1.0, np.nan)
    ok = (f > 0) & (f < 1)
    fo = f[ok]
    dmax = 1.0 / fo - 1.0
    top, _ = _tilt_excess(phi, fo, dmax, delta)
    feas = top >= 0
    if feas.any():
        res = np.full(fo.shape, np.nan)
        res[feas] = 1.0 + _solve_tilt(phi, fo[feas], dmax[feas], delta)
        out[ok] = res
    return out


def _solve_tilt(phi, ff, dmax, delta):
    # vectorised safeguarded Newton on d in [0, dmax] keeping per-entry F
    lo = np.zeros_like(ff)
    hi = dmax.copy()
    with np.errstate(over="ignore"):
        x = np.minimum(np.sqrt(2.0 * delta / ff), 0.5 * dmax)
    out = x.copy()
    idx = np.arange(ff.size)
    f_act = ff
    log_delta = math.log(delta)
    for _ in range(300):
        # Newton on log D(d) - log delta: near-linear for exponential growth
        v, g = _tilt_excess(phi, f_act, x, delta)
        with np.errstate(divide="ignore", invalid="ignore"):
            D = v + delta
            v = np.where(D > 0, np.log(D) - log_delta, -np.inf)
            g = g / D
        lo = np.where(v < 0, x, lo)
        hi = np.where(v > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - v / g
        bad = ~np.isfinite(xn) | (xn < lo) | (xn > hi)
        # geometric bisection while the bracket spans orders of magnitude
        floor = np.maximum(lo, 1e-300)
        mid = np.where(hi > 16.0 * floor, np.sqrt(floor * hi), 0.5 * (lo + hi))
        xn = np.where(bad, mid, xn)
        xn = np.where(v == 0, x, xn)
        tol = 1e-14 * np.abs(xn) + 1e-300
        done = (np.abs(xn - x) <= tol) | (v == 0) | (hi - lo <= tol)
        out[idx] = xn
        if done.all():
            return out
        keep = ~done
        idx, x, lo, hi, f_act = idx[keep], xn[keep], lo[keep], hi[keep], f_act[keep]
    raise NonConvergence("worst-case tilt did not converge")


def solve_tilt(phi: Phi, fbar: float, delta: float) -> float:
    """Scalar tilt factor; raises InfeasibleBudget when no root exists."""
    if not 0 < fbar < 1:
        raise DomainError("survival level must lie in (0, 1)")
    s = tilt_factor(phi, fbar, delta)[0]
    if not np.isfinite(s):
        raise InfeasibleBudget("budget exceeds the divergence of any tilt with s*F <= 1")
    return float(s)


def worst_case_survival_from_level(phi: Phi, fbar, delta: float):
    """F_wc as a function of the nominal tail level F (vectorised)."""
    f = np.atleast_1d(np.asarray(fbar, dtype=float))
    out = np.where(f >= 1, 1.0, 0.0).astype(float)
    mid = (f > 0) & (f < 1)
    if mid.any():
        s = tilt_factor(phi, f[mid], delta)
        out[mid] = np.where(np.isfinite(s), np.minimum(s * f[mid], 1.0), 1.0)
    return out


def worst_case_survival(center, phi: Phi, delta: float, x, asymptotic: bool = False):
    """Worst-case P(Z > x) over the phi-ball around ``center``."""
    arr = np.asarray(x, dtype=float)
    f = np.atleast_1d(_center_sf(center, np.atleast_1d(arr)))
    if asymptotic:
        out = np.array([min(phi.inverse_upper(delta / fi) * fi, 1.0) if 0 < fi < 1 else float(fi >= 1)
                        for fi in f])
    else:
        out = worst_case_survival_from_level(phi, f, delta)
    return float(out[0]) if arr.ndim == 0 else out


def _level_for(phi: Phi, t, delta: float):
    """Nominal tail level f with F_wc(f) = t, vectorised by bisection in log f."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if delta == 0:
        return t.copy()
    hi = np.log(t)
    lo = hi - 1.0
    for _ in range(2000):
        wc = worst_case_survival_from_level(phi, np.exp(lo), delta)
        bad = wc >= t
        if not bad.any():
            break
        lo = np.where(bad, lo - 2.0 * (hi - lo), lo)
        if np.any(lo < -740):
            raise NonConvergence("worst-case level below representable range")
    else:
        raise NonConvergence("worst-case level not bracketed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        wc = worst_case_survival_from_level(phi, np.exp(mid), delta)
        above = wc > t
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        if np.all(hi - lo <= 1e-13 * np.maximum(1.0, np.abs(hi))):
            break
    return np.exp(lo)


def worst_case_quantile(center, phi: Phi, delta: float, t):
    """Worst-case VaR at tail level t: the generalised inverse of F_wc."""
    arr = np.asarray(t, dtype=float)
    ts = np.atleast_1d(arr)
    if np.any((ts <= 0) | (ts >= 1)):
        raise DomainError("tail level must lie in (0, 1)")
    f = _level_for(phi, ts, delta)
    x = center.quantile(f)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(x[0]) if arr.ndim == 0 else x


def worst_case_risk(center, phi: Phi, delta: float, beta: float, w: Weight | None = None) -> float:
    """Integral of worst-case quantiles against a spectral weight (CVaR by default)."""
    w = w or CVaRWeight()
    return risk_integral(lambda tt: worst_case_quantile(center, phi, delta, tt), w, beta)


# --------------------------------------------------------------- diagnostics

@dataclass(frozen=True)
class InflationPrediction:
    kind: str  # "log_ratio", "value_ratio" or "infinite"
    value: float


def inflation_diagnostic(regime: TailRegime, ambiguity) -> InflationPrediction:
    """First-order growth of worst-case over nominal risk as beta -> 0.

    ``ambiguity`` is ("wasserstein", p) or a Phi instance.
    """
    if isinstance(ambiguity, tuple) and ambiguity[0] == "wasserstein":
        p = float(ambiguity[1])
        if regime.heavy:
            if regime.gamma <= p:
                raise PreconditionViolated("Wasserstein heavy-tail rate needs gamma > p")
            return InflationPrediction("log_ratio", regime.gamma / p)
        return InflationPrediction("infinite", math.inf)
    if isinstance(ambiguity, Phi):
        g = ambiguity.growth
        if g.kind == "superpolynomial":
            return InflationPrediction("value_ratio", 1.0)
        p = g.p
        if p <= 1:
            if regime.heavy or regime.gamma < 1:
                return InflationPrediction("infinite", math.inf)
            raise PreconditionViolated("no first-order rate for this divergence and regime")
        if regime.heavy:
            return InflationPrediction("log_ratio", p / (p - 1.0))
        return InflationPrediction("value_ratio", (p / (p - 1.0)) ** (1.0 / regime.gamma))
    raise DomainError(f"unknown ambiguity {ambiguity!r}")
