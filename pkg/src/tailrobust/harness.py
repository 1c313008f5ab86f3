"""Experiment protocols: replication studies, sweeps, rolling windows, hedging.

Every random draw comes from ``rng.stream(seed, ...)`` keyed by its role, so
results do not depend on evaluation order. Within a replication all methods
see the same dataset, and at each target level they also share the tail
draws used to sample the nominal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import robust_eval as rev
from .divergences import ExpShifted, Phi, phi_from_name
from .errors import (DomainError, PlanOverrun, PreconditionViolated, TailRobustError,
                     WorstCaseInfinite)
from .evt import EmpiricalSample, calibrate, regime_test
from .hedging import HedgeConfig, hedging_errors, with_rebalances
from .network import FactorLaw, NetworkModel, pushforward_values
from .nominal import build_nominal
from .rng import stream
from .tail_models import TailLaw
from .tail_models import sample as sample_law

FAILED = "Failed"
METHOD_KINDS = ("rpev", "phi_evt", "gaussian", "wasserstein", "nominal", "empirical")
EVT_KINDS = ("rpev", "phi_evt", "nominal")


# ----------------------------------------------------------------- methods

@dataclass(frozen=True)
class Beta0Rule:
    """Intermediate level: n^-theta when theta is set, else min(cap, beta^power)."""

    theta: float | None = None
    cap: float = 0.1
    power: float = 0.5

    def __post_init__(self):
        if self.theta is not None and not 0 < self.theta < 1:
            raise DomainError("theta must lie in (0, 1)")
        if not 0 < self.cap < 1 or self.power <= 0:
            raise DomainError("beta0 cap must lie in (0, 1) and power must be positive")

    def level(self, n: int, beta: float) -> float:
        if self.theta is not None:
            return float(n) ** (-self.theta)
        return min(self.cap, beta ** self.power)


@dataclass(frozen=True)
class MethodSpec:
    name: str
    kind: str = "rpev"
    delta: float = 0.1
    phi: str = "chi2"  # used by phi_evt and gaussian
    p: float = 1.0  # Wasserstein order
    beta0: Beta0Rule = field(default_factory=Beta0Rule)
    n_tail: int = 10_000
    M: float | None = None  # index bound for the regime test; no default by design
    alpha: float = 0.05
    kappa1: float = 0.5
    regime: str | None = None
    batches: int = 0

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise DomainError(f"unknown method kind {self.kind!r}")
        if self.delta < 0:
            raise DomainError("radius must be nonnegative")
        if self.n_tail < 1:
            raise DomainError("tail sample size must be positive")
        if self.kind in EVT_KINDS and self.regime is None and self.M is None:
            raise DomainError(f"method {self.name!r} needs M (or a forced regime)")

    def divergence(self) -> Phi:
        if self.kind == "rpev":
            return ExpShifted()
        return phi_from_name(self.phi)


def _failed(exc: Exception) -> rev.RobustEvalResult:
    return rev.RobustEvalResult(math.nan, status=f"{FAILED}:{type(exc).__name__}", label=str(exc))


class _Calibrations:
    """Per-dataset cache: the regime decision and calibrations are reused across methods."""

    def __init__(self, sample: EmpiricalSample):
        self.sample = sample
        self._decisions = {}
        self._cals = {}

    def get(self, spec: MethodSpec, beta0: float):
        key = (beta0, spec.M, spec.alpha, spec.kappa1, spec.regime)
        if key not in self._cals:
            decision = None
            if spec.regime is None:
                dkey = (spec.M, spec.alpha)
                if dkey not in self._decisions:
                    # the test itself runs at the default k = floor(sqrt(n))
                    self._decisions[dkey] = regime_test(self.sample, M=spec.M, alpha=spec.alpha,
                                                        kappa1=spec.kappa1)
                decision = self._decisions[dkey]
            self._cals[key] = calibrate(self.sample, beta0=beta0, M=spec.M, alpha=spec.alpha,
                                        kappa1=spec.kappa1, regime=spec.regime, decision=decision)
        return self._cals[key]


def evaluate_method(spec: MethodSpec, sample, beta: float, tail_seed, cache: _Calibrations | None = None,
                    cfg: rev.SolverConfig | None = None) -> rev.RobustEvalResult:
    """One worst-case (or nominal) CVaR value; library errors become a failed result."""
    s = sample if isinstance(sample, EmpiricalSample) else EmpiricalSample.from_values(sample)
    cache = cache or _Calibrations(s)
    try:
        if spec.kind == "empirical":
            v = rev.sample_cvar(s, beta)
            return rev.RobustEvalResult(v, label="empirical", nominal=v)
        if spec.kind == "gaussian":
            return rev.gaussian_phi_cvar(s, beta, delta=spec.delta, phi=spec.divergence(), cfg=cfg)
        if spec.kind == "wasserstein":
            return rev.wasserstein_worst_cvar(s, spec.p, spec.delta, beta)
        beta0 = spec.beta0.level(s.n, beta)
        cal = cache.get(spec, beta0)
        if spec.kind == "nominal":
            model = build_nominal(cal, s)
            v = rev.center_risk(model, beta)
            return rev.RobustEvalResult(v, label="nominal", nominal=v,
                                        optimizer={"gamma": cal.gamma, "regime": cal.regime.kind})
        res = rev.evt_phi_cvar(s, beta, delta=spec.delta, phi=spec.divergence(), beta0=beta0,
                               n_tail=spec.n_tail, seed=tail_seed, batches=spec.batches, cfg=cfg,
                               calibration=cal)
        res.label = spec.name
        return res
    except WorstCaseInfinite:
        return rev.RobustEvalResult(math.inf, status=rev.INFINITE, label=spec.name)
    except TailRobustError as exc:
        return _failed(exc)


# ------------------------------------------------------------ loss sources

def draw_losses(source, n: int, rng) -> np.ndarray:
    """n i.i.d. losses from a tail law, a (factor law, network) pair or a hedging config."""
    if isinstance(source, TailLaw):
        return sample_law(source, n, rng)
    if isinstance(source, HedgeConfig):
        return hedging_errors(source, n, rng)
    if isinstance(source, tuple) and len(source) == 2 and isinstance(source[0], FactorLaw) \
            and isinstance(source[1], NetworkModel):
        return pushforward_values(source[0], source[1], n, rng)
    raise DomainError("loss source must be a TailLaw, (FactorLaw, NetworkModel) or HedgeConfig")


def tail_means(values, betas) -> np.ndarray:
    """Sample CVaR of equally weighted values at each beta, via one partial sort."""
    x = np.asarray(values, dtype=float)
    N = x.size
    betas = np.asarray(betas, dtype=float)
    if N == 0:
        raise DomainError("no values")
    top = int(min(N, math.ceil(float(betas.max()) * N) + 1))
    head = -np.sort(-np.partition(x, N - top)[N - top:])
    csum = np.concatenate([[0.0], np.cumsum(head)])
    out = np.empty(betas.size)
    for i, b in enumerate(betas):
        k = b * N
        j = int(math.floor(k + 1e-9))
        j = min(j, top - 1)
        out[i] = (csum[j] + (k - j) * head[j]) / k
    return out


def ground_truth(source, betas, n_truth: int = 5_000_000, seed=0, chunk: int = 1_000_000) -> np.ndarray:
    """Monte-Carlo CVaR at each beta from n_truth fresh draws."""
    rng = stream(seed, "truth")
    parts = []
    left = n_truth
    while left > 0:
        k = min(chunk, left)
        parts.append(draw_losses(source, k, rng))
        left -= k
    return tail_means(np.concatenate(parts), betas)


# --------------------------------------------------------------- summaries

@dataclass(frozen=True)
class ReplicationSummary:
    """Per-beta summaries of one method. Failed cells are excluded and counted."""

    method: str
    betas: np.ndarray
    median: np.ndarray
    q1: np.ndarray
    q3: np.ndarray
    coverage: np.ndarray
    truth: np.ndarray | None
    reps: int
    failures: np.ndarray
    infinite: np.ndarray

    def as_dict(self) -> dict:
        rows = []
        for i, b in enumerate(self.betas):
            rows.append({"beta": float(b), "median": float(self.median[i]), "q1": float(self.q1[i]),
                         "q3": float(self.q3[i]),
                         "coverage": None if self.truth is None else float(self.coverage[i]),
                         "truth": None if self.truth is None else float(self.truth[i]),
                         "failures": int(self.failures[i]), "infinite": int(self.infinite[i])})
        return {"method": self.method, "reps": self.reps, "per_beta": rows}


def coverage_fraction(values, truth: float) -> float:
    """Fraction of finite-or-infinite (non-nan) estimates at or above the truth."""
    v = np.asarray(values, dtype=float)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return math.nan
    return float(np.mean(v >= truth))


def quartiles(values):
    """(q1, median, q3) with linear interpolation; a quantile touching +inf is +inf."""
    x = np.sort(np.asarray(values, dtype=float))
    out = []
    for q in (0.25, 0.5, 0.75):
        h = (x.size - 1) * q
        lo, hi = int(math.floor(h)), int(math.ceil(h))
        if math.isinf(x[hi]):
            out.append(math.inf)
        else:
            out.append(float(x[lo] + (h - lo) * (x[hi] - x[lo])))
    return tuple(out)


def summarize(method: str, betas, values, truth=None) -> ReplicationSummary:
    """values: (reps, len(betas)) with nan for failures; inf counts as a valid estimate."""
    V = np.asarray(values, dtype=float)
    betas = np.asarray(betas, dtype=float)
    reps = V.shape[0]
    med, lo, hi, cov = (np.full(betas.size, np.nan) for _ in range(4))
    fails = np.isnan(V).sum(axis=0)
    infs = np.isinf(V).sum(axis=0)
    for i in range(betas.size):
        col = V[:, i][~np.isnan(V[:, i])]
        if col.size:
            lo[i], med[i], hi[i] = quartiles(col)
        if truth is not None:
            cov[i] = coverage_fraction(col, truth[i])
    return ReplicationSummary(method, betas, med, lo, hi, cov,
                              None if truth is None else np.asarray(truth, dtype=float),
                              reps, fails, infs)


@dataclass
class StudyResult:
    """Raw values (method -> reps x betas), statuses, truth and per-method summaries."""

    betas: np.ndarray
    values: dict
    statuses: dict
    truth: np.ndarray | None
    summaries: dict
    labels: dict = field(default_factory=dict)  # per-row label, e.g. window or m

    def records(self):
        """Long-format rows (method, beta, rep, value, status) in a fixed order."""
        for name, V in self.values.items():
            S = self.statuses[name]
            for r in range(V.shape[0]):
                for i, b in enumerate(self.betas):
                    yield name, float(b), r + 1, float(V[r, i]), S[r][i]

    @property
    def any_failed(self) -> bool:
        return any(s.startswith(FAILED) or s == rev.NONCONVERGENCE
                   for S in self.statuses.values() for row in S for s in row)


def _cell_value(res: rev.RobustEvalResult) -> float:
    if res.status == rev.INFINITE:
        return math.inf
    return res.value if res.ok else math.nan


def _evaluate_dataset(methods, sample, betas, seed, rep, cfg):
    cache = _Calibrations(sample)
    out = {}
    for m in methods:
        row_v, row_s = [], []
        for i, b in enumerate(betas):
            # tail draws are shared by every method at this (rep, beta)
            res = evaluate_method(m, sample, float(b), stream(seed, "tail", rep, i), cache, cfg)
            row_v.append(_cell_value(res))
            row_s.append(res.status)
        out[m.name] = (row_v, row_s)
    return out


def _check_methods(methods):
    names = [m.name for m in methods]
    if not names:
        raise DomainError("at least one method is required")
    if len(set(names)) != len(names):
        raise DomainError("method names must be unique")


def run_replication_study(source, methods, betas, n: int, reps: int, seed, *,
                          truth=None, n_truth: int = 5_000_000,
                          cfg: rev.SolverConfig | None = None) -> StudyResult:
    """Seeded replications: one dataset per rep, every method at every beta.

    ``truth`` may be given (e.g. analytic) to skip the Monte-Carlo ground truth;
    pass ``n_truth=0`` to skip it altogether (coverage is then undefined).
    """
    if reps < 2:
        raise PreconditionViolated("a replication study needs reps >= 2")
    _check_methods(methods)
    betas = np.asarray(betas, dtype=float)
    if betas.size == 0 or np.any((betas <= 0) | (betas >= 1)):
        raise DomainError("beta grid must be nonempty and inside (0, 1)")
    if truth is None and n_truth > 0:
        truth = ground_truth(source, betas, n_truth, seed)
    values = {m.name: np.empty((reps, betas.size)) for m in methods}
    statuses = {m.name: [] for m in methods}
    for r in range(reps):
        data = EmpiricalSample.from_values(draw_losses(source, n, stream(seed, "data", r)))
        cells = _evaluate_dataset(methods, data, betas, seed, r, cfg)
        for name, (row_v, row_s) in cells.items():
            values[name][r] = row_v
            statuses[name].append(row_s)
    summaries = {name: summarize(name, betas, V, truth) for name, V in values.items()}
    return StudyResult(betas, values, statuses, truth, summaries)


# ------------------------------------------------------------------- sweep

def sweep_cell_name(delta: float, theta: float) -> str:
    return f"rpev[delta={delta:g},theta={theta:g}]"


def run_parameter_sweep(source, deltas, thetas, beta: float, n: int, reps: int, seed, *,
                        template: MethodSpec | None = None, truth=None,
                        n_truth: int = 5_000_000) -> tuple[StudyResult, dict]:
    """RPEV over a (delta, theta) grid; returns the study and a cell -> summary map."""
    deltas, thetas = list(deltas), list(thetas)
    if not deltas or not thetas:
        raise DomainError("sweep grids must be nonempty")
    base = template or MethodSpec("rpev", kind="rpev")
    methods, keys = [], {}
    for d in deltas:
        for t in thetas:
            name = sweep_cell_name(d, t)
            methods.append(replace(base, name=name, delta=float(d), beta0=Beta0Rule(theta=float(t))))
            keys[(float(d), float(t))] = name
    study = run_replication_study(source, methods, [beta], n, reps, seed, truth=truth, n_truth=n_truth)
    return study, {k: study.summaries[v] for k, v in keys.items()}


# ---------------------------------------------------------- rolling windows

@dataclass(frozen=True)
class WindowPlan:
    N: int
    n: int
    s: int
    reps: int
    grid: tuple

    def __post_init__(self):
        if min(self.n, self.s, self.reps) < 1:
            raise DomainError("window size, stride and count must be positive")
        if self.s * self.reps + self.n > self.N:
            raise PlanOverrun(f"s*reps + n = {self.s * self.reps + self.n} exceeds N = {self.N}")
        object.__setattr__(self, "grid", tuple(float(b) for b in self.grid))

    def window(self, k: int) -> slice:
        """0-based slice for window k (1..reps): observations s*k+1 .. s*k+n."""
        if not 1 <= k <= self.reps:
            raise DomainError(f"window {k} out of range 1..{self.reps}")
        return slice(self.s * k, self.s * k + self.n)


def run_rolling_windows(data, plan: WindowPlan, methods, seed,
                        cfg: rev.SolverConfig | None = None) -> StudyResult:
    """Evaluate each method on each window; the truth column holds the full-sample CVaR.

    Coverage here is the fraction of windows at or above the full-sample
    benchmark. Windows overlap, so it is a stability diagnostic only.
    """
    x = np.asarray(data, dtype=float).ravel()
    if x.size != plan.N:
        raise DomainError(f"plan expects N={plan.N} observations, data has {x.size}")
    _check_methods(methods)
    betas = np.asarray(plan.grid, dtype=float)
    bench = np.array([rev.sample_cvar(x, b) for b in betas])
    values = {m.name: np.empty((plan.reps, betas.size)) for m in methods}
    statuses = {m.name: [] for m in methods}
    for k in range(1, plan.reps + 1):
        w = EmpiricalSample.from_values(x[plan.window(k)])
        cells = _evaluate_dataset(methods, w, betas, seed, k, cfg)
        for name, (row_v, row_s) in cells.items():
            values[name][k - 1] = row_v
            statuses[name].append(row_s)
    summaries = {name: summarize(name, betas, V, bench) for name, V in values.items()}
    return StudyResult(betas, values, statuses, bench, summaries,
                       labels={"kind": "window", "diagnostic": True})


# ----------------------------------------------------------------- hedging

@dataclass
class HedgingStudy:
    m_grid: np.ndarray
    beta: float
    truth: np.ndarray
    curves: dict  # method -> (reps, len(m_grid)) worst-case values
    statuses: dict
    argmin: dict  # method -> chosen m
    guarantee: dict  # method -> truth(m_hat) / min truth

    @property
    def truth_argmin(self) -> int:
        return int(self.m_grid[int(np.argmin(self.truth))])


def is_u_shaped(curve) -> bool:
    """True when the curve strictly decreases somewhere before it strictly increases."""
    c = np.asarray(curve, dtype=float)
    j = int(np.argmin(c))
    return 0 < j < c.size - 1 and bool(np.any(np.diff(c[: j + 1]) < 0)) and bool(np.any(np.diff(c[j:]) > 0))


def hedging_frequency_study(cfg: HedgeConfig, m_grid, beta: float, n: int, methods, seed, *,
                            reps: int = 1, n_truth: int = 1_000_000,
                            solver: rev.SolverConfig | None = None) -> HedgingStudy:
    """Truth CVaR of the hedging error per rebalance count, and each method's choice of m.

    For each m and rep a dataset of n hedging errors is simulated; a method's
    curve is its median worst-case value over reps, and its choice m_hat is
    the argmin of that curve.
    """
    grid = np.array(sorted({int(m) for m in m_grid}), dtype=int)
    if grid.size == 0:
        raise DomainError("rebalance grid must be nonempty")
    if reps < 1:
        raise DomainError("reps must be positive")
    _check_methods(methods)
    truth = np.array([tail_means(hedging_errors(with_rebalances(cfg, m), n_truth,
                                                stream(seed, "truth", int(m))), [beta])[0]
                      for m in grid])
    curves = {mm.name: np.empty((reps, grid.size)) for mm in methods}
    statuses = {mm.name: [[None] * grid.size for _ in range(reps)] for mm in methods}
    for j, m in enumerate(grid):
        c = with_rebalances(cfg, m)
        for r in range(reps):
            data = EmpiricalSample.from_values(hedging_errors(c, n, stream(seed, "data", int(m), r)))
            cells = _evaluate_dataset(methods, data, [beta], seed, r * 100_003 + int(m), solver)
            for name, (row_v, row_s) in cells.items():
                curves[name][r, j] = row_v[0]
                statuses[name][r][j] = row_s[0]
    argmin, guarantee = {}, {}
    for name, V in curves.items():
        med = np.array([np.nanmedian(V[:, j]) if np.any(~np.isnan(V[:, j])) else np.nan
                        for j in range(grid.size)])
        if np.all(np.isnan(med)):
            argmin[name], guarantee[name] = None, math.nan
            continue
        j = int(np.nanargmin(med))
        argmin[name] = int(grid[j])
        guarantee[name] = float(truth[j] / truth.min())
    return HedgingStudy(grid, float(beta), truth, curves, statuses, argmin, guarantee)


def default_methods(M: float, delta: float = 0.1, n_tail: int = 10_000) -> list[MethodSpec]:
    """RPEV and the chi-square ball on the same EVT nominal, plus the Gaussian chi-square ball."""
    return [MethodSpec("rpev", "rpev", delta=delta, M=M, n_tail=n_tail),
            MethodSpec("chi2_evt", "phi_evt", delta=delta, phi="chi2", M=M, n_tail=n_tail),
            MethodSpec("gaussian_chi2", "gaussian", delta=delta, phi="chi2")]
