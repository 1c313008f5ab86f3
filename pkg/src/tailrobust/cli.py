"""Command-line entry point: ``tailrobust <command> [--config FILE] [--seed N] [--out DIR]``.

Each command reads one flat JSON config (keys listed in ``RunConfig``),
applies flag overrides, runs, and writes ``results.csv`` and
``summary.json`` to the output directory. Exit codes: 0 on success, 2 when
any cell failed, 1 on a configuration or input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from . import __version__
from . import harness as hs
from . import robust_eval as rev
from .divergences import ChiSquare, ExpShifted, phi_from_name
from .errors import ConfigError, EmptyData, ParseError, TailRobustError
from .evt import EmpiricalSample, calibrate, regime_test
from .hedging import HedgeConfig
from .network import FactorLaw, NetworkModel, interpolated_exposure, network_loss
from .rng import stream
from .tail_models import (Exponential, GeneralizedPareto, HazardFormula, LognormalStd,
                          ShiftedSurvivalFormula, SurvivalFormula, WeibullType, cvar)

COMMANDS = ("estimate", "robust-cvar", "diagnose", "replicate", "sweep", "windows",
            "network", "hedge", "plot")
CSV_COLUMNS = ("method", "beta", "rep", "value", "status")
SENTINELS = (-99.99, -999.0)

EXIT_OK, EXIT_CONFIG, EXIT_CELL = 0, 1, 2


# ------------------------------------------------------------------ config

class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # data: a loss file, or a synthetic law
    data: str | None = None
    format: Literal["plain", "fama_french"] = "plain"
    sign: Literal["negate", "keep"] = "negate"
    ff_loss: str = "network"
    law: str | None = None
    law_params: list[float] = []
    # protocol
    n: int = 500
    reps: int = 100
    seed: int = 0
    truth: Literal["mc", "analytic"] = "mc"
    n_truth: int = 5_000_000
    betas: list[float] = [0.01]
    methods: list[str] = ["rpev", "chi2_evt", "gaussian_chi2"]
    # method settings shared by all methods
    delta: float = 0.1
    theta: float | None = None
    beta0_cap: float = 0.1
    beta0_power: float = 0.5
    n_tail: int = 10_000
    M: float | None = None  # required by EVT-calibrated methods unless regime is forced
    alpha: float = 0.05
    kappa1: float = 0.5
    regime: Literal["frechet", "gumbel"] | None = None
    batches: int = 0
    p: float = 1.0  # Wasserstein order used by diagnose
    # sweep
    deltas: list[float] = [0.01, 0.05, 0.1]
    thetas: list[float] = [0.3, 0.5, 0.7]
    # rolling windows
    window_n: int = 200
    stride: int = 60
    windows: int = 30
    # network
    net_d: int = 48
    net_K: int = 24
    net_lam: float = 0.0
    net_p: float = 1.0
    net_normalize: bool = True
    net_clamp: bool = False
    copula: Literal["independent", "student_t"] = "student_t"
    dof: float = 4.0
    marginal_alpha: float = 1.0 / 3.0
    marginal_sigma: float = 1.0
    # hedging
    hedge_S0: float = 25.0
    hedge_K: float = 25.0
    hedge_mu: float = 0.1
    hedge_sigma2: float = 0.075
    hedge_r: float = 0.1
    hedge_k1: float = 0.0025
    m_grid: list[int] = [16, 32, 64, 128, 256, 512]
    hedge_reps: int = 1
    # output
    out: str = "results"
    figures: bool = False

    @field_validator("betas")
    @classmethod
    def _betas(cls, v):
        if not v or any(not 0 < b < 1 for b in v):
            raise ValueError("betas must be a nonempty list inside (0, 1)")
        return v

    @field_validator("methods")
    @classmethod
    def _methods(cls, v):
        if not v:
            raise ValueError("at least one method is required")
        for name in v:
            parse_method(name, RunConfig.model_construct(regime="frechet"))
        return v


_LAWS = {
    "gpd": GeneralizedPareto,
    "generalized_pareto": GeneralizedPareto,
    "weibull": WeibullType,
    "exponential": Exponential,
    "survival_formula": SurvivalFormula,
    "shifted_survival_formula": ShiftedSurvivalFormula,
    "hazard_formula": HazardFormula,
    "lognormal": LognormalStd,
}


def build_law(name: str, params):
    key = name.strip().lower()
    if key not in _LAWS:
        raise ConfigError(f"unknown law {name!r}; choose from {sorted(_LAWS)}")
    try:
        return _LAWS[key](*params)
    except (TypeError, TailRobustError) as exc:
        raise ConfigError(f"bad parameters for law {name!r}: {exc}") from exc


_METHOD_RE = re.compile(r"^(?:(?P<rpev>rpev)|(?P<nominal>nominal)|(?P<emp>empirical)"
                        r"|wasserstein_p(?P<p>[0-9.]+|inf)|gaussian_(?P<gphi>.+)|(?P<ephi>.+)_evt)$")


def parse_method(name: str, cfg: RunConfig) -> hs.MethodSpec:
    """Method names: rpev, <phi>_evt, gaussian_<phi>, wasserstein_p<p>, nominal, empirical."""
    m = _METHOD_RE.match(name)
    if not m:
        raise ValueError(f"unknown method {name!r}")
    rule = hs.Beta0Rule(theta=cfg.theta, cap=cfg.beta0_cap, power=cfg.beta0_power)
    common = dict(delta=cfg.delta, beta0=rule, n_tail=cfg.n_tail, M=cfg.M, alpha=cfg.alpha,
                  kappa1=cfg.kappa1, regime=cfg.regime, batches=cfg.batches)
    if m["rpev"]:
        return hs.MethodSpec(name, "rpev", **common)
    if m["nominal"]:
        return hs.MethodSpec(name, "nominal", **common)
    if m["emp"]:
        return hs.MethodSpec(name, "empirical", **common)
    if m["p"]:
        return hs.MethodSpec(name, "wasserstein", p=float(m["p"]), **common)
    phi = m["gphi"] or m["ephi"]
    phi_from_name(phi)  # validate
    kind = "gaussian" if m["gphi"] else "phi_evt"
    return hs.MethodSpec(name, kind, phi=phi, **common)


def load_config(path: str | None, overrides: dict) -> RunConfig:
    raw = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


# ------------------------------------------------------------------ ingest

def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _parse_plain(text: str) -> EmpiricalSample:
    vals = []
    first = True
    for i, line in enumerate(text.splitlines(), start=1):
        tok = line.strip()
        if not tok:
            continue
        if _is_number(tok):
            x = float(tok)
            if not math.isfinite(x):
                raise ParseError(f"non-finite value {tok!r}", i)
            vals.append(x)
        elif first:
            pass  # a single header line
        else:
            raise ParseError(f"not a number: {tok!r}", i)
        first = False
    if not vals:
        raise EmptyData("no losses in file")
    return EmpiricalSample.from_values(vals)


@dataclass(frozen=True)
class FactorTable:
    """Daily factor losses (rows) with their dates and column names."""

    dates: np.ndarray
    columns: tuple
    losses: np.ndarray
    dropped: int


def _parse_fama_french(text: str, sign: str = "negate", n_cols: int = 48) -> FactorTable:
    """First table of a Ken French industry-portfolio CSV (percent returns).

    Lines before the header row (a leading empty field then column names) are
    skipped; the table ends at the first blank or non-date line after data.
    Rows holding a missing-value sentinel are dropped and counted.
    """
    header = None
    dates, rows, dropped = [], [], 0
    for i, line in enumerate(text.splitlines(), start=1):
        parts = [p.strip() for p in next(csv.reader([line]))] if line.strip() else []
        if header is None:
            if len(parts) == n_cols + 1 and parts[0] == "" and not _is_number(parts[1]):
                header = tuple(parts[1:])
            continue
        if not parts or not re.fullmatch(r"\d{6,8}", parts[0]):
            if rows or dropped:
                break
            continue
        if len(parts) != n_cols + 1:
            raise ParseError(f"expected {n_cols + 1} fields, found {len(parts)}", i)
        try:
            vals = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise ParseError(f"non-numeric field ({exc})", i) from exc
        if any(math.isclose(v, s) for v in vals for s in SENTINELS):
            dropped += 1
            continue
        dates.append(parts[0])
        rows.append(vals)
    if header is None:
        raise ParseError("no header row with a date column and factor names found")
    if not rows:
        raise EmptyData("no data rows in the first table")
    X = np.array(rows, dtype=float)
    if sign == "negate":
        X = -X
    return FactorTable(np.array(dates), header, X, dropped)


def ingest_losses(path, format: str = "plain", *, sign: str = "negate", n_cols: int = 48):
    """Read a loss file: ``plain`` gives an EmpiricalSample, ``fama_french`` a FactorTable.

    Plain files hold one loss per line with an optional header line. Fama-French
    returns are in percent; ``sign="negate"`` turns returns into losses (positive
    = loss). Inflation adjustment of published loss data, where relevant, is a
    property of the dataset and is not applied here.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read data file: {exc}") from exc
    if format == "plain":
        return _parse_plain(text)
    if format == "fama_french":
        return _parse_fama_french(text, sign, n_cols)
    raise ConfigError(f"unknown data format {format!r}")


# ----------------------------------------------------------------- helpers

def format_number(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return np.format_float_positional(x, precision=12, unique=False, fractional=False, trim="-")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _versions() -> dict:
    import scipy
    return {"tailrobust": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


@dataclass
class Outcome:
    rows: list
    summary: dict
    failed: bool = False


def write_outputs(out_dir: Path, command: str, cfg: RunConfig, outcome: Outcome) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for method, beta, rep, value, status in outcome.rows:
        w.writerow([method, format_number(beta), rep, format_number(value), status])
    (out_dir / "results.csv").write_text(buf.getvalue())
    doc = {"command": command, "seed": cfg.seed, "config": cfg.model_dump(),
           "versions": _versions(), **outcome.summary}
    (out_dir / "summary.json").write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=False) + "\n")


def _methods(cfg: RunConfig):
    try:
        return [parse_method(m, cfg) for m in cfg.methods]
    except (ValueError, TailRobustError) as exc:
        raise ConfigError(str(exc)) from exc


def _law(cfg: RunConfig):
    if not cfg.law:
        raise ConfigError("this command needs 'law' (and 'law_params')")
    return build_law(cfg.law, cfg.law_params)


def _sample(cfg: RunConfig) -> EmpiricalSample:
    """The dataset for single-sample commands: the data file, or n draws from the law."""
    if cfg.data:
        data = ingest_losses(cfg.data, cfg.format, sign=cfg.sign)
        if isinstance(data, FactorTable):
            return EmpiricalSample.from_values(_factor_losses(data, cfg))
        return data
    return EmpiricalSample.from_values(hs.draw_losses(_law(cfg), cfg.n, stream(cfg.seed, "data", 0)))


def _factor_losses(table: FactorTable, cfg: RunConfig) -> np.ndarray:
    """Scalar losses from a factor table: one named column, or the network loss of all."""
    if cfg.ff_loss == "network":
        d = table.losses.shape[1]
        model = NetworkModel(interpolated_exposure(d, cfg.net_K, cfg.net_lam), p=cfg.net_p,
                             normalize=cfg.net_normalize, clamp_negative=True)
        return network_loss(model, table.losses)
    if cfg.ff_loss not in table.columns:
        raise ConfigError(f"column {cfg.ff_loss!r} not in the factor table")
    return table.losses[:, table.columns.index(cfg.ff_loss)]


def _study_outcome(study: hs.StudyResult, extra: dict | None = None) -> Outcome:
    rows = list(study.records())
    summary = {"summaries": [s.as_dict() for s in study.summaries.values()]}
    if study.truth is not None:
        summary["truth"] = {format_number(b): t for b, t in zip(study.betas, study.truth)}
    summary.update(study.labels and {"labels": study.labels} or {})
    summary.update(extra or {})
    return Outcome(rows, summary, study.any_failed)


def _truth(cfg: RunConfig, source):
    if cfg.truth == "analytic":
        if not hasattr(source, "survival"):
            raise ConfigError("analytic truth needs a univariate law")
        return np.array([cvar(source, b) for b in cfg.betas])
    return None


# ---------------------------------------------------------------- commands

def _require_M(cfg: RunConfig, forced_ok: bool = True):
    if cfg.M is None and not (forced_ok and cfg.regime):
        raise ConfigError("M (index bound for the regime test) must be set in the config")


def cmd_estimate(cfg: RunConfig) -> Outcome:
    _require_M(cfg)
    s = _sample(cfg)
    rows, cals, failed = [], [], False
    for b in cfg.betas:
        rule = hs.Beta0Rule(theta=cfg.theta, cap=cfg.beta0_cap, power=cfg.beta0_power)
        try:
            cal = calibrate(s, beta0=rule.level(s.n, b), M=cfg.M, alpha=cfg.alpha,
                            kappa1=cfg.kappa1, regime=cfg.regime)
            spec = hs.MethodSpec("nominal", "nominal", beta0=rule, M=cfg.M, alpha=cfg.alpha,
                                 kappa1=cfg.kappa1, regime=cfg.regime)
            res = hs.evaluate_method(spec, s, b, None)
            cals.append({"beta": b, "theta": cal.theta, "beta0": cal.beta0, "k_n": cal.k_n,
                         "gamma": cal.gamma, "regime": cal.regime.kind, "v": cal.v,
                         "beta0_hat": cal.beta0_hat, "nominal_cvar": res.value})
            rows.append(("nominal", b, 1, res.value, res.status))
        except TailRobustError as exc:
            failed = True
            cals.append({"beta": b, "error": f"{type(exc).__name__}: {exc}"})
            rows.append(("nominal", b, 1, math.nan, f"{hs.FAILED}:{type(exc).__name__}"))
        rows.append(("empirical", b, 1, rev.sample_cvar(s, b), rev.CONVERGED))
    return Outcome(rows, {"n": s.n, "calibration": cals}, failed)


def cmd_robust_cvar(cfg: RunConfig) -> Outcome:
    s = _sample(cfg)
    methods = _methods(cfg)
    cache = hs._Calibrations(s)
    rows, details, failed = [], [], False
    for m in methods:
        for i, b in enumerate(cfg.betas):
            res = hs.evaluate_method(m, s, b, stream(cfg.seed, "tail", 0, i), cache)
            failed |= res.status.startswith(hs.FAILED) or res.status == rev.NONCONVERGENCE
            rows.append((m.name, b, 1, hs._cell_value(res), res.status))
            details.append({"method": m.name, "beta": b, "value": res.value, "status": res.status,
                            "nominal": res.nominal, "stderr": res.stderr, "optimizer": res.optimizer})
    return Outcome(rows, {"n": s.n, "results": details}, failed)


def cmd_diagnose(cfg: RunConfig) -> Outcome:
    _require_M(cfg, forced_ok=False)
    s = _sample(cfg)
    dec = regime_test(s, M=cfg.M, alpha=cfg.alpha, kappa1=cfg.kappa1)
    preds = {}
    for label, amb in (("chi2", ChiSquare()), ("exp_shifted", ExpShifted()),
                       (f"wasserstein_p{cfg.p:g}", ("wasserstein", cfg.p))):
        try:
            p = rev.inflation_diagnostic(dec.regime, amb)
            preds[label] = {"kind": p.kind, "value": p.value}
        except TailRobustError as exc:
            preds[label] = {"kind": "undefined", "error": str(exc)}
    summary = {"n": s.n, "regime": dec.regime.kind, "gamma": dec.regime.gamma,
               "hill_gamma": dec.hill_gamma, "threshold": dec.threshold, "reject_light": dec.reject,
               "k": dec.k, "M": dec.M, "alpha": dec.alpha, "inflation": preds}
    return Outcome([("hill_gamma", cfg.betas[0], 1, dec.hill_gamma, rev.CONVERGED)], summary)


def cmd_replicate(cfg: RunConfig) -> Outcome:
    law = _law(cfg)
    study = hs.run_replication_study(law, _methods(cfg), cfg.betas, cfg.n, cfg.reps, cfg.seed,
                                     truth=_truth(cfg, law), n_truth=cfg.n_truth)
    return _study_outcome(study)


def cmd_sweep(cfg: RunConfig) -> Outcome:
    law = _law(cfg)
    if len(cfg.betas) != 1:
        raise ConfigError("sweep takes a single beta")
    template = parse_method("rpev", cfg)
    study, cells = hs.run_parameter_sweep(law, cfg.deltas, cfg.thetas, cfg.betas[0], cfg.n, cfg.reps,
                                          cfg.seed, template=template, truth=_truth(cfg, law),
                                          n_truth=cfg.n_truth)
    med = np.array([c.median[0] for c in cells.values()])
    cov = np.array([c.coverage[0] for c in cells.values()])
    extra = {"cells": [{"delta": d, "theta": t, "median": c.median[0], "q1": c.q1[0], "q3": c.q3[0],
                        "coverage": c.coverage[0]} for (d, t), c in cells.items()],
             "min_coverage": float(np.nanmin(cov)), "median_spread": float(np.nanmax(med) / np.nanmin(med))}
    return _study_outcome(study, extra)


def cmd_windows(cfg: RunConfig) -> Outcome:
    if not cfg.data:
        raise ConfigError("windows needs a data file")
    data = ingest_losses(cfg.data, cfg.format, sign=cfg.sign)
    extra = {}
    if isinstance(data, FactorTable):
        x = _factor_losses(data, cfg)
        extra["dropped_rows"] = data.dropped
    else:
        # plain files are read in file order, which is taken as time order
        x = _plain_in_order(cfg.data)
    plan = hs.WindowPlan(N=x.size, n=cfg.window_n, s=cfg.stride, reps=cfg.windows, grid=tuple(cfg.betas))
    study = hs.run_rolling_windows(x, plan, _methods(cfg), cfg.seed)
    extra["benchmark_note"] = "truth holds the full-sample CVaR; windows overlap, quartiles are diagnostics"
    return _study_outcome(study, extra)


def _plain_in_order(path) -> np.ndarray:
    text = Path(path).read_text()
    s = _parse_plain(text)  # validates
    vals = [float(t) for t in (ln.strip() for ln in text.splitlines()) if t and _is_number(t)]
    assert len(vals) == s.n
    return np.array(vals)


def network_source(cfg: RunConfig):
    marg = tuple(GeneralizedPareto(cfg.marginal_alpha, cfg.marginal_sigma) for _ in range(cfg.net_d))
    law = FactorLaw(marg, copula=cfg.copula, dof=cfg.dof)
    model = NetworkModel(interpolated_exposure(cfg.net_d, cfg.net_K, cfg.net_lam), p=cfg.net_p,
                         normalize=cfg.net_normalize, clamp_negative=cfg.net_clamp)
    return law, model


def cmd_network(cfg: RunConfig) -> Outcome:
    source = network_source(cfg)
    study = hs.run_replication_study(source, _methods(cfg), cfg.betas, cfg.n, cfg.reps, cfg.seed,
                                     n_truth=cfg.n_truth)
    return _study_outcome(study)


def cmd_hedge(cfg: RunConfig) -> Outcome:
    hc = HedgeConfig(S0=cfg.hedge_S0, K=cfg.hedge_K, mu=cfg.hedge_mu, sigma2=cfg.hedge_sigma2,
                     r=cfg.hedge_r, k1=cfg.hedge_k1)
    if len(cfg.betas) != 1:
        raise ConfigError("hedge takes a single beta")
    beta = cfg.betas[0]
    n_truth = min(cfg.n_truth, 1_000_000)
    st = hs.hedging_frequency_study(hc, cfg.m_grid, beta, cfg.n, _methods(cfg), cfg.seed,
                                    reps=cfg.hedge_reps, n_truth=n_truth)
    rows, failed = [], False
    for j, m in enumerate(st.m_grid):
        rows.append((f"truth[m={m}]", beta, 1, st.truth[j], rev.CONVERGED))
    for name, V in st.curves.items():
        for j, m in enumerate(st.m_grid):
            for r in range(V.shape[0]):
                status = st.statuses[name][r][j]
                failed |= status.startswith(hs.FAILED) or status == rev.NONCONVERGENCE
                rows.append((f"{name}[m={m}]", beta, r + 1, V[r, j], status))
    summary = {"m_grid": st.m_grid, "truth": st.truth, "truth_argmin": st.truth_argmin,
               "u_shaped": hs.is_u_shaped(st.truth), "argmin": st.argmin, "guarantee": st.guarantee,
               "n_truth": n_truth}
    return Outcome(rows, summary, failed)


def cmd_plot(cfg: RunConfig) -> Outcome:
    raise AssertionError("plot is dispatched separately")


DISPATCH = {"estimate": cmd_estimate, "robust-cvar": cmd_robust_cvar, "diagnose": cmd_diagnose,
            "replicate": cmd_replicate, "sweep": cmd_sweep, "windows": cmd_windows,
            "network": cmd_network, "hedge": cmd_hedge}


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tailrobust", description="Worst-case tail risk evaluation")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="flat JSON config file")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--data", help="loss data file (overrides the config)")
    ap.add_argument("--figures", action="store_true", default=None,
                    help="also render PNG figures from the written results")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                    help="override one config key, e.g. --set reps=20 --set 'betas=[0.01]'")
    return ap


def _overrides(args) -> dict:
    ov = {"seed": args.seed, "out": args.out, "data": args.data, "figures": args.figures}
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            ov[key.strip()] = json.loads(val)
        except json.JSONDecodeError:
            ov[key.strip()] = val
    return ov


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        out = Path(cfg.out)
        if args.command == "plot":
            from .report import render_figures
            paths = render_figures(out)
            for p in paths:
                print(p)
            return EXIT_OK
        outcome = DISPATCH[args.command](cfg)
    except (ConfigError, ParseError, EmptyData, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TailRobustError as exc:
        # an error outside any per-cell guard aborts the run
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CELL
    write_outputs(out, args.command, cfg, outcome)
    if cfg.figures:
        from .report import render_figures
        render_figures(out)
    print(f"wrote {out / 'results.csv'} and {out / 'summary.json'}")
    return EXIT_CELL if outcome.failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
