"""PNG figures rendered from a run's results.csv and summary.json."""
from __future__ import annotations

import csv
import json
import re
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ConfigError  # noqa: E402

STYLE = {
    "font.family": "serif",
    "font.size": 8,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (4.2, 3.0),
    "figure.dpi": 150,
    "lines.linewidth": 1.0,
    "lines.markersize": 3,
}


def _float(s: str) -> float:
    return float(s)  # "inf" and "nan" parse as floats


def read_results(path) -> dict:
    """method -> beta -> list of values, in file order."""
    out = defaultdict(lambda: defaultdict(list))
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["method"]][_float(row["beta"])].append(_float(row["value"]))
    return out


def _truth(summary: dict) -> dict:
    t = summary.get("truth")
    if isinstance(t, dict):
        return {float(b): _float(str(v)) for b, v in t.items()}
    return {}


def _band_plot(results, summary, out: Path) -> Path:
    fig, ax = plt.subplots()
    for method, cells in results.items():
        betas = np.array(sorted(cells))
        vals = [np.array(cells[b], dtype=float) for b in betas]
        vals = [v[np.isfinite(v)] for v in vals]
        keep = np.array([v.size > 0 for v in vals])
        if not keep.any():
            continue
        med = np.array([np.median(v) for v, k in zip(vals, keep) if k])
        lo = np.array([np.quantile(v, 0.25) for v, k in zip(vals, keep) if k])
        (line,) = ax.plot(betas[keep], med, marker="o", label=method)
        if any(len(cells[b]) > 1 for b in betas):
            ax.fill_between(betas[keep], lo, med, color=line.get_color(), alpha=0.2, lw=0)
    truth = _truth(summary)
    if truth:
        tb = np.array(sorted(truth))
        ax.plot(tb, [truth[b] for b in tb], color="k", lw=1.5, label="truth")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("tail level beta")
    ax.set_ylabel("CVaR")
    ax.legend(frameon=False)
    fig.tight_layout()
    path = out / "cvar_vs_beta.png"
    fig.savefig(path)
    plt.close(fig)
    return path


def _hedge_plot(results, summary, out: Path) -> Path:
    curves = defaultdict(dict)
    for name, cells in results.items():
        m = re.fullmatch(r"(.+)\[m=(\d+)\]", name)
        if not m:
            continue
        vals = np.array([v for vs in cells.values() for v in vs], dtype=float)
        vals = vals[np.isfinite(vals)]
        if vals.size:
            curves[m.group(1)][int(m.group(2))] = float(np.median(vals))
    fig, ax = plt.subplots()
    for name, pts in curves.items():
        ms = sorted(pts)
        style = dict(color="k", lw=1.5) if name == "truth" else dict(marker="o")
        ax.plot(ms, [pts[m] for m in ms], label=name, **style)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("rebalances m")
    ax.set_ylabel("CVaR of hedging error")
    ax.legend(frameon=False)
    fig.tight_layout()
    path = out / "cvar_vs_rebalances.png"
    fig.savefig(path)
    plt.close(fig)
    return path


def render_figures(out_dir) -> list[Path]:
    """Render the figures that fit the run in ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    res_path, sum_path = out / "results.csv", out / "summary.json"
    if not res_path.exists() or not sum_path.exists():
        raise ConfigError(f"{out} holds no results.csv/summary.json to plot")
    results = read_results(res_path)
    summary = json.loads(sum_path.read_text())
    with plt.rc_context(STYLE):
        if summary.get("command") == "hedge":
            return [_hedge_plot(results, summary, out)]
        return [_band_plot(results, summary, out)]
