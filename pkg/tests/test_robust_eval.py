import math

import numpy as np
import pytest
from scipy.optimize import linprog
from scipy.stats import norm

from tailrobust.divergences import ChiSquare, ExpShifted, KL, CressieRead
from tailrobust.errors import PreconditionViolated
from tailrobust.evt import EmpiricalSample, calibrate
from tailrobust.nominal import build_nominal, oracle_nominal
from tailrobust.rng import stream
from tailrobust.robust_eval import (center_risk, evt_phi_cvar, gaussian_atoms, inflation_diagnostic,
                                    phi_dual_cvar, phi_primal_cvar, rpev_dro_cvar, sample_cvar,
                                    wasserstein_dual_cvar, wasserstein_dual_expectation,
                                    wasserstein_worst_cvar, worst_case_quantile, worst_case_survival)
from tailrobust.tail_models import (Exponential, GeneralizedPareto, SurvivalFormula, TailRegime,
                                    WeibullType, cvar, sample)

pytest.importorskip("cvxpy")
from oracles import cvxpy_primal  # noqa: E402


# ---------------------------------------------------------------- oracles

def coupling_lp(z, w, p, delta, u, grid):
    """sup of E_Q[(Z - u)^+] over couplings of the atoms onto a destination grid with cost <= delta^p."""
    n, g = z.size, grid.size
    cost = np.abs(grid[None, :] - z[:, None]) ** p
    gain = np.maximum(grid - u, 0.0)
    c = -np.tile(gain, n)
    A_eq = np.zeros((n, n * g))
    for i in range(n):
        A_eq[i, i * g:(i + 1) * g] = 1.0
    res = linprog(c, A_ub=cost.ravel()[None, :], b_ub=[delta ** p], A_eq=A_eq, b_eq=w,
                  bounds=(0, None), method="highs")
    return -res.fun


# ----------------------------------------------------------------- sample CVaR

def test_sample_cvar_examples():
    assert sample_cvar([1, 2, 3, 4], 0.5) == pytest.approx(3.5)
    assert sample_cvar([0.0, 10.0], 0.01, [0.99, 0.01]) == pytest.approx(10.0)
    assert sample_cvar([7.0], 0.3) == pytest.approx(7.0, rel=1e-15)


def test_sample_cvar_matches_sorted_mean():
    z = sample(Exponential(), 10_000, 2)
    top = np.sort(z)[::-1][:100]
    assert sample_cvar(z, 0.01) == pytest.approx(top.mean(), rel=1e-12)


# ------------------------------------------------------------------ Wasserstein

def test_wasserstein_exponential_hand_value():
    r = wasserstein_worst_cvar(Exponential(), 1.0, 0.1, 0.01)
    assert r.value == pytest.approx(1 + math.log(100) + 10, abs=5e-6)
    assert round(r.value, 5) == 15.60517
    assert wasserstein_worst_cvar(Exponential(), 2.0, 0.0, 0.01).value == pytest.approx(cvar(Exponential(), 0.01))


def test_wasserstein_heavy_precondition():
    with pytest.raises(PreconditionViolated):
        wasserstein_worst_cvar(GeneralizedPareto(0.5, 1.0), 2.0, 0.1, 0.01)


def test_dual_expectation_limits():
    z = np.array([0.5, 1.0, 2.0, 4.0])
    plus = float(np.mean(np.maximum(z - 1.5, 0)))
    assert wasserstein_dual_expectation(z, 1.0, 0.3, 1.5)[0] == pytest.approx(0.3 + plus, rel=1e-14)
    assert wasserstein_dual_expectation(z, 2.0, 0.0, 1.5)[0] == pytest.approx(plus, rel=1e-14)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_dual_expectation_matches_grid_coupling(p):
    z, w = np.array([1.0, 3.0]), np.array([0.6, 0.4])
    grid = np.linspace(0.0, 6.0, 3001)
    cases = [(0.2, 2.0), (0.5, 0.5), (0.1, 2.5)]
    if p > 1:
        # for p = 1 with every atom below u the supremum is only reached in the limit
        # of vanishing mass sent to infinity, which a bounded grid cannot represent
        cases.append((0.1, 3.5))
    for delta, u in cases:
        dual = wasserstein_dual_expectation(z, p, delta, u, w)[0]
        assert dual == pytest.approx(coupling_lp(z, w, p, delta, u, grid), abs=1e-3)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_closed_form_matches_dual_on_sample(p):
    z = sample(GeneralizedPareto(1 / 3, 1.0), 20_000, 9)
    closed = wasserstein_worst_cvar(z, p, 0.05, 0.01).value
    assert wasserstein_dual_cvar(z, p, 0.05, 0.01).value == pytest.approx(closed, rel=0.01)


# ----------------------------------------------------------------- phi dual

def test_five_atom_chi_square_against_convex_primal():
    z = np.array([0.3, 1.1, 2.0, 3.7, 6.0])
    w = np.array([0.3, 0.25, 0.2, 0.15, 0.1])
    dual = phi_dual_cvar(z, ChiSquare(), 0.05, 0.2, w).value
    assert dual == pytest.approx(cvxpy_primal(z, w, ChiSquare(), 0.05, 0.2), abs=1e-4)


@pytest.mark.parametrize("phi", [ChiSquare(), ExpShifted(), KL()], ids=lambda f: f.name)
def test_random_small_centers_against_convex_primal(phi):
    rng = stream(5, "small", phi.name)
    for _ in range(8):
        n = int(rng.integers(3, 7))
        z = rng.exponential(2.0, n)
        w = rng.dirichlet(np.ones(n))
        delta, beta = float(rng.uniform(0.01, 0.5)), float(rng.uniform(0.05, 0.5))
        dual = phi_dual_cvar(z, phi, delta, beta, w).value
        assert dual == pytest.approx(cvxpy_primal(z, w, phi, delta, beta), abs=1e-4)


def test_local_primal_agrees_with_dual():
    z = np.array([0.2, 0.9, 1.4, 5.0])
    w = np.array([0.4, 0.3, 0.2, 0.1])
    for phi in (ChiSquare(), CressieRead(3.0)):
        assert phi_primal_cvar(z, phi, 0.1, 0.25, w) == pytest.approx(
            phi_dual_cvar(z, phi, 0.1, 0.25, w).value, abs=1e-6)


def test_vanishing_radius_recovers_sample_cvar():
    z = sample(Exponential(), 2000, 4)
    r = phi_dual_cvar(z, ChiSquare(), 1e-9, 0.05)
    assert r.value == pytest.approx(sample_cvar(z, 0.05), rel=5e-3)


def test_value_grows_with_radius():
    z = sample(WeibullType(1.0, 1.5), 2000, 6)
    vals = [phi_dual_cvar(z, ChiSquare(), d, 0.05).value for d in (0.01, 0.05, 0.1)]
    assert vals[0] <= vals[1] <= vals[2]
    assert vals[0] >= sample_cvar(z, 0.05)


def test_provably_infinite_case_is_flagged():
    r = phi_dual_cvar(np.arange(1.0, 10.0), KL(), 0.1, 0.1, regime=TailRegime("frechet", 3.0))
    assert r.status == "WorstCaseInfinite" and r.value == math.inf


def test_rpev_with_tiny_radius_matches_nominal():
    n = 20_000
    z = GeneralizedPareto(1 / 3, 1.0).quantile((np.arange(1, n + 1) - 0.5) / n)
    s = EmpiricalSample.from_values(z)
    cal = calibrate(s, theta=0.5, regime="frechet")
    target = center_risk(build_nominal(cal, s), 1e-3)
    r = rpev_dro_cvar(s, 1e-3, delta=1e-9, theta=0.5, regime="frechet", n_tail=200_000, seed=3, batches=10)
    assert abs(r.value - target) <= 4 * r.stderr + 1e-3 * target


def test_gaussian_discretisation():
    z, w = gaussian_atoms(0.0, 1.0)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert float(w @ z) == pytest.approx(0.0, abs=1e-12)
    assert float(w @ z ** 2) == pytest.approx(1.0, rel=1e-3)
    b = 0.01
    assert sample_cvar(z, b, w) == pytest.approx(norm.pdf(norm.ppf(1 - b)) / b, rel=1e-3)


# --------------------------------------------------------- worst-case tail cdf

def test_worst_case_survival_examples():
    law = Exponential()
    x = math.log(2.0)  # survival 0.5
    assert worst_case_survival(law, ChiSquare(), 0.02, x) == pytest.approx(0.6, rel=1e-10)
    assert worst_case_survival(law, ChiSquare(), 0.0, x) == pytest.approx(0.5, rel=1e-14)


def test_worst_case_survival_asymptotic_branch():
    law = GeneralizedPareto(1 / 3, 1.0)
    x = law.quantile(1e-6)
    for phi in (ChiSquare(), ExpShifted()):
        exact = worst_case_survival(law, phi, 0.1, x)
        approx = worst_case_survival(law, phi, 0.1, x, asymptotic=True)
        assert approx == pytest.approx(exact, rel=0.05)


def test_worst_case_quantile_round_trip():
    law = GeneralizedPareto(1 / 3, 1.0)
    for t in (1e-2, 1e-4, 1e-7):
        q = worst_case_quantile(law, ChiSquare(), 0.1, t)
        assert worst_case_survival(law, ChiSquare(), 0.1, q) == pytest.approx(t, rel=1e-7)
        assert worst_case_quantile(law, ChiSquare(), 0.0, t) == pytest.approx(law.quantile(t), rel=1e-9)
    assert worst_case_quantile(law, ChiSquare(), 0.1, 1e-4) > law.quantile(1e-4)


# ------------------------------------------------------------------ diagnostics

def test_inflation_predictions():
    heavy3 = TailRegime("frechet", 3.0)
    assert inflation_diagnostic(heavy3, ("wasserstein", 1)).value == 3.0
    assert inflation_diagnostic(heavy3, ChiSquare()).value == 2.0
    assert inflation_diagnostic(TailRegime("gumbel", 2.0), ChiSquare()).value == pytest.approx(1.41421, abs=1e-5)
    assert inflation_diagnostic(TailRegime("gumbel", 2.0), ("wasserstein", 1)).kind == "infinite"
    assert inflation_diagnostic(heavy3, ExpShifted()).value == 1.0
    with pytest.raises(PreconditionViolated):
        inflation_diagnostic(TailRegime("frechet", 1.5), ("wasserstein", 2))


def test_dominance_chain_over_seeds():
    law, beta = SurvivalFormula(3.4, 1.0, 3.4 * math.e), 1e-3
    for r in range(20):
        x = sample(law, 500, stream(11, "data", r))
        kw = dict(delta=0.1, beta0=0.03, M=8.0, n_tail=5000, batches=0)
        rp = evt_phi_cvar(x, beta, phi=ExpShifted(), seed=stream(11, "tail", r), **kw)
        ch = evt_phi_cvar(x, beta, phi=ChiSquare(), seed=stream(11, "tail", r), **kw)
        assert rp.nominal <= rp.value * (1 + 1e-9)
        assert rp.value <= ch.value * (1 + 1e-9)


def test_oracle_nominal_worst_case_is_finite_for_exp_shifted():
    nom = oracle_nominal(GeneralizedPareto(1 / 3, 1.0), 0.1)
    z, w = nom.atoms(10_000, 1)
    r = phi_dual_cvar(z, ExpShifted(), 0.1, 0.01, w, regime=nom.regime)
    assert r.ok and math.isfinite(r.value)
