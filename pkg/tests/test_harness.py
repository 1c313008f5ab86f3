import math

import numpy as np
import pytest

from tailrobust.errors import PlanOverrun, PreconditionViolated
from tailrobust.harness import (Beta0Rule, MethodSpec, WindowPlan, coverage_fraction, default_methods,
                                ground_truth, hedging_frequency_study, is_u_shaped, quartiles,
                                run_parameter_sweep, run_replication_study, run_rolling_windows,
                                summarize, tail_means)
from tailrobust.hedging import HedgeConfig
from tailrobust.rng import stream
from tailrobust.robust_eval import sample_cvar
from tailrobust.tail_models import Exponential, GeneralizedPareto, SurvivalFormula, cvar, sample


def test_coverage_example():
    assert coverage_fraction([9, 11, 12, 8], 10) == 0.5
    assert coverage_fraction([9, math.inf, math.nan], 10) == 0.5


def test_quartiles_handle_infinity():
    assert quartiles([1.0, 2.0, 3.0, 4.0, 5.0]) == (2.0, 3.0, 4.0)
    q1, med, q3 = quartiles([1.0, 2.0, math.inf, math.inf, math.inf])
    assert q1 == 2.0 and med == math.inf and q3 == math.inf


def test_summary_excludes_failures():
    V = np.array([[1.0], [np.nan], [3.0], [math.inf]])
    s = summarize("m", [0.1], V, np.array([2.0]))
    assert s.failures[0] == 1 and s.infinite[0] == 1
    assert s.coverage[0] == pytest.approx(2 / 3)
    assert s.median[0] == 3.0


def test_tail_means_match_sample_cvar():
    x = sample(Exponential(), 10_001, 3)
    for b in (0.5, 0.01, 0.0137, 1e-3):
        assert tail_means(x, [b])[0] == pytest.approx(sample_cvar(x, b), rel=1e-12)


def test_beta0_rule():
    assert Beta0Rule().level(500, 1e-4) == pytest.approx(0.01)
    assert Beta0Rule().level(500, 0.05) == 0.1
    assert Beta0Rule(theta=0.5).level(400, 1e-3) == pytest.approx(0.05)


def test_single_rep_rejected():
    with pytest.raises(PreconditionViolated):
        run_replication_study(Exponential(), default_methods(M=8.0), [0.01], 100, 1, 0, n_truth=0)


def test_window_indices():
    plan = WindowPlan(N=10, n=4, s=3, reps=2, grid=(0.1,))
    data = np.arange(1, 11)
    assert list(data[plan.window(1)]) == [4, 5, 6, 7]
    assert list(data[plan.window(2)]) == [7, 8, 9, 10]
    disjoint = WindowPlan(N=12, n=4, s=4, reps=2, grid=(0.1,))
    assert set(data[disjoint.window(1)]).isdisjoint(np.arange(1, 13)[disjoint.window(2)])
    with pytest.raises(PlanOverrun):
        WindowPlan(N=10, n=5, s=3, reps=2, grid=(0.1,))


def small_study(seed):
    methods = [MethodSpec("rpev", n_tail=2000, M=8.0), MethodSpec("chi2_evt", "phi_evt", n_tail=2000, M=8.0),
               MethodSpec("empirical", "empirical")]
    law = GeneralizedPareto(1 / 3, 1.0)
    return run_replication_study(law, methods, [1e-2, 1e-3], 300, 4, seed,
                                 truth=np.array([cvar(law, 1e-2), cvar(law, 1e-3)]))


def test_study_is_deterministic_and_uses_common_data():
    a, b = small_study(5), small_study(5)
    assert list(a.records()) == list(b.records())
    # the empirical method sees exactly the dataset the other methods see
    law = GeneralizedPareto(1 / 3, 1.0)
    x0 = sample(law, 300, stream(5, "data", 0))
    assert a.values["empirical"][0, 0] == pytest.approx(sample_cvar(x0, 1e-2), rel=1e-12)
    assert list(small_study(6).records()) != list(a.records())


def test_single_cell_sweep_is_a_replication_study():
    law = GeneralizedPareto(1 / 3, 1.0)
    truth = np.array([cvar(law, 1e-3)])
    template = MethodSpec("x", n_tail=2000, M=8.0)
    st, cells = run_parameter_sweep(law, [0.1], [0.5], 1e-3, 300, 3, 2, template=template, truth=truth)
    direct = run_replication_study(law, [MethodSpec("rpev[delta=0.1,theta=0.5]", n_tail=2000, M=8.0,
                                                    beta0=Beta0Rule(theta=0.5))],
                                   [1e-3], 300, 3, 2, truth=truth)
    np.testing.assert_array_equal(st.values["rpev[delta=0.1,theta=0.5]"],
                                  direct.values["rpev[delta=0.1,theta=0.5]"])
    assert cells[(0.1, 0.5)].reps == 3


def test_rolling_windows_benchmark_and_label():
    x = sample(Exponential(), 400, 1)
    plan = WindowPlan(N=400, n=200, s=60, reps=3, grid=(0.05, 0.1))
    st = run_rolling_windows(x, plan, [MethodSpec("empirical", "empirical")], 0)
    np.testing.assert_allclose(st.truth, [sample_cvar(x, 0.05), sample_cvar(x, 0.1)])
    assert st.values["empirical"][1, 0] == pytest.approx(sample_cvar(x[120:320], 0.05))
    assert st.labels["diagnostic"] is True


def test_ground_truth_stability():
    law = SurvivalFormula(3.4, 1.0, 3.4 * math.e)
    a = ground_truth(law, [1e-3], seed=1)[0]
    b = ground_truth(law, [1e-3], seed=2)[0]
    assert abs(a / b - 1) < 0.01


def test_ground_truth_within_monte_carlo_error_of_closed_form():
    # relative standard error of a tail mean with index g from N*beta exceedances:
    # sqrt(1 / (g (g - 2)) / (N beta)), about 0.65% here
    law, beta, N = SurvivalFormula(3.4, 1.0, 3.4 * math.e), 1e-3, 5_000_000
    se = math.sqrt(1 / (3.4 * 1.4) / (N * beta))
    exact = cvar(law, beta)
    for seed in (1, 2):
        assert abs(ground_truth(law, [beta], n_truth=N, seed=seed)[0] / exact - 1) <= 3 * se


def test_u_shape_detector():
    assert is_u_shaped([3, 2, 1, 2])
    assert not is_u_shaped([3, 2, 1])
    assert not is_u_shaped([1, 2, 3])


def test_hedging_study_bookkeeping():
    st = hedging_frequency_study(HedgeConfig(), [4, 16, 64], 0.05, 100,
                                 [MethodSpec("empirical", "empirical")], 3, reps=2, n_truth=20_000)
    j = int(np.argmin(np.median(st.curves["empirical"], axis=0)))
    assert st.argmin["empirical"] == [4, 16, 64][j]
    assert st.guarantee["empirical"] == pytest.approx(st.truth[j] / st.truth.min())
    assert st.guarantee["empirical"] >= 1.0
