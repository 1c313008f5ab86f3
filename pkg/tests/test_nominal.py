import math

import numpy as np
import pytest

from tailrobust.evt import EmpiricalSample, calibrate
from tailrobust.nominal import (NominalModel, build_nominal, nominal_quantile, nominal_survival,
                                oracle_nominal, sample_tail)
from tailrobust.tail_models import GeneralizedPareto, TailRegime, WeibullType

HEAVY = NominalModel(kind="data", v=2.0, beta0_hat=0.1, regime=TailRegime("frechet", 2.0),
                     bulk_values=np.linspace(2.0, 0.2, 9), bulk_weight=0.1)
LIGHT = NominalModel(kind="data", v=2.0, beta0_hat=0.1, regime=TailRegime("gumbel", 1.0),
                     bulk_values=np.linspace(2.0, 0.2, 9), bulk_weight=0.1)


def test_build_from_ten_points():
    z = np.arange(10.0, 0.0, -1.0)
    cal = calibrate(z, beta0=0.3, regime="frechet")
    assert cal.k_n == 3
    nom = build_nominal(cal, z)
    assert nom.v == 8.0
    assert nom.beta0_hat == pytest.approx(0.2)
    _, w = nom.bulk_atoms()
    assert w.sum() + nom.beta0_hat == pytest.approx(1.0, abs=1e-15)


def test_smallest_admissible_tail():
    z = np.arange(20.0, 0.0, -1.0)
    nom = build_nominal(calibrate(z, beta0=0.1, regime="frechet"), z)
    assert nom.beta0_hat == pytest.approx(1 / 20)


def test_tied_splice_uses_exceedance_fraction():
    z = np.array([9.0, 7.0, 7.0, 7.0, 3.0, 2.0, 1.0, 0.5, 0.4, 0.3])
    cal = calibrate(z, beta0=0.3, regime="frechet")
    nom = build_nominal(cal, z)
    assert nom.beta0_hat == pytest.approx(0.1)
    _, w = nom.bulk_atoms()
    assert w.sum() + nom.beta0_hat == pytest.approx(1.0)


def test_quantile_examples():
    assert nominal_quantile(HEAVY, 0.1) == pytest.approx(2.0)
    assert nominal_quantile(HEAVY, 0.001) == pytest.approx(20.0, rel=1e-12)
    assert nominal_quantile(LIGHT, 0.01) == pytest.approx(4.0, rel=1e-12)


def test_survival_examples():
    assert nominal_survival(HEAVY, 2.0) == pytest.approx(0.1)
    assert nominal_survival(HEAVY, 20.0) == pytest.approx(0.001, rel=1e-12)
    assert nominal_survival(HEAVY, 0.01) == 1.0


def test_tail_draws_from_levels():
    # U = 0.999 means V = 1 - U = 0.001; U = 1 - beta0_hat lands on v
    assert HEAVY.tail_from_levels(np.array([1 - 0.999]))[0] == pytest.approx(20.0, rel=1e-9)
    assert LIGHT.tail_from_levels(np.array([1 - 0.99]))[0] == pytest.approx(4.0, rel=1e-9)
    assert HEAVY.tail_from_levels(np.array([0.1]))[0] == pytest.approx(2.0)
    assert np.all(sample_tail(HEAVY, 1000, 3) >= 2.0)


@pytest.mark.parametrize("model", [HEAVY, LIGHT], ids=["heavy", "light"])
def test_round_trip_and_monotone(model):
    t = np.geomspace(1e-12, 0.1, 200)
    q = nominal_quantile(model, t)
    np.testing.assert_allclose(nominal_survival(model, q), t, rtol=1e-10)
    assert np.all(np.diff(q) < 0)


def test_tail_sampler_matches_survival():
    N = 1_000_000
    draws = sample_tail(HEAVY, N, 17)
    for x in (2.5, 5.0, 20.0, 100.0):
        p = nominal_survival(HEAVY, x) / HEAVY.beta0_hat
        se = math.sqrt(p * (1 - p) / N)
        assert abs(np.mean(draws > x) - p) <= 3 * se


def test_oracle_splice_is_continuous():
    law = WeibullType(1.0, 1.5)
    nom = oracle_nominal(law, 0.05)
    assert nom.survival(nom.v) == pytest.approx(0.05, rel=1e-12)
    assert nom.survival(nom.v * (1 - 1e-12)) == pytest.approx(0.05, rel=1e-9)
    assert nom.quantile(0.2) == pytest.approx(law.quantile(0.2), rel=1e-12)


def test_oracle_nominal_preserves_log_rate():
    law = GeneralizedPareto(1 / 3, 1.0)
    # n is not fixed by the property; 1e5 matches the estimator checks
    beta, n = 1e-4, 100_000
    for theta in (0.3, 0.5, 0.7):
        nom = oracle_nominal(law, n ** -theta)
        for t in (beta, beta / 10, beta / 100):
            r = math.log(nom.quantile(t)) / math.log(law.quantile(t))
            assert 0.9 <= r <= 1.1


def test_data_nominal_rejects_other_sample():
    z = np.arange(50.0, 0.0, -1.0)
    cal = calibrate(z, beta0=0.1, regime="frechet")
    with pytest.raises(Exception):
        build_nominal(cal, EmpiricalSample.from_values(z[:-1]))
