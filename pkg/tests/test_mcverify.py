import json
import math

import numpy as np
import pytest

from nmwl import mcverify
from nmwl.errors import ConfigError
from nmwl.evidence import mle_baseline
from nmwl.families import FamilyInstance, log_density
from nmwl.weights import single_observation_weights
from nmwl.wlik import ComparisonSet, ParameterSpace

from normal_oracles import SCHOOLS_S, SCHOOLS_T

NORMAL = FamilyInstance.normal(1.0)


def cfg(**kw):
    base = dict(family=NORMAL, theta_true=0.0, N=4, replicates=200, seed=1)
    base.update(kw)
    return mcverify.SimulationConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        cfg(replicates=0)
    with pytest.raises(ConfigError):
        cfg(thresholds=(0.5,))
    with pytest.raises(ConfigError):
        cfg(N=1)  # the sites scheme needs incidental comparisons
    with pytest.raises(ConfigError):
        mcverify.interpretability_trend(cfg(), [4, 16], k=0.9)


def test_binomial_se():
    assert mcverify.binomial_se(0.1, 400) == pytest.approx(0.015, rel=1e-15)
    assert mcverify.binomial_se(0.0, 50) == 0.0


def test_exceedance_rates_and_monotone_in_k():
    c = cfg(thresholds=(1.0, 2.0, 10.0, 100.0))
    rep = mcverify.misleading_evidence_rate(c, 0.0, ParameterSpace.punctured(0.0))
    rates = [r["rate"] for r in rep.thresholds]
    assert rates[0] <= 1.0
    assert all(0.0 <= r <= 1.0 for r in rates)
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    for r in rep.thresholds:
        assert r["se"] == pytest.approx(math.sqrt(r["rate"] * (1 - r["rate"]) / r["replicates"]))
    assert rep.passed


def test_replicate_streams_independent_of_blocking():
    c = cfg(replicates=150)
    theta1, theta0 = ParameterSpace.punctured(0.0), ParameterSpace.singleton(0.0)
    a = mcverify.simulate_di(c, theta1, theta0, workers=1)
    b = mcverify.simulate_di(c, theta1, theta0, workers=3)
    assert a.tobytes() == b.tobytes()
    r1 = mcverify.misleading_evidence_rate(c, 0.0, theta1, workers=1).to_json()
    r2 = mcverify.misleading_evidence_rate(c, 0.0, theta1, workers=2).to_json()
    assert r1 == r2
    assert json.loads(r1)["config"]["seed"] == 1


def test_identical_statistics_gap_vanishes():
    # with t_j = t for all j both denominators see total incidental weight
    # (1 - w) at t, so their Gaussian integrals are equal
    obs = ComparisonSet.normal(np.full(7, 0.8), 1.3)
    assert mcverify.complexity_gap(obs, ParameterSpace.full_line()) == pytest.approx(0.0, abs=1e-9)


def test_convergence_small_run():
    rep = mcverify.complexity_convergence(cfg(replicates=100), [5, 50])
    gaps = [g["mean_gap"] for g in rep.complexity_gaps]
    assert gaps[1] < gaps[0] and gaps[1] < 0.05
    assert rep.passed


def test_regret_sweep():
    obs = ComparisonSet.normal(SCHOOLS_T, SCHOOLS_S)
    row = single_observation_weights(0, 1, 8)
    space = ParameterSpace.full_line()
    assert mcverify.regret_sweep(0, space, row, obs, 1) == 0.0
    assert mcverify.regret_sweep(0, space, row, obs, 21) <= 1e-6


def test_regret_sweep_mle_control():
    fam = FamilyInstance.folded_t(10, 10)
    obs = ComparisonSet.from_arrays([0.3, 2.9, 1.1, 0.6, 3.4, 0.9], fam)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = mle_baseline(obs)
    row = single_observation_weights(0, 20, 6)
    dev = mcverify.regret_sweep(0, ParameterSpace.half_line(), row, obs, 9,
                                predictive=lambda t: log_density(fam, fit.theta_alt, t))
    assert dev > 1e-3


def test_quantile_grid():
    fam = FamilyInstance.folded_t(5, 5)
    g = mcverify.quantile_grid(fam, 0.7, 11)
    assert np.all(np.diff(g) > 0) and g[0] > 0
    g = mcverify.quantile_grid(FamilyInstance.normal(2.0), 1.0, 3)
    np.testing.assert_allclose(g[1], 1.0, atol=1e-12)


def test_asymptotic_trend():
    rep = mcverify.asymptotic_trend(1.0, [1, 4, 16, 64, 256])
    gaps = [r["gap"] for r in rep.trend]
    assert rep.passed and gaps[-1] < gaps[0]


def test_interpretability_trend_runs():
    c = cfg(family=FamilyInstance.folded_t(4, 4), N=1, weight_scheme="null", replicates=100)
    rep = mcverify.interpretability_trend(c, [4, 16], k=8)
    assert [r["n"] for r in rep.trend] == [4, 16]
    assert all(0.0 <= r["rate"] <= 1.0 for r in rep.trend)
