import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize, stats

from nmwl.families import FamilyInstance, log_density
from nmwl.weights import WeightRow, null_pseudo_weights, single_observation_weights
from nmwl.wlik import (ComparisonSet, OptimConfig, ParameterSpace, weighted_log_likelihood,
                       weighted_mle, weighted_mle_normal_closed_form)

NUMERIC = OptimConfig(method="numeric")


def _closed_form(t, sigma, w):
    p = np.asarray(w) / np.asarray(sigma) ** 2
    return float(np.sum(p * t) / np.sum(p))


def test_single_term_equals_density():
    fam = FamilyInstance.folded_t(6, 9)
    obs = ComparisonSet.from_arrays([1.7], fam)
    row = WeightRow(0, (1.0,))
    assert weighted_log_likelihood(0.4, row, obs) == pytest.approx(log_density(fam, 0.4, 1.7),
                                                                   rel=1e-14)


def test_two_term_sum():
    obs = ComparisonSet.normal([2.0, 0.0], 1.0)
    row = WeightRow(0, (0.9, 0.1))
    expect = 0.9 * stats.norm.logpdf(2, 1, 1) + 0.1 * stats.norm.logpdf(0, 1, 1)
    assert weighted_log_likelihood(1.0, row, obs) == pytest.approx(expect, rel=1e-14)


def test_null_weights_structure():
    fam = FamilyInstance.folded_t(5, 5)
    obs = ComparisonSet.from_arrays([2.2], fam)
    t0, n1 = 0.8, 10
    row = null_pseudo_weights(n1, t0)
    for theta in (0.0, 0.5, 1.3):
        expect = (log_density(fam, theta, t0) / (n1 + 1)
                  + (1 - 1 / (n1 + 1)) * log_density(fam, theta, 2.2))
        assert weighted_log_likelihood(theta, row, obs) == pytest.approx(expect, rel=1e-13)


def test_zero_weight_terms_drop_out():
    obs = ComparisonSet.normal([0.0, 1e6], 1.0)
    assert weighted_log_likelihood(0.0, WeightRow(0, (1.0, 0.0)), obs) == pytest.approx(
        stats.norm.logpdf(0.0))


def test_mle_examples():
    obs = ComparisonSet.normal([2.0, 0.0], 1.0)
    row = WeightRow(0, (0.9, 0.1))
    res = weighted_mle(ParameterSpace.singleton(0.0), row, obs)
    assert res.theta_hat == 0.0
    assert res.max_log_wlik == weighted_log_likelihood(0.0, row, obs)
    for optim in (OptimConfig(), NUMERIC):
        res = weighted_mle(ParameterSpace.full_line(), row, obs, optim)
        assert res.theta_hat == pytest.approx(1.8, abs=1e-8)
        assert res.max_log_wlik == pytest.approx(weighted_log_likelihood(res.theta_hat, row, obs),
                                                 abs=1e-14)
    neg = ComparisonSet.normal([-1.0, -3.0, -0.2], 1.0)
    res = weighted_mle(ParameterSpace.half_line(), single_observation_weights(0, 1, 3), neg, NUMERIC)
    assert res.theta_hat == pytest.approx(0.0, abs=1e-9)
    assert res.at_boundary


def test_closed_form_examples():
    obs = ComparisonSet.normal([1.0, 2.0, 6.0], 2.0)
    assert weighted_mle_normal_closed_form(WeightRow(0, (1 / 3, 1 / 3, 1 / 3)), obs) == pytest.approx(3.0)
    assert weighted_mle_normal_closed_form(WeightRow(0, (1.0, 0.0, 0.0)), obs) == 1.0


def test_optimizer_matches_closed_form_random():
    rng = np.random.default_rng(101)
    for _ in range(100):
        N = int(rng.integers(2, 12))
        t = rng.normal(0, 5, N)
        sigma = rng.uniform(0.2, 4.0, N)
        i = int(rng.integers(N))
        row = single_observation_weights(i, int(rng.integers(1, 20)), N)
        obs = ComparisonSet.normal(t, sigma)
        got = weighted_mle(ParameterSpace.full_line(), row, obs, NUMERIC).theta_hat
        assert abs(got - _closed_form(t, sigma, row.weights)) <= 1e-8


def test_punctured_uses_closure():
    obs = ComparisonSet.normal([0.0, 0.0], 1.0)
    row = single_observation_weights(0, 1, 2)
    res = weighted_mle(ParameterSpace.punctured(0.0), row, obs)
    full = weighted_mle(ParameterSpace.full_line(), row, obs)
    assert res.theta_hat == full.theta_hat == 0.0
    assert res.at_boundary


def test_folded_t_mle_against_scipy():
    fam = FamilyInstance.folded_t(8, 12)
    obs = ComparisonSet.from_arrays([2.4, 0.7, 3.1, 1.2], fam)
    row = single_observation_weights(0, 20, 4)
    d = fam.ncp_factor

    def negll(theta):
        return -sum(w * math.log(stats.nct.pdf(t, fam.df, d * theta) + stats.nct.pdf(-t, fam.df, d * theta))
                    for w, t in zip(row.weights, obs.statistics))

    ref = optimize.minimize_scalar(negll, bounds=(0.0, 5.0), method="bounded",
                                   options={"xatol": 1e-12}).x
    got = weighted_mle(ParameterSpace.half_line(), row, obs).theta_hat
    assert got == pytest.approx(ref, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=2, max_size=10), st.integers(1, 50),
       st.floats(-100, 100))
def test_shift_invariance(t, n, c):
    t = np.array(t)
    row = single_observation_weights(0, n, len(t))
    a = weighted_mle(ParameterSpace.full_line(), row, ComparisonSet.normal(t, 1.3), NUMERIC)
    b = weighted_mle(ParameterSpace.full_line(), row, ComparisonSet.normal(t + c, 1.3), NUMERIC)
    assert abs((b.theta_hat - a.theta_hat) - c) <= 1e-8 * max(1.0, abs(c))
    ca = weighted_mle_normal_closed_form(row, ComparisonSet.normal(t, 1.3))
    cb = weighted_mle_normal_closed_form(row, ComparisonSet.normal(t + c, 1.3))
    assert cb - ca == pytest.approx(c, abs=1e-12 * (1 + abs(c) + np.abs(t).max()))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=8),
       st.lists(st.floats(0.3, 3.0), min_size=8, max_size=8), st.integers(1, 30))
def test_consistency_bound(t, sigma, n):
    N = len(t)
    t, sigma = np.array(t), np.array(sigma[:N])
    row = single_observation_weights(0, n, N)
    theta = weighted_mle_normal_closed_form(row, ComparisonSet.normal(t, sigma))
    bound = (1 - row.focus_weight) * np.abs(t - t[0]).max() * sigma[0] ** 2 / sigma.min() ** 2
    assert abs(theta - t[0]) <= bound + 1e-12
    # the pull away from t_i shrinks as n_i grows
    bigger = weighted_mle_normal_closed_form(single_observation_weights(0, n + 5, N),
                                             ComparisonSet.normal(t, sigma))
    assert abs(bigger - t[0]) <= abs(theta - t[0]) + 1e-12
