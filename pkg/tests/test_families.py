import math

import numpy as np
import pytest
from scipy import integrate, stats

from nmwl.errors import DegenerateVariance, InvalidParameter, OutOfSupport
from nmwl.families import (FamilyInstance, ReducedObservation, folded_noncentral_t_log_pdf,
                           log_density, log_kummer_half, noncentral_t_log_pdf_quad,
                           noncentrality, null_pseudo_statistic, reduce_two_sample,
                           sample_statistic)

# log of f_T(2) + f_T(-2), noncentral t with df=10, ncp=1; defining integral
# over the chi-square mixing variable, 30-digit mpmath quadrature
NCT_DF10_NCP1_T2 = -1.45912811885432125
# E|T| of a central t with 10 degrees of freedom, 30-digit mpmath quadrature
ABS_T10_MEAN = 0.864685297702291224


def test_family_invariants():
    with pytest.raises(InvalidParameter):
        FamilyInstance.normal(0.0)
    with pytest.raises(InvalidParameter):
        FamilyInstance.folded_t(1, 5)
    fam = FamilyInstance.folded_t(55, 64)
    assert fam.df == 117
    assert fam.support == (0.0, math.inf)
    assert fam.default_sample_size == 119
    with pytest.raises(OutOfSupport):
        ReducedObservation(-0.1, fam)
    with pytest.raises(InvalidParameter):
        ReducedObservation(1.0, FamilyInstance.normal(1.0), sample_size=0)


def test_normal_density_values():
    fam = FamilyInstance.normal(1.0)
    assert log_density(fam, 0.0, 0.0) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-15)
    fam = FamilyInstance.normal(2.5)
    t = np.linspace(-6, 9, 31)
    np.testing.assert_allclose(log_density(fam, 1.5, t), stats.norm.logpdf(t, 1.5, 2.5),
                               rtol=1e-14)


def test_folded_t_central_values():
    fam = FamilyInstance.folded_t(2, 2)
    for t in (0.3, 1.0, 4.0, 25.0):
        assert log_density(fam, 0.0, t) == pytest.approx(
            math.log(2) + stats.t.logpdf(t, 2), rel=1e-12)
    assert folded_noncentral_t_log_pdf(1.5, 3, 0.0) == pytest.approx(
        math.log(2) + stats.t.logpdf(1.5, 3), rel=1e-12)


def test_folded_t_at_fold_point():
    d = 0.8
    expect = math.log(2) + stats.nct.logpdf(0.0, 5, d)
    assert folded_noncentral_t_log_pdf(0.0, 5, d) == pytest.approx(expect, rel=1e-12)


def test_folded_t_frozen_oracle():
    got = folded_noncentral_t_log_pdf(2.0, 10, 1.0)
    assert abs(got - NCT_DF10_NCP1_T2) <= 1e-8 * abs(NCT_DF10_NCP1_T2)


def test_folding_identity_two_routes():
    rng = np.random.default_rng(11)
    for _ in range(20):
        t = rng.uniform(0.0, 8.0)
        df = int(rng.integers(2, 60))
        ncp = rng.uniform(0.0, 6.0)
        series = folded_noncentral_t_log_pdf(t, df, ncp)
        quad = np.logaddexp(noncentral_t_log_pdf_quad(t, df, ncp),
                            noncentral_t_log_pdf_quad(-t, df, ncp))
        assert abs(series - quad) <= 1e-8 * abs(quad)
        ref = math.log(stats.nct.pdf(t, df, ncp) + stats.nct.pdf(-t, df, ncp))
        assert series == pytest.approx(ref, rel=1e-8, abs=1e-10)


def test_large_ncp_tail_routes_agree():
    # far outside the range where scipy's hyp1f1 alone would be used
    for t, df, ncp in [(40.0, 20, 45.0), (3.0, 4, 60.0), (120.0, 30, 80.0)]:
        series = folded_noncentral_t_log_pdf(t, df, ncp)
        quad = np.logaddexp(noncentral_t_log_pdf_quad(t, df, ncp),
                            noncentral_t_log_pdf_quad(-t, df, ncp))
        assert abs(series - quad) <= 1e-8 * abs(quad)


def test_kummer_against_scipy():
    from scipy import special
    z = np.array([0.0, 0.1, 3.0, 40.0, 300.0])
    a = np.array([1.0, 2.5, 6.0, 11.0, 30.0])
    np.testing.assert_allclose(log_kummer_half(z, a), np.log(special.hyp1f1(a, 0.5, z)),
                               rtol=1e-12)


@pytest.mark.parametrize("fam", [FamilyInstance.normal(0.7), FamilyInstance.folded_t(2, 2),
                                 FamilyInstance.folded_t(10, 10), FamilyInstance.folded_t(55, 64)])
def test_density_normalizes(fam):
    lo, hi = fam.theta_bounds
    thetas = [0.0, 0.3, 1.0, 2.0] if lo == 0.0 else [-2.0, 0.0, 1.5]
    for theta in thetas:
        total, _ = integrate.quad(lambda t: math.exp(log_density(fam, theta, t)),
                                  *fam.support, epsabs=1e-12, epsrel=1e-10, limit=200)
        assert abs(total - 1.0) <= 1e-6


def test_noncentrality():
    assert noncentrality(FamilyInstance.folded_t(2, 2), 1.0) == pytest.approx(1.0, abs=1e-15)
    assert noncentrality(FamilyInstance.folded_t(8, 8), 0.0) == 0.0
    assert noncentrality(FamilyInstance.folded_t(55, 64), 0.5) == pytest.approx(
        0.5 * (1 / 55 + 1 / 64) ** -0.5, rel=1e-14)


def test_null_pseudo_statistic():
    assert null_pseudo_statistic(FamilyInstance.normal(4.0), 0.0) == 0.0
    assert null_pseudo_statistic(FamilyInstance.normal(2.0), 3.0) == 3.0
    assert null_pseudo_statistic(FamilyInstance.folded_t(6, 6), 0.0) == pytest.approx(
        ABS_T10_MEAN, rel=1e-12)


def _textbook_t(x, y):
    m, n = len(x), len(y)
    mx, my = sum(x) / m, sum(y) / n
    ss = sum((v - mx) ** 2 for v in x) + sum((v - my) ** 2 for v in y)
    sp = math.sqrt(ss / (m + n - 2))
    return (mx - my) / (sp * math.sqrt(1 / m + 1 / n))


def test_reduce_two_sample():
    with pytest.raises(DegenerateVariance):
        reduce_two_sample([1.0, 1.0], [1.0, 1.0])
    assert reduce_two_sample([1.0, 2.0, 4.0], [1.0, 2.0, 4.0]).statistic == 0.0
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = list(rng.normal(0.4, 1.3, rng.integers(2, 30)))
        y = list(rng.normal(0.0, 1.3, rng.integers(2, 30)))
        o = reduce_two_sample(x, y, "f")
        assert o.statistic == pytest.approx(abs(_textbook_t(x, y)), rel=1e-12)
        assert o.family.group_sizes == (len(x), len(y))


def test_sampling_moments_and_support():
    rng = np.random.default_rng(5)
    z = sample_statistic(FamilyInstance.normal(1.0), 0.0, rng, size=10 ** 6)
    assert abs(z.mean()) < 4 / math.sqrt(10 ** 6)
    t = sample_statistic(FamilyInstance.folded_t(4, 6), 0.7, rng, size=10 ** 5)
    assert np.all(t >= 0)


def _cdf_table(fam, theta, upper, points=801):
    grid = np.linspace(0.0, upper, points)
    pieces = [integrate.quad(lambda t: math.exp(log_density(fam, theta, t)), a, b,
                             epsabs=1e-14)[0] for a, b in zip(grid[:-1], grid[1:])]
    return grid, np.concatenate([[0.0], np.cumsum(pieces)])


def test_sampler_matches_quadrature_cdf():
    fam = FamilyInstance.folded_t(5, 7)
    theta = 0.9
    rng = np.random.default_rng(17)
    draws = sample_statistic(fam, theta, rng, size=10 ** 5)
    grid, cdf = _cdf_table(fam, theta, draws.max() + 1.0)
    res = stats.kstest(draws, lambda x: np.interp(x, grid, cdf))
    assert res.statistic < 1.63 / math.sqrt(len(draws))


def test_histogram_matches_density():
    df, ncp, t0, h = 10, 1.2, 2.5, 0.05
    rng = np.random.default_rng(23)
    draws = np.abs(stats.nct.rvs(df, ncp, size=10 ** 7, random_state=rng))
    p_hat = np.mean((draws >= t0 - h / 2) & (draws < t0 + h / 2))
    se = math.sqrt(p_hat * (1 - p_hat) / draws.size)
    p, _ = integrate.quad(lambda t: math.exp(folded_noncentral_t_log_pdf(t, df, ncp)),
                          t0 - h / 2, t0 + h / 2, epsabs=1e-14)
    assert abs(p_hat - p) <= 3 * se


def test_reduction_consistency():
    m = n = 30
    theta = 0.5
    rng = np.random.default_rng(29)
    stats_ = np.array([reduce_two_sample(rng.normal(theta, 1.0, m), rng.normal(0.0, 1.0, n)).statistic
                       for _ in range(3000)])
    fam = FamilyInstance.folded_t(m, n)
    grid, cdf = _cdf_table(fam, theta, stats_.max() + 1.0)
    res = stats.kstest(stats_, lambda x: np.interp(x, grid, cdf))
    assert res.pvalue > 0.01
