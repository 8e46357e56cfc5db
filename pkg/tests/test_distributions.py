import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from heavytail_ccp.distributions import (BetaPrime, DegenerateMomentWarning, MultivariateT,
                                         SqrtBetaPrime, StudentT, beta_prime_median,
                                         beta_prime_pdf_derivs, cdf_numeric, norm_sq_params,
                                         pairwise_sum_params, printed_pair_params, quantile_numeric,
                                         sample_mvt, sqrt_beta_prime_pdf_derivs, sum_params,
                                         t_pdf_derivs)
from heavytail_ccp.exceptions import DomainError, InvalidParameterError

from conftest import LAWS, fd


def test_t_density_values():
    assert t_pdf_derivs(0.0, 1.0)[0] == pytest.approx(1 / math.pi, rel=1e-14)
    assert t_pdf_derivs(0.0, 4.0)[0] == pytest.approx(0.375, rel=1e-14)
    assert t_pdf_derivs(0.0, 4.0, 1)[1] == 0.0


def test_t_density_matches_scipy():
    for nu in (1.0, 2.5, 4.0, 20.0, 300.0):
        for x in (-7.0, -0.3, 0.0, 1.2, 40.0):
            assert t_pdf_derivs(x, nu)[0] == pytest.approx(stats.t.pdf(x, nu), rel=1e-12)


def test_large_nu_does_not_overflow():
    # gamma(nu/2) itself overflows for nu ~ 400
    v = t_pdf_derivs(0.5, 1e5)[0]
    assert v == pytest.approx(stats.norm.pdf(0.5), rel=1e-4)


def test_beta_prime_density_values():
    d = BetaPrime(1.0, 2.0)
    assert beta_prime_pdf_derivs(0.0, d)[0] == pytest.approx(2.0)
    assert beta_prime_pdf_derivs(1e-12, d)[0] == pytest.approx(2.0, rel=1e-10)
    assert beta_prime_pdf_derivs(1.0, d)[0] == pytest.approx(0.25)
    for g in (0.7, 2.0, 5.5):
        assert cdf_numeric(BetaPrime(g, g), 1.0) == pytest.approx(0.5, abs=1e-10)


def test_beta_prime_matches_scipy():
    for g, d in [(1.0, 2.0), (1.5, 10.0), (3.38, 11.14)]:
        for x in (0.05, 0.4, 2.0, 30.0):
            assert BetaPrime(g, d).pdf(x) == pytest.approx(stats.betaprime.pdf(x, g, d), rel=1e-12)


def test_sqrt_beta_prime_density():
    d = SqrtBetaPrime(BetaPrime(1.0, 2.0))
    assert sqrt_beta_prime_pdf_derivs(1.0, d)[0] == pytest.approx(0.5)
    med = math.sqrt(math.sqrt(2) - 1)
    assert cdf_numeric(d, med) == pytest.approx(0.5, abs=1e-10)


@pytest.mark.parametrize("law", LAWS, ids=lambda d: d.key())
def test_density_integrates_to_one(law):
    lo = law.support_lower
    if lo == 0.0:
        a = integrate.quad(law.pdf, 0.0, 1.0, epsabs=1e-13, limit=200)[0]
        b = integrate.quad(law.pdf, 1.0, math.inf, epsabs=1e-13, limit=200)[0]
    else:
        a = integrate.quad(law.pdf, -math.inf, 0.0, epsabs=1e-13, limit=200)[0]
        b = integrate.quad(law.pdf, 0.0, math.inf, epsabs=1e-13, limit=200)[0]
    assert a + b == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("law", LAWS, ids=lambda d: d.key())
def test_density_derivatives_match_finite_differences(law):
    if law.support_lower == 0.0:
        xs = np.logspace(-2, 1.5, 100)
    else:
        xs = np.concatenate([-np.logspace(-2, 2, 50), np.logspace(-2, 2, 50)])
    for x in xs:
        d = law.pdf_derivs(x, 3)
        for order in (1, 2, 3):
            num = fd(lambda z: law.pdf_derivs(z, order - 1)[order - 1], x, 1e-3 * abs(x))
            assert abs(num - d[order]) <= 1e-6 * abs(d[order])


def test_derivative_order_checked():
    with pytest.raises(ValueError):
        t_pdf_derivs(0.0, 3.0, 4)
    with pytest.raises(DomainError):
        BetaPrime(2.0, 2.0).pdf_derivs(-1.0)
    with pytest.raises(DomainError):
        SqrtBetaPrime(BetaPrime(1.0, 2.0)).pdf_derivs(0.0)


def test_invalid_parameters():
    with pytest.raises(InvalidParameterError):
        StudentT(0.0)
    with pytest.raises(InvalidParameterError):
        BetaPrime(1.0, -2.0)
    with pytest.raises(InvalidParameterError):
        norm_sq_params(0, 4.0)


def test_exact_medians():
    assert beta_prime_median(BetaPrime(1.0, 2.0)) == (pytest.approx(math.sqrt(2) - 1, rel=1e-14), True)
    assert beta_prime_median(BetaPrime(3.0, 3.0)) == (1.0, True)
    for d in (BetaPrime(1.0, 2.0), BetaPrime(2.5, 1.0), BetaPrime(4.0, 4.0)):
        val, exact = beta_prime_median(d)
        assert exact
        assert val == pytest.approx(quantile_numeric(d, 0.5), abs=1e-9)


def test_approximate_median_error_of_ratio_form():
    # the gamma-median ratio form is within a few percent for moderate shapes
    # and degrades as the first shape approaches 1
    cases = {(1.5, 10.0): 0.084, (3.380952, 11.142857): 0.033, (5.0, 20.0): 0.024}
    for (g, d), err in cases.items():
        dist = BetaPrime(g, d)
        val, exact = beta_prime_median(dist)
        assert not exact
        assert abs(val / quantile_numeric(dist, 0.5) - 1) == pytest.approx(err, abs=1e-3)


@pytest.mark.xfail(strict=True, reason="the ratio-of-gamma-medians form is 8.4% low for "
                                        "BetaPrime(1.5, 10); see the decision ledger")
def test_approximate_median_within_two_percent():
    dist = BetaPrime(1.5, 10.0)
    val, _ = beta_prime_median(dist)
    assert val == pytest.approx(quantile_numeric(dist, 0.5), rel=0.02)


def test_norm_sq_params():
    d = norm_sq_params(2, 4.0)
    assert (d.gamma, d.delta) == (1.0, 2.0)
    d = norm_sq_params(3, 20.0)
    assert (d.gamma, d.delta) == (1.5, 10.0)


def test_norm_sq_law_by_monte_carlo():
    rng = np.random.Generator(np.random.Philox(7))
    x = sample_mvt(np.zeros(2), np.eye(2), 4.0, 1_000_000, rng)
    r = np.sort(np.sum(x * x, axis=1) / 4.0)
    grid = np.linspace(0.01, 10, 60)
    emp = np.searchsorted(r, grid) / r.size
    exact = 1.0 - (1.0 + grid) ** -2.0
    assert np.max(np.abs(emp - exact)) < 0.01


def test_pairwise_sum_params_moments():
    d = pairwise_sum_params(3, 20.0)
    assert d.gamma == pytest.approx(3.380952380952381, abs=1e-9)
    assert d.delta == pytest.approx(11.142857142857142, abs=1e-9)
    base = norm_sq_params(3, 20.0)
    assert d.mean() == pytest.approx(1 / 3, abs=1e-12)
    assert d.mean() == pytest.approx(2 * base.mean(), abs=1e-12)
    assert d.variance() == pytest.approx(0.0486111111111, abs=1e-9)
    assert d.variance() == pytest.approx(2 * base.variance(), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.3, 20.0), st.floats(2.5, 60.0), st.integers(2, 5))
def test_sum_params_preserve_mean_and_variance(g, d, n):
    base = BetaPrime(g, d)
    out = sum_params(g, d, n)
    assert out.mean() == pytest.approx(n * base.mean(), rel=1e-9)
    assert out.variance() == pytest.approx(n * base.variance(), rel=1e-8)


def test_printed_pair_form_differs_by_factor_two():
    m = pairwise_sum_params(3, 20.0)
    p = printed_pair_params(3, 20.0)
    assert p.gamma == pytest.approx(m.gamma / 2, rel=1e-12)
    assert p.delta == pytest.approx(m.delta, rel=1e-12)


def test_degenerate_moment_warning():
    with pytest.warns(DegenerateMomentWarning):
        d = pairwise_sum_params(3, 4.0)
    assert (d.gamma, d.delta) == (pytest.approx(3.0), pytest.approx(2.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        pairwise_sum_params(3, 20.0)


def test_numeric_quantile_closed_forms():
    assert quantile_numeric(StudentT(1.0), 0.75) == pytest.approx(1.0, abs=1e-12)
    p = 0.9
    assert quantile_numeric(StudentT(2.0), p) == pytest.approx(
        (2 * p - 1) / math.sqrt(2 * p * (1 - p)), abs=1e-12)
    for delta in (0.5, 2.0, 10.0):
        for p in (0.1, 0.5, 0.99):
            assert quantile_numeric(BetaPrime(1.0, delta), p) == pytest.approx(
                (1 - p) ** (-1 / delta) - 1, rel=1e-10)
    assert quantile_numeric(StudentT(3.0), 0.2) == pytest.approx(stats.t.ppf(0.2, 3.0), rel=1e-10)


def test_sample_mvt_moments():
    rng = np.random.Generator(np.random.Philox(11))
    x = sample_mvt(np.zeros(3), np.eye(3), 20.0, 1_000_000, rng)
    cov = np.cov(x.T)
    assert np.allclose(np.diag(cov), 20 / 18, rtol=0.05)
    assert np.all(np.abs(cov - np.diag(np.diag(cov))) < 0.05 * 20 / 18)
    assert np.all(np.abs(np.median(x, axis=0)) < 0.01)
    assert stats.kstest(x[:20_000, 0], stats.t(20.0).cdf).pvalue > 0.01


def test_multivariate_t_affine_closure():
    sigma = np.array([[2.0, 0.3], [0.3, 0.5]])
    d = MultivariateT(np.array([1.0, -1.0]), sigma, 6.0)
    B = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 1.0]])
    b = np.array([0.5, 0.0, -2.0])
    img = d.affine(B, b)
    assert np.allclose(img.mu, B @ d.mu + b)
    assert np.allclose(img.sigma, B @ sigma @ B.T)
    rng = np.random.Generator(np.random.Philox(3))
    x = d.sample(400_000, rng) @ B.T + b
    assert np.allclose(x.mean(axis=0), img.mu, atol=0.02)
    assert np.allclose(np.cov(x.T), 6 / 4 * img.sigma, rtol=0.05, atol=0.05)
    m = d.marginal([1])
    assert m.sigma[0, 0] == 0.5
