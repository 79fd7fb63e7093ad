import math

import numpy as np
import pytest
from scipy import stats

from mtpgg.ggdist import (
    K_EPS,
    Family,
    GGParams,
    c_offset,
    log_pdf,
    lognormal_log_pdf,
    lognormal_sample,
    mean,
    moment,
    sample,
    sample_at_locations,
    variance,
)

# Reference values below were computed independently with mpmath at 30
# significant digits and frozen here.
ORACLE = GGParams(k=0.5, mu=0.3, sigma=0.8)
ORACLE_LOG_PDF_AT_1P5 = -1.1309346378739206524
ORACLE_MOMENT_1 = 1.5069428720228649079
ORACLE_MOMENT_2 = 3.7770627415761420405
ORACLE_VARIANCE = 1.5061859220356214366
ORACLE_C_HALF_SMALL_K = 0.12497291734368594042  # C(sigma=0.5, k=1e-4)


def test_log_pdf_matches_high_precision_value():
    assert math.isclose(log_pdf(1.5, ORACLE), ORACLE_LOG_PDF_AT_1P5, rel_tol=1e-13)


def test_moments_match_high_precision_values():
    assert math.isclose(moment(ORACLE, 1), ORACLE_MOMENT_1, rel_tol=1e-12)
    assert math.isclose(moment(ORACLE, 2), ORACLE_MOMENT_2, rel_tol=1e-12)
    assert math.isclose(variance(ORACLE), ORACLE_VARIANCE, rel_tol=1e-12)


def test_mean_and_variance_agree_with_raw_moments():
    for k, sigma in [(0.5, 0.8), (2.0, 0.3), (-0.5, 0.4), (1.0, 1.0), (3.0, 0.2)]:
        p = GGParams(k=k, mu=0.7, sigma=sigma)
        m1, m2 = moment(p, 1), moment(p, 2)
        assert math.isclose(mean(p), m1, rel_tol=1e-10)
        assert math.isclose(variance(p), m2 - m1 * m1, rel_tol=1e-10)


def test_unit_parameters_reduce_to_standard_exponential():
    p = GGParams(k=1.0, mu=0.0, sigma=1.0)
    assert math.isclose(log_pdf(1.0, p), -1.0, rel_tol=1e-14)
    assert math.isclose(log_pdf(2.0, p), -2.0, rel_tol=1e-14)


def test_k_equal_sigma_reduces_to_gamma():
    """With k = sigma = c the density is Gamma(1/c^2, scale c^2 e^mu)."""
    rng = np.random.default_rng(7)
    for c, mu in [(0.5, 0.0), (1.3, 0.4), (2.0, -0.6)]:
        p = GGParams(k=c, mu=mu, sigma=c)
        y = rng.uniform(0.05, 8.0, size=50)
        want = stats.gamma.logpdf(y, a=1.0 / c**2, scale=c**2 * math.exp(mu))
        np.testing.assert_allclose(log_pdf(y, p), want, rtol=1e-12)


def test_k_equal_one_reduces_to_weibull():
    """With k = 1 the density is Weibull(shape 1/sigma, scale e^mu)."""
    rng = np.random.default_rng(8)
    for sigma, mu in [(0.5, 0.0), (1.0, 0.3), (2.5, -0.2)]:
        p = GGParams(k=1.0, mu=mu, sigma=sigma)
        y = rng.uniform(0.05, 8.0, size=50)
        want = stats.weibull_min.logpdf(y, c=1.0 / sigma, scale=math.exp(mu))
        np.testing.assert_allclose(log_pdf(y, p), want, rtol=1e-12)


def test_small_k_approaches_lognormal():
    p = GGParams(k=K_EPS, mu=0.4, sigma=0.6)
    y = np.array([0.2, 0.7, 1.5, 4.0])
    np.testing.assert_allclose(log_pdf(y, p), lognormal_log_pdf(y, 0.4, 0.6), atol=1e-4)


def test_c_offset_family_dispatch():
    assert c_offset(0.7, 0.7, Family.GAMMA) == 0.0
    assert math.isclose(c_offset(2.0, 1.0, Family.WEIBULL), math.lgamma(3.0), rel_tol=1e-14)
    assert c_offset(0.5, 0.0, Family.LOGNORMAL) == 0.125
    # GG at k = sigma collapses to the gamma value through Gamma(z + 1) = z Gamma(z)
    assert abs(c_offset(0.7, 0.7, Family.GG)) < 1e-12


def test_c_offset_small_k_matches_lognormal_limit():
    got = c_offset(0.5, 1e-4, Family.GG)
    # cancellation between the two lgamma terms (arguments near 1e8) caps
    # double-precision accuracy around 1e-7 here
    assert abs(got - ORACLE_C_HALF_SMALL_K) < 1e-6
    assert abs(got - 0.125) < 1e-4


def test_c_offset_pole_raises():
    # eta + sigma/k = 1 - 1 = 0 at k = -1, sigma = 1
    with pytest.raises(ValueError, match="pole"):
        c_offset(1.0, -1.0, Family.GG)
    with pytest.raises(ValueError, match="does not exist"):
        moment(GGParams(k=-1.0, mu=0.0, sigma=2.0), 1)


def test_negative_k_moments_exist_when_pole_is_avoided():
    p = GGParams(k=-0.5, mu=0.0, sigma=0.4)
    assert moment(p, 1) > 0.0
    assert variance(p) > 0.0


def test_parameter_validation():
    with pytest.raises(ValueError):
        GGParams(k=1.0, mu=0.0, sigma=0.0)
    with pytest.raises(ValueError):
        GGParams(k=0.0, mu=0.0, sigma=1.0)
    with pytest.raises(ValueError):
        GGParams(k=math.nan, mu=0.0, sigma=1.0)
    with pytest.raises(ValueError):
        log_pdf(0.0, ORACLE)
    with pytest.raises(ValueError):
        log_pdf(-1.0, ORACLE)
    with pytest.raises(ValueError):
        moment(ORACLE, 0)


def test_sample_is_positive_and_deterministic():
    draws = sample(ORACLE, np.random.default_rng(123), size=1000)
    again = sample(ORACLE, np.random.default_rng(123), size=1000)
    assert draws.shape == (1000,)
    assert np.all(draws > 0.0)
    np.testing.assert_array_equal(draws, again)


@pytest.mark.parametrize(
    "k,sigma",
    [(0.5, 0.8), (1.0, 0.5), (2.0, 0.3), (-0.5, 0.4), (3.0, 0.5)],
)
def test_sample_mean_tracks_analytic_mean(k, sigma):
    p = GGParams(k=k, mu=0.2, sigma=sigma)
    draws = sample(p, np.random.default_rng(42), size=200_000)
    se = math.sqrt(variance(p) / draws.size)
    assert abs(draws.mean() - mean(p)) < 5.0 * se


def test_sample_at_locations_matches_scalar_path():
    mu = np.array([0.0, 0.5, 1.0])
    a = sample_at_locations(0.7, mu, 0.4, np.random.default_rng(5))
    assert a.shape == (3,)
    assert np.all(a > 0.0)
    # same gamma deviates, so each entry equals a scalar-parameter draw
    g = np.random.default_rng(5).gamma(shape=1.0 / 0.49, scale=1.0, size=3)
    want = np.exp(mu + 0.4 * np.log(0.49 * g) / 0.7)
    np.testing.assert_allclose(a, want, rtol=1e-14)


def test_lognormal_sample_moments():
    draws = lognormal_sample(0.3, 0.5, np.random.default_rng(11), size=200_000)
    want_mean = math.exp(0.3 + 0.125)
    want_var = (math.exp(0.25) - 1.0) * math.exp(0.6 + 0.25)
    assert abs(draws.mean() - want_mean) < 5.0 * math.sqrt(want_var / draws.size)


def test_lognormal_sample_with_location_vector():
    mu = np.array([0.0, 1.0])
    a = lognormal_sample(mu, 0.3, np.random.default_rng(2))
    b = lognormal_sample(mu, 0.3, np.random.default_rng(2))
    assert a.shape == (2,)
    np.testing.assert_array_equal(a, b)
