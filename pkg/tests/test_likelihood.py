import math

import numpy as np
import pytest

from mtpgg.ggdist import K_EPS, Family, c_offset
from mtpgg.likelihood import (
    Dataset,
    MtpParams,
    TpParams,
    expit,
    mtp_location,
    mtp_loglik,
    mtp_marginal_mean,
    tp_loglik,
    tp_marginal_mean,
)

# Five-row hand example used throughout: two zeros, three positives, one
# binary covariate shared by both design matrices.
Y = np.array([0.0, 1.0, 2.0, 0.0, 0.5])
B = np.array([0.0, 1.0, 0.0, 1.0, 1.0])
DESIGN = np.column_stack([np.ones(5), B])
ALPHA = np.array([0.2, -0.1])
COEF = np.array([0.4, 0.3])

# Log-likelihoods for the hand example at sigma = 1, k = 1 (offset C = 0),
# computed independently with mpmath at 30 significant digits.
ORACLE_MTP_LOGLIK = -8.2445748332411446423
ORACLE_TP_LOGLIK = -7.3149857667422892374


def hand_dataset() -> Dataset:
    return Dataset(y=Y, X=DESIGN, Z=DESIGN)


def test_dataset_split_counts():
    d = hand_dataset()
    assert d.n == 5
    assert d.n_zero == 2
    assert d.n_positive == 3
    np.testing.assert_array_equal(d._log_y_pos, np.log([1.0, 2.0, 0.5]))
    np.testing.assert_array_equal(d._Z_zero[:, 1], [0.0, 1.0])


def test_dataset_validation():
    with pytest.raises(ValueError, match="nonnegative"):
        Dataset(y=np.array([1.0, -0.5]), X=np.ones((2, 1)), Z=np.ones((2, 1)))
    with pytest.raises(ValueError, match="non-finite"):
        Dataset(y=np.array([1.0, math.nan]), X=np.ones((2, 1)), Z=np.ones((2, 1)))
    with pytest.raises(ValueError, match="row counts"):
        Dataset(y=Y, X=DESIGN[:4], Z=DESIGN)
    with pytest.raises(ValueError, match="non-finite"):
        bad = DESIGN.copy()
        bad[0, 1] = math.inf
        Dataset(y=Y, X=bad, Z=DESIGN)


def test_mtp_loglik_matches_hand_value():
    p = MtpParams(alpha=ALPHA, beta=COEF, sigma=1.0, family=Family.GG, k=1.0)
    assert math.isclose(mtp_loglik(hand_dataset(), p), ORACLE_MTP_LOGLIK, rel_tol=1e-13)


def test_tp_loglik_matches_hand_value():
    p = TpParams(alpha=ALPHA, delta=COEF, sigma=1.0, family=Family.GG, k=1.0)
    assert math.isclose(tp_loglik(hand_dataset(), p), ORACLE_TP_LOGLIK, rel_tol=1e-13)


def test_family_constraints_fill_in_k():
    gamma = MtpParams(alpha=ALPHA, beta=COEF, sigma=0.7, family=Family.GAMMA)
    assert gamma.k == 0.7
    weib = MtpParams(alpha=ALPHA, beta=COEF, sigma=0.7, family=Family.WEIBULL)
    assert weib.k == 1.0
    ln = MtpParams(alpha=ALPHA, beta=COEF, sigma=0.7, family=Family.LOGNORMAL)
    assert ln.k == 0.0
    with pytest.raises(ValueError, match="explicit k"):
        MtpParams(alpha=ALPHA, beta=COEF, sigma=0.7, family=Family.GG)
    with pytest.raises(ValueError, match="forces k"):
        MtpParams(alpha=ALPHA, beta=COEF, sigma=0.7, family=Family.GAMMA, k=0.5)
    with pytest.raises(ValueError):
        TpParams(alpha=ALPHA, delta=COEF, sigma=0.7, family=Family.GG, k=K_EPS / 2)


def test_free_parameter_counts():
    gg = MtpParams(alpha=ALPHA, beta=COEF, sigma=1.0, family=Family.GG, k=2.0)
    assert gg.n_free == 6
    assert MtpParams(alpha=ALPHA, beta=COEF, sigma=1.0, family=Family.GAMMA).n_free == 5
    assert TpParams(alpha=ALPHA, delta=COEF, sigma=1.0, family=Family.LOGNORMAL).n_free == 5


def test_nested_families_give_identical_loglik():
    """gamma and weibull are the k = sigma and k = 1 slices of the full model."""
    d = hand_dataset()
    for sigma in (0.6, 1.0, 1.7):
        gg_gamma = MtpParams(alpha=ALPHA, beta=COEF, sigma=sigma, family=Family.GG, k=sigma)
        gamma = MtpParams(alpha=ALPHA, beta=COEF, sigma=sigma, family=Family.GAMMA)
        assert math.isclose(mtp_loglik(d, gg_gamma), mtp_loglik(d, gamma), rel_tol=1e-12)
        gg_weib = MtpParams(alpha=ALPHA, beta=COEF, sigma=sigma, family=Family.GG, k=1.0)
        weib = MtpParams(alpha=ALPHA, beta=COEF, sigma=sigma, family=Family.WEIBULL)
        assert math.isclose(mtp_loglik(d, gg_weib), mtp_loglik(d, weib), rel_tol=1e-12)


def test_lognormal_family_is_small_k_limit():
    d = hand_dataset()
    gg = MtpParams(alpha=ALPHA, beta=COEF, sigma=0.8, family=Family.GG, k=K_EPS)
    ln = MtpParams(alpha=ALPHA, beta=COEF, sigma=0.8, family=Family.LOGNORMAL)
    assert math.isclose(mtp_loglik(d, gg), mtp_loglik(d, ln), abs_tol=1e-3)


def test_loglik_is_additive_over_rows():
    p = MtpParams(alpha=ALPHA, beta=COEF, sigma=0.9, family=Family.GG, k=0.6)
    whole = mtp_loglik(hand_dataset(), p)
    parts = 0.0
    for i in range(5):
        parts += mtp_loglik(Dataset(y=Y[i : i + 1], X=DESIGN[i : i + 1], Z=DESIGN[i : i + 1]), p)
    assert math.isclose(whole, parts, rel_tol=1e-12)


def test_loglik_returns_neg_inf_not_nan_on_bad_points():
    d = hand_dataset()
    base = dict(alpha=ALPHA, beta=COEF, family=Family.GG)
    # pole: 1/k^2 + sigma/k = 0 at k = -1, sigma = 1
    assert mtp_loglik(d, MtpParams(sigma=1.0, k=-1.0, **base)) == -math.inf
    p = MtpParams(sigma=1.0, k=1.0, **base)
    object.__setattr__(p, "sigma", math.nan)
    assert mtp_loglik(d, p) == -math.inf
    object.__setattr__(p, "sigma", -2.0)
    assert mtp_loglik(d, p) == -math.inf


def test_extreme_linear_predictors_stay_finite():
    d = hand_dataset()
    big = MtpParams(alpha=np.array([800.0, 0.0]), beta=COEF, sigma=1.0, family=Family.GG, k=1.0)
    out = mtp_loglik(d, big)
    assert math.isfinite(out) or out == -math.inf
    assert not math.isnan(out)


def test_gamma_shape_underflow_rejected_not_raised():
    # gamma ties k to sigma, and sigma**2 underflows to 0.0 below ~1e-154;
    # such a trial point must evaluate to -inf, not divide by zero
    d = hand_dataset()
    for sigma in (1e-200, 1e-170):
        p = MtpParams(alpha=ALPHA, beta=COEF, sigma=sigma, family=Family.GAMMA)
        assert mtp_loglik(d, p) == -math.inf


def test_expit_stays_inside_open_interval():
    assert 0.0 < expit(-800.0)
    assert expit(800.0) < 1.0
    assert math.isclose(expit(0.0), 0.5, rel_tol=1e-15)
    v = expit(np.array([-50.0, 0.0, 50.0]))
    assert v.shape == (3,)
    assert np.all((v > 0.0) & (v < 1.0))


def test_mtp_location_rejects_nonpositive_pi():
    with pytest.raises(ValueError, match="positive"):
        mtp_location(1.0, 0.0, 0.5)
    assert math.isclose(mtp_location(1.0, 0.5, 0.2), 1.0 - math.log(0.5) - 0.2, rel_tol=1e-15)


def test_marginalized_location_reproduces_overall_mean():
    """pi * exp(mu_i + C) must collapse to exp(x'beta) by construction."""
    rng = np.random.default_rng(3)
    for k, sigma in [(0.5, 0.8), (1.0, 1.0), (2.0, 0.4), (-0.4, 0.3)]:
        C = c_offset(sigma, k, Family.GG)
        for _ in range(20):
            x = np.array([1.0, rng.normal(), rng.integers(0, 2)])
            z = np.array([1.0, rng.normal(), rng.integers(0, 2)])
            alpha = rng.normal(size=3)
            beta = rng.normal(size=3) * 0.5
            pi = expit(z @ alpha)
            mu = mtp_location(x @ beta, pi, C)
            assert math.isclose(pi * math.exp(mu + C), mtp_marginal_mean(x, beta), rel_tol=1e-12)


def test_tp_marginal_mean_formula():
    p = TpParams(alpha=ALPHA, delta=COEF, sigma=0.5, family=Family.WEIBULL)
    x = np.array([1.0, 1.0])
    want = expit(0.1) * math.exp(0.7 + math.lgamma(1.5))
    assert math.isclose(tp_marginal_mean(x, x, p), want, rel_tol=1e-14)
