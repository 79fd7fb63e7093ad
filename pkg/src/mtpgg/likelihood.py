"""Two-part and marginalized two-part log-likelihood assembly.

A two-part model couples a logistic occurrence part (zero versus positive)
with a positive continuous density.  The marginalized variant re-expresses
the continuous-part location so the regression coefficients act on the
overall mean, zeros included: mu_i = x_i'beta - log(pi_i) - C(sigma, k).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as _sp_expit
from scipy.special import log_expit

from .ggdist import (
    K_EPS,
    Family,
    c_offset,
    log_pdf_logy,
    lognormal_log_pdf_logy,
)

__all__ = [
    "Dataset",
    "MtpParams",
    "TpParams",
    "StructuralDataError",
    "expit",
    "mtp_location",
    "mtp_loglik",
    "tp_loglik",
    "tp_marginal_mean",
    "mtp_marginal_mean",
]

_TINY = np.finfo(float).tiny
_ONE_MINUS = 1.0 - np.finfo(float).epsneg  # largest double below 1


class StructuralDataError(ValueError):
    """The outcome lacks the zero/positive mix a two-part fit requires."""


@dataclass
class Dataset:
    """Outcome vector plus the two design matrices.

    y holds nonnegative outcomes; X is the continuous-part design and Z the
    binary-part design, each with a leading intercept column and one row per
    outcome.  The zero/positive split and log(y) for the positive rows are
    cached here because every likelihood evaluation needs them.
    """

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    _pos: np.ndarray = field(init=False, repr=False)
    _X_pos: np.ndarray = field(init=False, repr=False)
    _Z_pos: np.ndarray = field(init=False, repr=False)
    _Z_zero: np.ndarray = field(init=False, repr=False)
    _log_y_pos: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        if y.ndim != 1:
            raise ValueError("y must be a one-dimensional vector")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
        if np.any(y < 0.0):
            raise ValueError("y must be nonnegative")
        if X.shape[0] != y.size or Z.shape[0] != y.size:
            raise ValueError(
                f"design row counts ({X.shape[0]}, {Z.shape[0]}) must match len(y) = {y.size}"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Z))):
            raise ValueError("design matrices contain non-finite values")
        self.y, self.X, self.Z = y, X, Z
        self._pos = y > 0.0
        self._X_pos = X[self._pos]
        self._Z_pos = Z[self._pos]
        self._Z_zero = Z[~self._pos]
        self._log_y_pos = np.log(y[self._pos])

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def n_zero(self) -> int:
        return self.n - self._Z_pos.shape[0]

    @property
    def n_positive(self) -> int:
        return self._Z_pos.shape[0]


def _normalize_aux(sigma, k, family: Family, *, k_given: bool) -> float:
    """Validate the family constraint on (sigma, k) and return the stored k."""
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ValueError(f"sigma must be > 0 and finite, got {sigma}")
    if family is Family.GAMMA:
        if k_given and k != sigma:
            raise ValueError(f"gamma family forces k = sigma, got k={k}, sigma={sigma}")
        return float(sigma)
    if family is Family.WEIBULL:
        if k_given and k != 1.0:
            raise ValueError(f"weibull family forces k = 1, got k={k}")
        return 1.0
    if family is Family.LOGNORMAL:
        if k_given and k != 0.0:
            raise ValueError("lognormal family uses only sigma; leave k unset")
        return 0.0
    if not k_given:
        raise ValueError("gg family needs an explicit k")
    if not math.isfinite(k) or abs(k) < K_EPS:
        raise ValueError(f"gg family needs finite |k| >= {K_EPS}, got {k}")
    return float(k)


def _as_coef(v, name):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a nonempty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return v


@dataclass(frozen=True)
class MtpParams:
    """Marginalized-model parameters: binary part alpha, marginal-mean beta,
    and the family-constrained auxiliaries (sigma, k)."""

    alpha: np.ndarray
    beta: np.ndarray
    sigma: float
    family: Family
    k: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", _as_coef(self.alpha, "alpha"))
        object.__setattr__(self, "beta", _as_coef(self.beta, "beta"))
        k = _normalize_aux(self.sigma, self.k, self.family, k_given=self.k is not None)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n_free(self) -> int:
        aux = 2 if self.family is Family.GG else 1
        return self.alpha.size + self.beta.size + aux


@dataclass(frozen=True)
class TpParams:
    """Conventional two-part parameters: alpha as above, delta acting on the
    conditional (positive-part) location directly."""

    alpha: np.ndarray
    delta: np.ndarray
    sigma: float
    family: Family
    k: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", _as_coef(self.alpha, "alpha"))
        object.__setattr__(self, "delta", _as_coef(self.delta, "delta"))
        k = _normalize_aux(self.sigma, self.k, self.family, k_given=self.k is not None)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n_free(self) -> int:
        aux = 2 if self.family is Family.GG else 1
        return self.alpha.size + self.delta.size + aux


def expit(t):
    """Inverse logit 1/(1 + exp(-t)), overflow-safe and clipped to (0, 1).

    The clip keeps saturated probabilities strictly inside the open unit
    interval so downstream logs stay finite.
    """
    out = np.clip(_sp_expit(np.asarray(t, dtype=float)), _TINY, _ONE_MINUS)
    return float(out) if np.ndim(out) == 0 else out


def mtp_location(xb, pi, C):
    """Continuous-part location pinning the marginal mean: xb - log(pi) - C."""
    pi = np.asarray(pi, dtype=float)
    if np.any(pi <= 0.0):
        raise ValueError("pi must be positive")
    out = np.asarray(xb, dtype=float) - np.log(pi) - C
    return float(out) if np.ndim(out) == 0 else out


def _two_part_loglik(d: Dataset, a, b, sigma, k, family: Family, marginalized: bool) -> float:
    """Shared kernel; returns a -inf sentinel instead of NaN on bad input."""
    if not (
        np.all(np.isfinite(a))
        and np.all(np.isfinite(b))
        and math.isfinite(sigma)
        and sigma > 0.0
        and math.isfinite(k)
    ):
        return -np.inf
    # k*k can underflow at line-search extremes (gamma ties k to sigma),
    # leaving the shape 1/k^2 zero-divided or overflowed; reject the step
    if family is not Family.LOGNORMAL:
        kk = k * k
        if kk == 0.0 or not math.isfinite(1.0 / kk):
            return -np.inf
    try:
        C = c_offset(sigma, k, family)
    except ValueError:
        # gamma-function pole at this trial point: reject the step
        return -np.inf
    zero_sum = float(np.sum(log_expit(-(d._Z_zero @ a))))
    log_pi = log_expit(d._Z_pos @ a)
    mu = d._X_pos @ b
    if marginalized:
        mu = mu - log_pi - C
    if family is Family.LOGNORMAL:
        dens = lognormal_log_pdf_logy(d._log_y_pos, mu, sigma)
    else:
        dens = log_pdf_logy(d._log_y_pos, k, mu, sigma)
    total = zero_sum + float(np.sum(log_pi)) + float(np.sum(dens))
    return total if math.isfinite(total) else -np.inf


def mtp_loglik(d: Dataset, p: MtpParams) -> float:
    """Marginalized two-part log-likelihood over zero and positive rows."""
    return _two_part_loglik(d, p.alpha, p.beta, p.sigma, p.k, p.family, marginalized=True)


def tp_loglik(d: Dataset, p: TpParams) -> float:
    """Conventional two-part log-likelihood with mu_i = x_i'delta."""
    return _two_part_loglik(d, p.alpha, p.delta, p.sigma, p.k, p.family, marginalized=False)


def tp_marginal_mean(x, z, p: TpParams) -> float:
    """Overall mean implied by a two-part fit: expit(z'alpha) * exp(x'delta + C)."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    C = c_offset(p.sigma, p.k, p.family)
    return float(expit(z @ p.alpha) * math.exp(float(x @ p.delta) + C))


def mtp_marginal_mean(x, beta) -> float:
    """Overall mean of the marginalized model: exp(x'beta)."""
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    return float(math.exp(float(x @ beta)))
