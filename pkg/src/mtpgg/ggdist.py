"""Three-parameter generalized gamma distribution.

Density, moments, the family-specific mean offset, and exact random
sampling, plus the closed-form lognormal limit as a separate evaluation
path.  All gamma-function arithmetic goes through ``scipy.special.gammaln``;
the internal shape quantity 1/k**2 is never exponentiated on its own
because it exceeds 1e10 near the lognormal limit.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "K_EPS",
    "Family",
    "GGParams",
    "log_pdf",
    "log_pdf_logy",
    "lognormal_log_pdf",
    "lognormal_log_pdf_logy",
    "c_offset",
    "moment",
    "mean",
    "variance",
    "sample",
    "sample_at_locations",
    "lognormal_sample",
]

# Below this |k| the shape parameter is considered degenerate: Gamma(1/k**2)
# terms overflow and the mean offset suffers catastrophic cancellation, so
# all lognormal-limit evaluation goes through the dedicated functions below.
K_EPS = 1e-5

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class Family(str, enum.Enum):
    """Distribution family used for the continuous part of a two-part model.

    ``GAMMA`` (scale equal to shape), ``WEIBULL`` (shape fixed at one) and
    ``LOGNORMAL`` (shape sent to zero) are the nested reductions of ``GG``.
    """

    GG = "gg"
    GAMMA = "gamma"
    WEIBULL = "weibull"
    LOGNORMAL = "lognormal"


@dataclass(frozen=True)
class GGParams:
    """Parameters of the generalized gamma density.

    k is the shape, mu the location on the log-outcome scale, and sigma > 0
    the scale.  |k| must stay at or above ``K_EPS``; the k -> 0 limit is
    served by the ``lognormal_*`` functions, never by an actual zero shape.
    """

    k: float
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.k) and math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ValueError("GG parameters must be finite")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if abs(self.k) < K_EPS:
            raise ValueError(
                f"|k| must be >= {K_EPS}; use the lognormal functions for the k -> 0 limit"
            )


def log_pdf_logy(log_y, k, mu, sigma):
    """Log-density evaluated from precomputed log(y); no argument checks.

    Low-level kernel shared with the likelihood assembly, where log(y) for
    the positive outcomes is cached once per data set.  An overflow in the
    exp term means the density underflowed to zero and yields -inf.
    """
    eta = 1.0 / (k * k)
    u = math.copysign(1.0, k) * (log_y - mu) / sigma
    const = (eta - 0.5) * math.log(eta) - math.log(sigma) - gammaln(eta)
    with np.errstate(over="ignore"):
        return const - log_y + u / abs(k) - eta * np.exp(abs(k) * u)


def log_pdf(y, p: GGParams):
    """Log-density log f(y; k, mu, sigma) for y > 0, scalar or array.

    Evaluated entirely in log space (log-gamma terms, no raw gamma calls).
    Zero outcomes are a domain error here: the point mass at zero belongs
    to the binary part of a two-part model, not to this density.
    """
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    if np.any(y <= 0.0):
        raise ValueError("log_pdf requires y > 0; exact zeros belong to the binary part")
    out = log_pdf_logy(np.log(y), p.k, p.mu, p.sigma)
    return float(out) if np.ndim(out) == 0 else out


def lognormal_log_pdf_logy(log_y, mu, sigma):
    """Lognormal log-density from precomputed log(y); no argument checks."""
    z = (log_y - mu) / sigma
    return -_LOG_SQRT_2PI - math.log(sigma) - log_y - 0.5 * z * z


def lognormal_log_pdf(y, mu, sigma):
    """Log-density of the lognormal limit (log-mean mu, log-sd sigma)."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    if np.any(y <= 0.0):
        raise ValueError("lognormal_log_pdf requires y > 0")
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ValueError(f"sigma must be > 0, got {sigma}")
    out = lognormal_log_pdf_logy(np.log(y), mu, sigma)
    return float(out) if np.ndim(out) == 0 else out


def c_offset(sigma: float, k: float, family: Family) -> float:
    """Family-specific mean offset C with E(Y) = exp(mu + C).

    GG uses the full log-gamma expression, the gamma reduction collapses to
    zero, Weibull to log Gamma(1 + sigma), and the lognormal limit to
    sigma**2 / 2.  ``k`` is read only for the GG family.
    """
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ValueError(f"sigma must be > 0 and finite, got {sigma}")
    if family is Family.GAMMA:
        return 0.0
    if family is Family.WEIBULL:
        return float(gammaln(1.0 + sigma))
    if family is Family.LOGNORMAL:
        return 0.5 * sigma * sigma
    if not math.isfinite(k) or abs(k) < K_EPS:
        raise ValueError(f"GG offset needs |k| >= {K_EPS}, got {k}")
    eta = 1.0 / (k * k)
    arg = eta + sigma / k
    if arg <= 0.0:
        raise ValueError(
            f"moment offset undefined: gamma-function pole at 1/k^2 + sigma/k = {arg} <= 0"
        )
    return sigma * math.log(k * k) / k + float(gammaln(arg) - gammaln(eta))


def moment(p: GGParams, s: int) -> float:
    """Raw moment E(Y**s) for positive integer s, via log-gamma differences."""
    if s != int(s) or s < 1:
        raise ValueError(f"moment order must be a positive integer, got {s}")
    eta = 1.0 / (p.k * p.k)
    arg = eta + s * p.sigma / p.k
    if arg <= 0.0:
        raise ValueError(f"moment of order {s} does not exist: 1/k^2 + s*sigma/k = {arg} <= 0")
    return math.exp(
        s * p.mu + s * p.sigma * math.log(p.k * p.k) / p.k + float(gammaln(arg) - gammaln(eta))
    )


def mean(p: GGParams) -> float:
    """E(Y) = exp(mu + C(sigma, k))."""
    return math.exp(p.mu + c_offset(p.sigma, p.k, Family.GG))


def variance(p: GGParams) -> float:
    """Var(Y), assembled from the first two log-gamma moment ratios."""
    eta = 1.0 / (p.k * p.k)
    a1 = eta + p.sigma / p.k
    a2 = eta + 2.0 * p.sigma / p.k
    if a1 <= 0.0 or a2 <= 0.0:
        raise ValueError("variance does not exist: gamma-function pole in a moment term")
    log_scale = 2.0 * p.mu + 2.0 * p.sigma * math.log(p.k * p.k) / p.k
    d1 = float(gammaln(a1) - gammaln(eta))
    d2 = float(gammaln(a2) - gammaln(eta))
    return math.exp(log_scale + d2) - math.exp(log_scale + 2.0 * d1)


def _gg_transform(g, k, mu, sigma):
    # Gamma deviate G ~ Gamma(1/k^2, 1) maps exactly to the density via
    # exp(mu + sigma * log(k^2 G) / k), for either sign of k.
    return np.exp(mu + sigma * np.log(k * k * g) / k)


def sample(p: GGParams, rng: np.random.Generator, size=None):
    """Draw from the distribution via the exact gamma-deviate log transform.

    Mutates only the caller-supplied generator; concurrent use is safe with
    independent generators.
    """
    eta = 1.0 / (p.k * p.k)
    g = rng.gamma(shape=eta, scale=1.0, size=size)
    # For very small shapes the gamma deviate can underflow to exactly zero;
    # flooring at the smallest normal keeps the transform finite and moves
    # less mass than the 1e-300 quantile.
    g = np.maximum(g, np.finfo(float).tiny)
    return _gg_transform(g, p.k, p.mu, p.sigma)


def sample_at_locations(k, mu, sigma, rng: np.random.Generator):
    """One draw per entry of the location vector mu, shared shape and scale."""
    mu = np.asarray(mu, dtype=float)
    eta = 1.0 / (k * k)
    g = rng.gamma(shape=eta, scale=1.0, size=mu.shape)
    g = np.maximum(g, np.finfo(float).tiny)
    return _gg_transform(g, k, mu, sigma)


def lognormal_sample(mu, sigma, rng: np.random.Generator, size=None):
    """Draw from the lognormal limit; mu may be a scalar or a location vector."""
    mu = np.asarray(mu, dtype=float)
    if size is None and mu.ndim > 0:
        size = mu.shape
    return np.exp(mu + sigma * rng.standard_normal(size))
