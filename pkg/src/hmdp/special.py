"""Closed-form expectations of basis factors under beta transitions.

Everything works in log space so that large shape parameters (the
irrigation model reaches alpha + beta = 50 and beyond) stay finite.  All
kernels broadcast over array-valued ``alpha`` and ``beta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special as sp

from .errors import DomainError

ArrayLike = "np.ndarray | float"

# (left, right, slope, intercept): indicator[l, r] * (slope * x + intercept)
Segment = tuple[float, float, float, float]


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError(f"beta parameters must be positive, got {self}")


def _positive(name: str, value) -> np.ndarray:
    v = np.asarray(value, dtype=float)
    if not np.all(v > 0):
        raise DomainError(f"{name} must be positive, got min {np.min(v)!r}")
    return v


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    return sp.gammaln(_positive("argument of log_gamma", x))


def log_beta_fn(a, b):
    return log_gamma(a) + log_gamma(b) - log_gamma(np.asarray(a) + np.asarray(b))


def beta_cdf(u, alpha, beta):
    """Regularized incomplete beta I_u(alpha, beta)."""
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)) or np.any(np.isnan(u)):
        raise DomainError("beta_cdf argument must lie in [0, 1]")
    return sp.betainc(_positive("alpha", alpha), _positive("beta", beta), u)


def beta_pdf(x, alpha, beta):
    """Beta density; finite on the open interval, edges handled by xlogy."""
    x = np.asarray(x, dtype=float)
    a = _positive("alpha", alpha)
    b = _positive("beta", beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = sp.xlogy(a - 1.0, x) + sp.xlog1py(b - 1.0, -x) - log_beta_fn(a, b)
        out = np.exp(logp)
    return np.where((x < 0) | (x > 1), 0.0, out)


def expect_monomial(alpha, beta, n: int, m: int):
    """E[x^n (1-x)^m] for x ~ Beta(alpha, beta)."""
    if n < 0 or m < 0:
        raise DomainError("monomial exponents must be non-negative")
    a = _positive("alpha", alpha)
    b = _positive("beta", beta)
    return np.exp(
        log_gamma(a + b) - log_gamma(a) - log_gamma(b)
        + log_gamma(a + n) + log_gamma(b + m) - log_gamma(a + b + n + m)
    )


def expect_beta_pdf(alpha, beta, alpha_f, beta_f):
    """E[Beta(x | alpha_f, beta_f)] for x ~ Beta(alpha, beta)."""
    a = _positive("alpha", alpha)
    b = _positive("beta", beta)
    af = _positive("alpha_f", alpha_f)
    bf = _positive("beta_f", beta_f)
    if np.any(a + af <= 1) or np.any(b + bf <= 1):
        raise DomainError("expectation of a beta-pdf factor diverges (alpha+alpha_f <= 1)")
    return np.exp(
        log_gamma(a + b) - log_gamma(a) - log_gamma(b)
        + log_gamma(af + bf) - log_gamma(af) - log_gamma(bf)
        + log_gamma(a + af - 1) + log_gamma(b + bf - 1)
        - log_gamma(a + af + b + bf - 2)
    )


def check_segments(segments: Sequence[Segment]) -> None:
    for seg in segments:
        if len(seg) != 4:
            raise DomainError(f"segment must be (l, r, slope, intercept), got {seg!r}")
        left, right = seg[0], seg[1]
        if not (0.0 <= left <= right <= 1.0):
            raise DomainError(f"segment bounds must satisfy 0 <= l <= r <= 1, got {seg!r}")


def expect_pwl(alpha, beta, segments: Sequence[Segment]):
    """E[sum_i I[l_i, r_i](x) (a_i x + b_i)] for x ~ Beta(alpha, beta)."""
    check_segments(segments)
    a = _positive("alpha", alpha)
    b = _positive("beta", beta)
    knots = sorted({s[0] for s in segments} | {s[1] for s in segments})
    k = np.asarray(knots)[(...,) + (None,) * np.ndim(a + b)]
    cdf = sp.betainc(a, b, k)
    cdf_plus = sp.betainc(a + 1.0, b, k)
    mean = a / (a + b)
    where = {u: i for i, u in enumerate(knots)}
    out = np.zeros(np.broadcast(a, b).shape)
    for left, right, slope, icpt in segments:
        i, j = where[left], where[right]
        if slope:
            out = out + slope * mean * (cdf_plus[j] - cdf_plus[i])
        if icpt:
            out = out + icpt * (cdf[j] - cdf[i])
    return out


def pwl_eval(x, segments: Sequence[Segment]):
    """Pointwise value of a PWL factor.

    Intervals are treated as half-open [l, r) except when r == 1, so two
    segments that share a knot are not double counted there.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for left, right, slope, icpt in segments:
        inside = (x >= left) & ((x < right) | ((right == 1.0) & (x <= right)))
        out = out + np.where(inside, slope * x + icpt, 0.0)
    return out


def expect_mixture(weights, alphas, betas, kernel):
    """sum_j w_j kernel(alpha_j, beta_j) for a beta mixture."""
    total = 0.0
    for w, a, b in zip(weights, alphas, betas):
        total = total + w * kernel(a, b)
    return total
