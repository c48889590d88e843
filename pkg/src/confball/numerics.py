"""Special functions and root solvers used by every radius and bound.

Normal and chi-squared CDFs are thin wrappers over :mod:`scipy.special`.
Quantiles start from the scipy inverse, are bracketed, and finish with one
Newton step on the CDF so the accuracy contract does not depend on the
inverse's internal approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import special

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ThresholdConstant:
    """Root ``lam >= 1`` of ``lam - log(lam) = c``."""

    c: float
    lam: float

    @property
    def residual(self) -> float:
        return self.lam - math.log(self.lam) - self.c


def _check_finite(x: float, name: str = "x") -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x!r}")
    return x


def _check_probability(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p!r}")
    return p


def _check_dof(m: int) -> int:
    if int(m) != m or m < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {m!r}")
    return int(m)


def std_normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT_2PI


def std_normal_cdf(x: float) -> float:
    """Standard normal distribution function."""
    return float(special.ndtr(_check_finite(x)))


def std_normal_quantile(p: float) -> float:
    """Inverse of :func:`std_normal_cdf`.

    Callers wanting the upper point ``z_alpha`` pass ``1 - alpha``.
    """
    p = _check_probability(p)
    if p == 0.5:
        return 0.0
    # Work in the lower half and reflect, which makes the result exactly
    # antisymmetric and keeps the Newton step away from cancellation near 1.
    if p > 0.5:
        return -std_normal_quantile(1.0 - p)
    x = float(special.ndtri(p))
    pdf = std_normal_pdf(x)
    if pdf > 0.0:
        x -= (std_normal_cdf(x) - p) / pdf
    return x


def chi2_cdf(m: int, x: float) -> float:
    """P(X_m <= x) for a central chi-squared variable with ``m`` degrees of freedom."""
    m = _check_dof(m)
    x = _check_finite(x)
    if x < 0.0:
        raise ValueError(f"x must be nonnegative, got {x!r}")
    return float(special.gammainc(0.5 * m, 0.5 * x))


def chi2_sf(m: int, x: float) -> float:
    """Upper tail ``P(X_m > x)``, accurate where the CDF is close to one."""
    m = _check_dof(m)
    x = _check_finite(x)
    if x < 0.0:
        raise ValueError(f"x must be nonnegative, got {x!r}")
    return float(special.gammaincc(0.5 * m, 0.5 * x))


def chi2_pdf(m: int, x: float) -> float:
    if x <= 0.0:
        return 0.0 if m > 2 else (0.5 if m == 2 else math.inf)
    k = 0.5 * m
    return math.exp((k - 1.0) * math.log(x) - 0.5 * x - k * math.log(2.0) - math.lgamma(k))


def chi2_quantile(m: int, p: float) -> float:
    """Inverse of :func:`chi2_cdf` in ``x``."""
    m = _check_dof(m)
    p = _check_probability(p)
    x = 2.0 * float(special.gammaincinv(0.5 * m, p))
    # Bracket before refining; fall back to bisection if the start is off.
    lo, hi = x * (1 - 1e-6), x * (1 + 1e-6) + 1e-300
    if not (chi2_cdf(m, lo) <= p <= chi2_cdf(m, hi)):
        lo, hi = 0.0, max(1.0, 2.0 * m)
        while chi2_cdf(m, hi) < p:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if chi2_cdf(m, mid) < p:
                lo = mid
            else:
                hi = mid
        x = 0.5 * (lo + hi)
    pdf = chi2_pdf(m, x)
    if 0.0 < pdf < math.inf:
        step = (chi2_cdf(m, x) - p) / pdf
        if lo <= x - step <= hi:
            x -= step
    return x


def solve_lambda(c: float, max_iter: int = 200) -> ThresholdConstant:
    """Solve ``lam - log(lam) = c`` on the branch ``lam >= 1`` by bisection.

    The left side is increasing on ``[1, inf)`` with minimum 1 at ``lam = 1``,
    so a root exists iff ``c >= 1``. The bracket ``[1, c*e]`` always contains it.
    """
    c = _check_finite(c, "c")
    if c < 1.0:
        raise ValueError(f"lam - log(lam) = c has no root with lam >= 1 for c={c!r} < 1")
    if c == 1.0:
        return ThresholdConstant(c=c, lam=1.0)
    lo, hi = 1.0, c * math.e
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid - math.log(mid) < c:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * math.ulp(hi):
            break
    return ThresholdConstant(c=c, lam=0.5 * (lo + hi))


LAMBDA_STAR: float = solve_lambda(5.0).lam
"""Block threshold constant, the root of ``lam - log(lam) = 5`` (about 6.9368)."""
