"""Closed-form lower bounds, lemma inequalities and the adaptation-range table.

Everything here is a pure function of its arguments. Monte-Carlo checks that
use these functions live in :mod:`confball.harness`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blocks import level_block_energies
from .numerics import LAMBDA_STAR, ThresholdConstant, solve_lambda, std_normal_cdf, std_normal_quantile
from .sequence import BesovBody, CoefficientVector


@dataclass(frozen=True)
class LowerBoundParams:
    """Confidence level ``alpha`` and slack ``eps`` shared by the lower bounds."""

    alpha: float
    eps: float
    M_prime: float | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise ValueError(f"alpha must lie in (0, 1/2), got {self.alpha!r}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps!r}")

    @property
    def gamma(self) -> float:
        return math.log1p(self.eps**2)

    def z(self) -> float:
        """``z_{alpha + 2 eps}``, the upper ``alpha + 2 eps`` normal point."""
        return std_normal_quantile(1.0 - (self.alpha + 2 * self.eps))

    def require_max_bound(self) -> None:
        if not self.eps < 0.5 * (0.5 - self.alpha):
            raise ValueError(f"eps must be < (1/2 - alpha)/2 = {0.5 * (0.5 - self.alpha)!r}, got {self.eps!r}")

    def require_zero_bound(self) -> None:
        if not self.eps < 0.5 - self.alpha:
            raise ValueError(f"eps must be < 1/2 - alpha = {0.5 - self.alpha!r}, got {self.eps!r}")


def lb_single_level_max(body: BesovBody, j: int, n: int, params: LowerBoundParams) -> float:
    """Floor on the worst-case expected squared radius at one level."""
    params.require_max_bound()
    a, e = params.alpha, params.eps
    z = params.z()
    return e**2 / (1 - a - e) * min(body.M**2 * 2.0 ** (-2 * body.beta * j), z**2 * 2.0**j / n)


def lb_single_level_zero(body: BesovBody, j: int, n: int, params: LowerBoundParams) -> float:
    """Floor on the expected squared radius at ``theta = 0`` for one level."""
    params.require_zero_bound()
    a, e = params.alpha, params.eps
    return 0.25 * (1 - 2 * a - 2 * e) * min(
        body.M**2 * 2.0 ** (-2 * body.beta * j), math.sqrt(params.gamma) * 2.0 ** (j / 2) / n
    )


def lb_global_max(body: BesovBody, N: int, n: int, params: LowerBoundParams) -> float:
    """Floor on the worst-case expected squared radius for the whole vector.

    The second branch carries a ``z**(-2q/(1+2 beta))`` factor, so it depends on ``q``.
    """
    params.require_max_bound()
    a, e = params.alpha, params.eps
    z = params.z()
    b = body.beta
    second = z ** (-2 * body.q / (1 + 2 * b)) * body.M ** (2 / (1 + 2 * b)) * n ** (-2 * b / (1 + 2 * b))
    return e**2 / (1 - a - e) * z**2 * min(N / n, second)


def lb_b_eps(body: BesovBody, M_prime: float, N: int, n: int, params: LowerBoundParams) -> float:
    """Radius ``b_eps`` exceeded with probability ``>= 1 - 2 alpha - 2 eps`` inside ``B(M')``."""
    params.require_zero_bound()
    if not 0 < M_prime < body.M:
        raise ValueError(f"need 0 < M' < M = {body.M}, got {M_prime!r}")
    b, g = body.beta, params.gamma
    first = 2.0 ** (-1 / (2 * (1 + 4 * b)) - 1) * g ** (b / (1 + 4 * b)) * (body.M - M_prime) ** (1 / (1 + 4 * b)) * n ** (-2 * b / (1 + 4 * b))
    second = 0.5 * g**0.25 * N**0.25 * n**-0.5
    return min(first, second)


def lb_min_radius_sq(body: BesovBody, M_prime: float, N: int, n: int, params: LowerBoundParams) -> float:
    """``(1 - 2 alpha - 2 eps) b_eps**2``, the floor on ``E r**2`` inside ``B(M')``."""
    return (1 - 2 * params.alpha - 2 * params.eps) * lb_b_eps(body, M_prime, N, n, params) ** 2


def lb_honest_zero(N: int, n: int, params: LowerBoundParams) -> float:
    """Floor on ``E_0 r**2`` for any ball with coverage over ``R^N``."""
    params.require_zero_bound()
    a, e = params.alpha, params.eps
    return (1 - 2 * a - 2 * e) / 4 * math.sqrt(params.gamma) * math.sqrt(N) / n


# Hypercube and mixture machinery behind the lower bounds.

def bayes_cube_rule(y, a: float) -> np.ndarray:
    """Bayes estimate over ``{+-a}^m`` under the uniform prior: ``+a`` iff ``y_i >= 0``."""
    if not a > 0:
        raise ValueError(f"a must be positive, got {a!r}")
    return np.where(np.asarray(y, dtype=float) >= 0, a, -a)


def bayes_cube_risk(m: int, a: float, sigma: float) -> float:
    """Expected number of misclassified coordinates, ``m * Phi(-a/sigma)``."""
    if m < 1 or not a > 0 or not sigma > 0:
        raise ValueError("need m >= 1, a > 0, sigma > 0")
    return std_normal_cdf(-a / sigma) * m


def l1_mixture_bound(k: int, a: float, n: int) -> float:
    """``sqrt(exp(k a^4 n^2) - 1)``: L1 distance bound between ``P_0`` and ``P_k``."""
    if k < 1 or a < 0:
        raise ValueError("need k >= 1 and a >= 0")
    expo = k * a**4 * n**2
    if expo > 700:
        raise OverflowError(f"k a^4 n^2 = {expo:g} is too large to exponentiate")
    return math.sqrt(math.expm1(expo))


def _log_cosh(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2 * ax)) - math.log(2.0)


def mixture_density_ratio(y, k: int, a: float, n: int) -> float | np.ndarray:
    """Likelihood ratio ``dP_k/dP_0`` at ``y``.

    ``y`` is a :class:`CoefficientVector` or an array whose last axis holds the
    coordinates in level-major order; leading axes are treated as a batch.
    """
    arr = y.values if isinstance(y, CoefficientVector) else np.asarray(y, dtype=float)
    if k > arr.shape[-1]:
        raise ValueError(f"k = {k} exceeds the dimension {arr.shape[-1]}")
    head = arr[..., :k]
    log_ratio = np.sum(_log_cosh(n * a * head), axis=-1) - k * n * a**2 / 2
    out = np.exp(log_ratio)
    return float(out) if np.ndim(out) == 0 else out


def chi2_tail_upper(m: int, d: float) -> float:
    """Bound on ``P(X_m >= (1 + d) m)``."""
    if m < 1 or not d > 0:
        raise ValueError("need m >= 1 and d > 0")
    return 0.5 * math.exp(-(m / 2) * (d - math.log1p(d)))


def chi2_tail_upper_poly(m: int, d: float) -> float:
    """Weaker polynomial-exponent form of :func:`chi2_tail_upper`."""
    if m < 1 or not d > 0:
        raise ValueError("need m >= 1 and d > 0")
    expo = -0.25 * d**2 * m + d**3 * m / 6
    # Past the float range the bound is vacuous anyway.
    return math.inf if expo > 700 else 0.5 * math.exp(expo)


def chi2_tail_lower(m: int, d: float) -> float:
    """Bound on ``P(X_m <= (1 - d) m)`` for ``0 < d < 1``."""
    if m < 1 or not 0 < d < 1:
        raise ValueError("need m >= 1 and 0 < d < 1")
    return math.exp(-0.25 * d**2 * m)


def lemma4_tau_threshold(tau: float) -> ThresholdConstant:
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    return solve_lambda(1 + 4 * tau / (1 + 2 * tau))


def lemma4_keep_probability_bounds(tau: float, L: int, block_energy: float, sigma2: float) -> tuple[str | None, float | None]:
    """Which keep/drop tail bound applies to a block of ``L`` coordinates.

    Returns ``("keep", bound on P(keep))`` for small blocks, ``("drop", bound on
    P(drop))`` for energetic ones and ``(None, None)`` in between.
    """
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L!r}")
    lam_tau = lemma4_tau_threshold(tau).lam
    if block_energy <= (math.sqrt(LAMBDA_STAR) - math.sqrt(lam_tau)) ** 2 * L * sigma2:
        return "keep", 0.5 * math.exp(-2 * tau / (1 + 2 * tau) * L)
    if block_energy >= 4 * LAMBDA_STAR * L * sigma2:
        return "drop", 0.5 * math.exp(-2 * L)
    return None, None


def besov_tail_bound(body: BesovBody, m: int) -> float:
    """Bound on the energy of all levels ``>= m`` for members of ``body``."""
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m!r}")
    t = body.beta
    return body.M**2 * 2.0 ** (-2 * t * m) / (1 - 2.0 ** (-2 * t))


def besov_card_constant(tau: float, a: float) -> float:
    return 3 * (1 - 2.0 ** (-2 * tau)) ** (-1 / (1 + 2 * tau)) * a ** (-1 / (1 + 2 * tau))


def besov_card_bound(body: BesovBody, a: float, L: int, n: int) -> float:
    """Bound on the number of blocks whose signal energy exceeds ``a L / n``."""
    if not a > 0:
        raise ValueError(f"a must be positive, got {a!r}")
    t = body.beta
    D = besov_card_constant(t, a)
    return D / L * body.M ** (2 / (1 + 2 * t)) * n ** (1 / (1 + 2 * t))


def count_energetic_blocks(theta: CoefficientVector, a: float, L: int, n: int, min_level: int = 0) -> int:
    """Number of blocks ``(j, i)``, ``j >= min_level``, with signal energy above ``a L / n``.

    Levels narrower than ``L`` still form one (short) block each, which the
    cardinality bound does not budget for; ``min_level`` lets callers skip them.
    """
    thr = a * L / n
    return int(sum(np.sum(level_block_energies(theta.level(j), L)[0] > thr) for j in range(min_level, theta.J)))


@dataclass(frozen=True)
class AdaptationRange:
    tau_low: float
    tau_high: float
    regime: str
    rho: float


def adaptation_range(N: int, n: int, beta: float) -> AdaptationRange:
    """Largest smoothness range ``[beta, tau_high]`` over which radii can adapt."""
    if N < 1 or n < 2 or not beta > 0:
        raise ValueError("need N >= 1, n >= 2, beta > 0")
    rho = math.log(N) / math.log(n)
    if rho >= 2:
        return AdaptationRange(beta, 2 * beta, "large_N", rho)
    if rho == 0:
        return AdaptationRange(beta, math.inf, "rho_small_beta", rho)
    if beta >= 1 / (2 * rho) - 0.25:
        return AdaptationRange(beta, 2 * beta, "rho_large_beta", rho)
    return AdaptationRange(beta, 1 / rho - 0.5, "rho_small_beta", rho)
