"""Confidence balls centred on the block-thresholding estimator.

Three constructions are provided:

* :func:`single_level_ball` covers one resolution level and falls back to
  :func:`usual_ball` on levels with fewer than ``L`` coefficients;
* :func:`adaptive_ball` covers every coefficient of a member of a given
  Besov body, thresholding up to ``J1`` and estimating the energy between
  ``J1`` and ``J2`` without bias;
* :func:`honest_ball` covers any mean vector in ``R^N``.

Every squared radius is a sum of named terms; the breakdown travels with the
ball (``radius_sq_terms``) and is summed with :func:`math.fsum`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .blocks import block_size_for, threshold_level
from .numerics import LAMBDA_STAR, chi2_quantile, std_normal_quantile
from .sequence import BesovBody, CoefficientVector, level_slice

KEPT_BLOCK_FACTOR = 2 * LAMBDA_STAR + 8 * math.sqrt(LAMBDA_STAR) - 1

LEVEL_KINDS = ("usual", "single_level")
VECTOR_KINDS = ("besov_adaptive", "honest")


@dataclass(frozen=True, eq=False)
class ConfidenceBall:
    """Closed Euclidean ball ``{theta : ||theta - center|| <= radius}``.

    For the level kinds the ball lives in the coordinates of level ``params['j']``
    and ``center`` is that level's slice; otherwise ``center`` is a full vector.
    """

    center: np.ndarray = field(repr=False)
    radius_sq_terms: dict[str, float]
    alpha: float
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LEVEL_KINDS + VECTOR_KINDS:
            raise ValueError(f"unknown ball kind {self.kind!r}")
        c = np.array(self.center, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)

    @property
    def radius_sq(self) -> float:
        """Unclipped squared radius; may be negative for the adaptive ball."""
        return math.fsum(self.radius_sq_terms.values())

    @property
    def radius(self) -> float:
        return math.sqrt(max(0.0, self.radius_sq))

    def _coords(self, theta) -> np.ndarray:
        if isinstance(theta, CoefficientVector):
            if self.kind in LEVEL_KINDS:
                theta = theta.level(self.params["j"])
            else:
                theta = theta.values
        arr = np.asarray(theta, dtype=float).reshape(-1)
        if arr.size != self.center.size:
            raise ValueError(f"shape mismatch: ball has {self.center.size} coordinates, got {arr.size}")
        return arr

    def distance(self, theta) -> float:
        d = self._coords(theta) - self.center
        return math.sqrt(float(np.dot(d, d)))

    def contains(self, theta) -> bool:
        return self.distance(theta) <= self.radius

    def to_dict(self) -> dict:
        if self.kind in LEVEL_KINDS:
            center = {"level": self.params["j"], "values": self.center.tolist()}
        else:
            center = CoefficientVector(self.params["J"], self.center).to_dict()
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "alpha": self.alpha,
            "radius": self.radius,
            "radius_sq_terms": dict(self.radius_sq_terms),
            "center": center,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConfidenceBall":
        if d["kind"] in LEVEL_KINDS:
            center = d["center"]["values"]
        else:
            center = CoefficientVector.from_dict(d["center"]).values
        return cls(center, dict(d["radius_sq_terms"]), d["alpha"], d["kind"], dict(d.get("params", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "ConfidenceBall":
        return cls.from_dict(json.loads(s))


def ball_contains(ball: ConfidenceBall, theta) -> bool:
    return ball.contains(theta)


def _check_alpha(alpha: float, upper: float = 1.0) -> float:
    if not 0.0 < alpha < upper:
        raise ValueError(f"alpha must lie in (0, {upper}), got {alpha!r}")
    return float(alpha)


def deterministic_factor(alpha: float) -> float:
    """``2 sqrt(log(2/alpha)) + 4 sqrt(lambda*) z_{alpha/2}``."""
    return 2.0 * math.sqrt(math.log(2.0 / alpha)) + 4.0 * math.sqrt(LAMBDA_STAR) * std_normal_quantile(1.0 - alpha / 2.0)


def _level_data_terms(values: np.ndarray, n: int, L: int) -> tuple[np.ndarray, float, int]:
    """Estimate, positive-part dropped-energy term and kept-coordinate count for one level."""
    est, s2, sizes, kept = threshold_level(values, n, L)
    dropped = ~kept
    dropped_term = max(0.0, math.fsum(s2[dropped] - sizes[dropped] / n))
    return est, dropped_term, int(np.sum(sizes[kept]))


def usual_ball(y_j, n: int, alpha: float) -> ConfidenceBall:
    """Chi-squared ball centred on the raw observations of one level."""
    alpha = _check_alpha(alpha)
    y_j = np.asarray(y_j, dtype=float).reshape(-1)
    m = y_j.size
    j = int(round(math.log2(m))) if m > 0 else -1
    if m < 1 or 2**j != m:
        raise ValueError(f"level slice length must be a power of two, got {m}")
    return ConfidenceBall(
        y_j,
        {"chi2_quantile": chi2_quantile(m, 1.0 - alpha) / n},
        alpha,
        "usual",
        {"j": j, "n": n},
    )


def single_level_ball(y: CoefficientVector, j: int, n: int, alpha: float) -> ConfidenceBall:
    """Ball for level ``j`` with coverage over all of ``R^N``.

    Levels with ``2**j < ceil(log n)`` use :func:`usual_ball`.
    """
    alpha = _check_alpha(alpha)
    if 2**j > n**2:
        raise ValueError(f"level {j} has 2**j > n**2 = {n**2}; the construction requires 2**j <= n**2")
    L = block_size_for(n)
    if 2**j < L:
        return usual_ball(y.level(j), n, alpha)
    est, dropped_term, kept_count = _level_data_terms(y.level(j), n, L)
    terms = {
        "deterministic": deterministic_factor(alpha) * 2.0 ** (j / 2) / n,
        "dropped_energy": dropped_term,
        "kept_blocks": KEPT_BLOCK_FACTOR * kept_count / n,
    }
    return ConfidenceBall(est, terms, alpha, "single_level", {"j": j, "n": n})


@dataclass(frozen=True)
class CutoffLevels:
    J1: int
    J2: int


def _cutoff(J: int, log2_cap: float) -> int:
    """Largest level count ``c`` with ``2**c <= min(N, cap)``; ``J`` when ``cap >= N``."""
    N = 2**J - 1
    if log2_cap >= math.log2(N):
        return J
    # Tolerance absorbs rounding when the cap is an exact power of two.
    return max(0, math.floor(log2_cap + 1e-12))


def cutoff_levels(J: int, n: int, beta: float, M: float) -> CutoffLevels:
    """Thresholding cutoff ``J1`` and unbiased-estimation cutoff ``J2``."""
    if beta <= 0 or M <= 0:
        raise ValueError("beta and M must be positive")
    log2M, log2n = math.log2(M), math.log2(n)
    J1 = _cutoff(J, (2 * log2M + log2n) / (1 + 2 * beta))
    J2 = _cutoff(J, (4 * log2M + 2 * log2n) / (1 + 4 * beta))
    return CutoffLevels(J1, max(J1, J2))


def c_alpha_terms(alpha: float, beta: float, M: float, n: int) -> dict[str, float]:
    """The five constants whose sum multiplies the leading adaptive radius term."""
    alpha = _check_alpha(alpha, 0.5)
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    shrink = 1.0 - 2.0 ** (-2 * beta)
    z = std_normal_quantile(1.0 - alpha / 4.0)
    root_log = math.sqrt(math.log(4.0 / alpha))
    F = M ** (1 / (1 + 2 * beta) - 2 / (1 + 4 * beta)) * n ** (1 / (2 + 4 * beta) - 1 / (1 + 4 * beta))
    return {
        "a0": 2.0 ** (2 * beta) / shrink,
        "a1": z * 2.0**2.5 * math.sqrt(LAMBDA_STAR) * shrink ** (1 / (2 + 4 * beta)) * F,
        "a2": 2.0 * root_log * F,
        "a3": z * 2.0 ** (beta + 1) * shrink ** -0.5 * F,
        "a4": 2.0 * root_log,
    }


def c_alpha(alpha: float, beta: float, M: float, n: int) -> float:
    return math.fsum(c_alpha_terms(alpha, beta, M, n).values())


def adaptive_ball(y: CoefficientVector, n: int, alpha: float, body: BesovBody) -> ConfidenceBall:
    """Ball with guaranteed coverage over ``body`` and radius adapting to smoother bodies."""
    alpha = _check_alpha(alpha, 0.5)
    beta, M = body.beta, body.M
    cut = cutoff_levels(y.J, n, beta, M)
    L = block_size_for(n)
    center = np.zeros(y.N)
    dropped_terms, kept_count = [], 0
    for j in range(cut.J1):
        est, dropped_term, kept = _level_data_terms(y.level(j), n, L)
        center[level_slice(j)] = est
        dropped_terms.append(dropped_term)
        kept_count += kept
    unbiased = [
        math.fsum(y.level(j) ** 2 - 1.0 / n) for j in range(cut.J1, cut.J2)
    ]
    terms = {
        "deterministic": c_alpha(alpha, beta, M, n) * M ** (2 / (1 + 4 * beta)) * n ** (-4 * beta / (1 + 4 * beta)),
        "dropped_energy": math.fsum(dropped_terms),
        "kept_blocks": KEPT_BLOCK_FACTOR * kept_count / n,
        "unbiased_tail": math.fsum(unbiased),
    }
    params = {"J": y.J, "n": n, "beta": beta, "M": M, "J1": cut.J1, "J2": cut.J2}
    return ConfidenceBall(center, terms, alpha, "besov_adaptive", params)


def honest_ball(y: CoefficientVector, n: int, alpha: float) -> ConfidenceBall:
    """Ball with coverage over all of ``R^N``, built level by level."""
    alpha = _check_alpha(alpha, 0.5)
    N = y.N
    if N > n**2:
        raise ValueError(f"N = {N} exceeds n**2 = {n**2}; the construction requires N <= n**2")
    L = block_size_for(n)
    center = np.zeros(N)
    dropped_terms, kept_count = [], 0
    for j in range(y.J):
        est, dropped_term, kept = _level_data_terms(y.level(j), n, L)
        center[level_slice(j)] = est
        dropped_terms.append(dropped_term)
        kept_count += kept
    terms = {
        "deterministic": deterministic_factor(alpha) * math.sqrt(N) / n,
        "dropped_energy": math.fsum(dropped_terms),
        "kept_blocks": KEPT_BLOCK_FACTOR * kept_count / n,
    }
    return ConfidenceBall(center, terms, alpha, "honest", {"J": y.J, "n": n})
