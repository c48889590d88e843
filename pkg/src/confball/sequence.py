"""Gaussian sequence model on a dyadic index set.

Coefficients are stored flat in level-major order: level ``j`` occupies
``values[2**j - 1 : 2**(j+1) - 1]``. The same order defines the coordinate
enumeration used by the vertex sets ``C(a, k)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def level_slice(j: int) -> slice:
    return slice(2**j - 1, 2 ** (j + 1) - 1)


@dataclass(frozen=True, eq=False)
class CoefficientVector:
    """Real coefficients ``theta[j, k]`` for levels ``0..J-1``, ``k < 2**j``.

    The backing array is flat (length ``N = 2**J - 1``) and read-only.
    """

    J: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 1:
            raise ValueError(f"J must be a positive integer, got {self.J!r}")
        arr = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if arr.size != 2**self.J - 1:
            raise ValueError(f"expected {2**self.J - 1} coefficients for J={self.J}, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficients must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "J", int(self.J))
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, J: int) -> "CoefficientVector":
        return cls(J, np.zeros(2**J - 1))

    @classmethod
    def from_levels(cls, levels: Sequence[Sequence[float]]) -> "CoefficientVector":
        for j, lev in enumerate(levels):
            if len(lev) != 2**j:
                raise ValueError(f"level {j} must have length {2**j}, got {len(lev)}")
        if not levels:
            raise ValueError("at least one level is required")
        return cls(len(levels), np.concatenate([np.asarray(lev, dtype=float) for lev in levels]))

    @property
    def N(self) -> int:
        return 2**self.J - 1

    def level(self, j: int) -> np.ndarray:
        if not 0 <= j < self.J:
            raise IndexError(f"level {j} out of range for J={self.J}")
        return self.values[level_slice(j)]

    @property
    def levels(self) -> list[np.ndarray]:
        return [self.level(j) for j in range(self.J)]

    def level_energies(self) -> np.ndarray:
        return np.array([float(np.dot(lev, lev)) for lev in self.levels])

    def __add__(self, other: "CoefficientVector") -> "CoefficientVector":
        _check_same_shape(self, other)
        return CoefficientVector(self.J, self.values + other.values)

    def __sub__(self, other: "CoefficientVector") -> "CoefficientVector":
        _check_same_shape(self, other)
        return CoefficientVector(self.J, self.values - other.values)

    def __mul__(self, c: float) -> "CoefficientVector":
        return CoefficientVector(self.J, float(c) * self.values)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, CoefficientVector):
            return NotImplemented
        return self.J == other.J and np.array_equal(self.values, other.values)

    def to_dict(self) -> dict:
        return {"J": self.J, "levels": [lev.tolist() for lev in self.levels]}

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientVector":
        if set(d) != {"J", "levels"}:
            raise ValueError(f"coefficient vector JSON needs exactly keys J, levels; got {sorted(d)}")
        vec = cls.from_levels(d["levels"])
        if vec.J != d["J"]:
            raise ValueError(f"J={d['J']} does not match {vec.J} levels")
        return vec

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "CoefficientVector":
        return cls.from_dict(json.loads(s))


def _check_same_shape(a: CoefficientVector, b: CoefficientVector) -> None:
    if a.J != b.J:
        raise ValueError(f"shape mismatch: J={a.J} vs J={b.J}")


@dataclass(frozen=True)
class BesovBody:
    """Besov body ``B^beta_{p,q}(M)`` restricted to the levels of the model.

    ``q`` may be ``math.inf`` (supremum over levels).
    """

    beta: float
    p: float = 2.0
    q: float = 2.0
    M: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        if not self.p >= 2:
            raise ValueError(f"p must be >= 2, got {self.p!r}")
        if not self.q >= 1:
            raise ValueError(f"q must be >= 1, got {self.q!r}")
        if not self.M > 0:
            raise ValueError(f"M must be positive, got {self.M!r}")
        if not self.s > 0:
            raise ValueError(f"s = beta + 1/2 - 1/p must be positive, got {self.s!r}")

    @property
    def s(self) -> float:
        return self.beta + 0.5 - 1.0 / self.p

    def with_radius(self, M: float) -> "BesovBody":
        return BesovBody(self.beta, self.p, self.q, M)

    def to_dict(self) -> dict:
        return {"beta": self.beta, "p": self.p, "q": "inf" if math.isinf(self.q) else self.q, "M": self.M}

    @classmethod
    def from_dict(cls, d: dict) -> "BesovBody":
        unknown = set(d) - {"beta", "p", "q", "M"}
        if unknown:
            raise ValueError(f"unknown Besov body keys: {sorted(unknown)}")
        q = d.get("q", 2.0)
        q = math.inf if q in ("inf", "infinity", None) else float(q)
        return cls(float(d["beta"]), float(d.get("p", 2.0)), q, float(d.get("M", 1.0)))


def _level_lp_norms(theta: CoefficientVector, p: float) -> np.ndarray:
    if p == 2:
        return np.sqrt(theta.level_energies())
    return np.array([float(np.sum(np.abs(lev) ** p)) ** (1.0 / p) for lev in theta.levels])


def besov_norm(theta: CoefficientVector, body: BesovBody) -> float:
    """``( sum_j (2**(j s) ||theta_j||_p)**q )**(1/q)``, sup over levels when ``q = inf``."""
    terms = 2.0 ** (np.arange(theta.J) * body.s) * _level_lp_norms(theta, body.p)
    if math.isinf(body.q):
        return float(terms.max())
    top = terms.max()
    if top == 0.0:
        return 0.0
    # Factor out the largest term so large q does not overflow.
    return float(top * np.sum((terms / top) ** body.q) ** (1.0 / body.q))


def besov_contains(theta: CoefficientVector, body: BesovBody) -> bool:
    return besov_norm(theta, body) <= body.M


def max_level_energy(body: BesovBody, j: int) -> float:
    """Largest ``sum_k theta[j,k]**2`` attainable inside ``body``."""
    return body.M**2 * 2.0 ** (-2.0 * body.beta * j)


@dataclass(frozen=True)
class NoiseModel:
    """Noise level ``1/sqrt(n)`` and the seed of its generator."""

    n: int
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")


def make_rng(seed: int | Sequence[int], *stream: int) -> np.random.Generator:
    """Counter-based generator whose output depends only on ``(seed, *stream)``."""
    entropy = int(seed) if np.ndim(seed) == 0 else [int(s) for s in seed]
    ss = np.random.SeedSequence(entropy=entropy, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def sample_observation(theta: CoefficientVector, noise: NoiseModel, stream: Sequence[int] = ()) -> CoefficientVector:
    """Draw ``y = theta + z / sqrt(n)`` with ``z`` from the seeded stream."""
    rng = make_rng(noise.seed, *stream)
    z = rng.standard_normal(theta.N)
    return CoefficientVector(theta.J, theta.values + z / math.sqrt(noise.n))


def _signs_array(signs: Sequence, length: int) -> np.ndarray:
    s = np.asarray(signs)
    if s.ndim != 1 or s.size != length:
        raise ValueError(f"sign pattern must have length {length}, got {s.size}")
    if s.dtype == bool:
        return np.where(s, 1.0, -1.0)
    s = s.astype(float)
    if not np.all(np.isin(s, (-1.0, 1.0))):
        raise ValueError("sign pattern entries must be +1/-1 or booleans")
    return s


def hypercube_theta(J: int, j: int, a: float, signs: Sequence | None = None) -> CoefficientVector:
    """Vertex of the level-``j`` hypercube: ``+-a`` on level ``j``, zero elsewhere.

    ``signs`` defaults to all positive; booleans map True to ``+``.
    """
    if not 0 <= j < J:
        raise ValueError(f"level {j} out of range for J={J}")
    if a < 0:
        raise ValueError(f"a must be nonnegative, got {a!r}")
    s = np.ones(2**j) if signs is None else _signs_array(signs, 2**j)
    values = np.zeros(2**J - 1)
    values[level_slice(j)] = a * s
    return CoefficientVector(J, values)


def vertex_set_theta(J: int, k_count: int, a: float, signs: Sequence | None = None) -> CoefficientVector:
    """Member of ``C(a, k)``: the first ``k_count`` coordinates (level-major) are ``+-a``."""
    N = 2**J - 1
    if not 1 <= k_count <= N:
        raise ValueError(f"k_count must lie in [1, {N}], got {k_count!r}")
    s = np.ones(k_count) if signs is None else _signs_array(signs, k_count)
    values = np.zeros(N)
    values[:k_count] = a * s
    return CoefficientVector(J, values)


def random_boundary_member(J: int, body: BesovBody, rng: np.random.Generator) -> CoefficientVector:
    """Gaussian direction rescaled onto ``{besov_norm = M}``."""
    raw = CoefficientVector(J, rng.standard_normal(2**J - 1))
    return raw * (body.M / besov_norm(raw, body))
