"""Local block thresholding.

Each level is cut into contiguous blocks of ``L = ceil(log n)`` coefficients
(the last one possibly shorter). A block is kept when its observed energy
reaches ``LAMBDA_STAR * size / n`` and zeroed otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import LAMBDA_STAR
from .sequence import CoefficientVector, _check_same_shape, level_slice


def block_size_for(n: int) -> int:
    """``max(1, ceil(log n))`` with the natural log."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n!r}")
    return max(1, math.ceil(math.log(n)))


@dataclass(frozen=True)
class BlockPartition:
    """Blocks of level ``level`` as half-open 0-based ``(start, stop)`` ranges over ``k``."""

    level: int
    block_size: int
    blocks: tuple[tuple[int, int], ...]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([stop - start for start, stop in self.blocks])


def partition_level(j: int, L: int) -> BlockPartition:
    if j < 0 or L < 1:
        raise ValueError(f"need j >= 0 and L >= 1, got j={j}, L={L}")
    m = 2**j
    blocks = tuple((start, min(start + L, m)) for start in range(0, m, L))
    return BlockPartition(j, L, blocks)


@dataclass(frozen=True)
class BlockSummary:
    level: int
    block_index: int
    size: int
    s2: float
    kept: bool


def level_block_energies(values: np.ndarray, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-block sums of squares and block sizes for one level's coefficients."""
    m = values.size
    nb = -(-m // L)
    padded = np.zeros(nb * L)
    padded[:m] = values
    s2 = np.sum(padded.reshape(nb, L) ** 2, axis=1)
    sizes = np.full(nb, L)
    sizes[-1] = m - (nb - 1) * L
    return s2, sizes


def keep_mask(s2: np.ndarray, sizes: np.ndarray, n: int) -> np.ndarray:
    return s2 >= LAMBDA_STAR * sizes / n


def block_summaries(y: CoefficientVector, j: int, n: int, L: int | None = None) -> list[BlockSummary]:
    L = block_size_for(n) if L is None else L
    s2, sizes = level_block_energies(y.level(j), L)
    kept = keep_mask(s2, sizes, n)
    return [
        BlockSummary(j, i, int(sizes[i]), float(s2[i]), bool(kept[i]))
        for i in range(s2.size)
    ]


def threshold_level(values: np.ndarray, n: int, L: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Threshold one level; returns ``(estimate, s2, sizes, kept)``."""
    s2, sizes = level_block_energies(values, L)
    kept = keep_mask(s2, sizes, n)
    mask = np.repeat(kept, sizes)
    return np.where(mask, values, 0.0), s2, sizes, kept


def threshold_estimate(y: CoefficientVector, n: int, max_level: int | None = None) -> CoefficientVector:
    """Block-thresholded estimate on levels ``< max_level``; zero above.

    ``max_level`` defaults to ``y.J`` (every level thresholded).
    """
    max_level = y.J if max_level is None else max_level
    if not 0 <= max_level <= y.J:
        raise ValueError(f"max_level must lie in [0, {y.J}], got {max_level!r}")
    L = block_size_for(n)
    out = np.zeros(y.N)
    for j in range(max_level):
        out[level_slice(j)] = threshold_level(y.level(j), n, L)[0]
    return CoefficientVector(y.J, out)


def loss(theta_hat: CoefficientVector, theta: CoefficientVector) -> float:
    """Squared Euclidean distance over all coordinates."""
    _check_same_shape(theta_hat, theta)
    d = theta_hat.values - theta.values
    return float(np.dot(d, d))


@dataclass(frozen=True)
class LossDecomposition:
    dropped_signal: float
    kept_noise: float
    truncated_signal: float

    @property
    def total(self) -> float:
        return self.dropped_signal + self.kept_noise + self.truncated_signal


def loss_decomposition(theta: CoefficientVector, y: CoefficientVector, n: int, max_level: int | None = None) -> LossDecomposition:
    """Split the thresholding loss into its block-level pieces.

    Dropped blocks lose their signal energy ``xi**2``; kept blocks carry the
    noise energy ``chi**2 / n`` with ``chi**2`` the block energy of
    ``sqrt(n) * (y - theta)``; levels ``>= max_level`` lose all their signal.
    """
    _check_same_shape(theta, y)
    max_level = y.J if max_level is None else max_level
    L = block_size_for(n)
    dropped = kept_noise = 0.0
    for j in range(max_level):
        s2, sizes = level_block_energies(y.level(j), L)
        kept = keep_mask(s2, sizes, n)
        xi2, _ = level_block_energies(theta.level(j), L)
        chi2, _ = level_block_energies(math.sqrt(n) * (y.level(j) - theta.level(j)), L)
        dropped += float(np.sum(xi2[~kept]))
        kept_noise += float(np.sum(chi2[kept])) / n
    truncated = float(sum(np.dot(theta.level(j), theta.level(j)) for j in range(max_level, theta.J)))
    return LossDecomposition(dropped, kept_noise, truncated)
