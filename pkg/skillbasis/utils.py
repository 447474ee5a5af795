"""Utility functions for skillbasis."""

import zlib

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats

from .exceptions import DataError

# Relative gap under which neighbouring singular values are treated as equal.
DEGENERATE_RTOL = 1e-9


def stage_seed(seed: int, stage: str) -> np.random.SeedSequence:
    """
    Derive the seed sequence of a named sub-stream.

    Every stage of a run draws from its own stream, so changing how many
    numbers one stage consumes does not shift the draws of any other stage.

    Args:
        seed: Root seed of the run.
        stage: Stage name, e.g. ``"sampling"`` or ``"nce-transition"``.

    Returns:
        Seed sequence keyed by ``(seed, crc32(stage))``.

    """
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(stage.encode())])


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    """
    Create the generator of a named sub-stream.

    Args:
        seed: Root seed of the run.
        stage: Stage name.

    Returns:
        A seeded generator.

    """
    return np.random.default_rng(stage_seed(seed, stage))


def indexed_rng(seed: int, index: int) -> np.random.Generator:
    """
    Create the generator of one unit of work (episode, repeat, ...).

    Args:
        seed: Seed of the parent stream.
        index: Index of the unit.

    Returns:
        A generator that depends only on ``(seed, index)``.

    """
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, index]))


def pearson(x: ArrayLike, y: ArrayLike) -> float:
    """
    Pearson correlation of two flattened arrays.

    Args:
        x: First array.
        y: Second array, same size as ``x``.

    Returns:
        The correlation, or 0.0 when either input is constant.

    Raises:
        DataError: If the sizes differ.

    """
    a = np.ravel(np.asarray(x, dtype=float))
    b = np.ravel(np.asarray(y, dtype=float))
    if a.size != b.size:
        raise DataError(f"Cannot correlate arrays of sizes {a.size} and {b.size}")
    if a.size < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0
    return float(stats.pearsonr(a, b).statistic)


def rank_auc(positive: ArrayLike, negative: ArrayLike) -> float:
    """
    Area under the ROC curve by the rank-sum statistic; ties count one half.

    Args:
        positive: Scores of positive samples.
        negative: Scores of negative samples.

    Returns:
        AUC in ``[0, 1]``.

    Raises:
        DataError: If either group is empty.

    """
    pos = np.ravel(np.asarray(positive, dtype=float))
    neg = np.ravel(np.asarray(negative, dtype=float))
    if pos.size == 0 or neg.size == 0:
        raise DataError("AUC needs at least one positive and one negative score")
    ranks = stats.rankdata(np.concatenate([pos, neg]))
    rank_sum = float(ranks[: pos.size].sum())
    return (rank_sum - pos.size * (pos.size + 1) / 2.0) / (pos.size * neg.size)


def derive_seed(seed: int, stage: str) -> int:
    """
    Integer seed of a named sub-stream, for APIs that take a plain seed.

    Args:
        seed: Root seed of the run.
        stage: Stage name.

    Returns:
        A 32-bit seed that depends only on ``(seed, stage)``.

    """
    return int(stage_seed(seed, stage).generate_state(1)[0])


def canonical_basis(block: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Basis-independent orthonormal basis of the span of ``block``'s columns.

    Projects the coordinate axes onto the subspace in order and keeps the
    Gram-Schmidt residuals that are not already spanned.

    Args:
        block: Orthonormal columns ``(n, m)``.

    Returns:
        Orthonormal columns ``(n, m)`` spanning the same subspace.

    """
    n, m = block.shape
    projector = block @ block.T
    basis: list[NDArray[np.float64]] = []
    for j in range(n):
        vec = projector[:, j].copy()
        for _ in range(2):
            for b in basis:
                vec -= (b @ vec) * b
        norm = float(np.linalg.norm(vec))
        if norm > 1e-8:
            basis.append(vec / norm)
        if len(basis) == m:
            break
    return np.column_stack(basis)


def degenerate_clusters(
    values: NDArray[np.float64], rtol: float = DEGENERATE_RTOL
) -> list[NDArray[np.int64]]:
    """Group indices of (numerically) equal descending values."""
    scale = max(float(values[0]), 1.0) if values.size else 1.0
    clusters: list[list[int]] = []
    for i, value in enumerate(values):
        if clusters and abs(values[clusters[-1][-1]] - value) <= rtol * scale:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return [np.asarray(c, dtype=np.int64) for c in clusters]
