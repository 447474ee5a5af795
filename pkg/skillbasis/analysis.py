"""Post-hoc interpretation: PCA of skill matrices, effective dimension, motion fields."""

from typing import Any

import numpy as np
from mkdocs.plugins import get_plugin_logger
from numpy.typing import ArrayLike
from scipy import linalg, stats

from .continuous import EnergyModel
from .exceptions import ConfigurationError, DataError
from .models import Dataset, EffectiveDimension, FloatArray, MotionField, PcaResult
from .utils import canonical_basis, degenerate_clusters

logger = get_plugin_logger(__name__)


def pca_skills(phi: FloatArray, n_pcs: int, axis: str = "skills") -> PcaResult:
    """
    Mean-centered PCA of a skill matrix.

    With ``axis="skills"`` every skill column is an observation over the
    flattened ``(s, a)`` space, so the components are "PC skills". With
    ``axis="pairs"`` every ``(s, a)`` row is an observation over skills.

    Components sharing an explained variance (the zero-variance tail
    included) are replaced by the canonical basis of their span, so the
    result does not depend on the LAPACK build.

    Args:
        phi: Skill matrix ``((s, a), d)``.
        n_pcs: Number of components, at most ``min(observations, dims)``.
        axis: ``skills`` or ``pairs``.

    Returns:
        Components, explained variance ratios and projections. Zero-variance
        input returns all-zero ratios with ``degenerate`` set.

    Raises:
        ConfigurationError: If ``axis`` is unknown or ``n_pcs`` out of range.

    """
    if axis not in ("skills", "pairs"):
        raise ConfigurationError(f"Unknown PCA axis '{axis}'")
    data = phi.T if axis == "skills" else phi
    n_obs, dim = data.shape
    if not 1 <= n_pcs <= min(n_obs, dim):
        raise ConfigurationError(f"n_pcs={n_pcs} outside [1, {min(n_obs, dim)}]")

    mean = data.mean(axis=0)
    centered = data - mean
    _, s, vt = linalg.svd(centered, full_matrices=True)
    variance = np.zeros(dim)
    variance[: s.size] = s**2
    total = float(variance.sum())
    if total <= 0.0:
        logger.warning("Skill matrix has zero variance; PCA is degenerate")
        components = np.eye(n_pcs, dim)
        return PcaResult(
            components=components,
            explained_variance_ratio=np.zeros(n_pcs),
            projected_skills=centered @ components.T,
            mean=mean,
            degenerate=True,
        )

    spread = np.zeros(dim)
    spread[: s.size] = s
    for cluster in degenerate_clusters(spread):
        if cluster.size > 1:
            vt[cluster] = canonical_basis(vt[cluster].T).T
    components = vt[:n_pcs].copy()
    for row in components:
        if row[int(np.argmax(np.abs(row)))] < 0:
            row *= -1.0
    return PcaResult(
        components=components,
        explained_variance_ratio=variance[:n_pcs] / total,
        projected_skills=centered @ components.T,
        mean=mean,
    )


def generic_basis(skills: FloatArray, rng: np.random.Generator) -> FloatArray:
    """
    Re-express skills in a random orthogonal basis of their span.

    A representation learned from data fixes its skills only up to an
    invertible mixing; this draws one such mixing from the Haar measure.

    Args:
        skills: Matrix with one skill per column.
        rng: Generator of the draw.

    Returns:
        ``skills @ Q`` for a Haar-distributed orthogonal ``Q``.

    """
    width = skills.shape[1]
    if width < 2:
        return skills.copy()
    mixing = stats.ortho_group.rvs(dim=width, random_state=rng)
    return skills @ mixing


def effective_dimension(skills: FloatArray, pooled: bool = True) -> EffectiveDimension:
    """
    Count, per skill column, the entries whose magnitude exceeds ``mean + std``.

    Args:
        skills: Matrix with one skill per column.
        pooled: Use one threshold from all entries; otherwise one per column.

    Returns:
        Per-skill counts, thresholds and summary statistics.

    Raises:
        DataError: If the matrix is empty.

    """
    values = np.abs(np.asarray(skills, dtype=float))
    if values.size == 0:
        raise DataError("Effective dimension of an empty matrix")
    if pooled:
        threshold = np.full(values.shape[1], values.mean() + values.std())
    else:
        threshold = values.mean(axis=0) + values.std(axis=0)
    counts = np.sum(values > threshold, axis=0).astype(np.int64)
    return EffectiveDimension(
        counts=counts,
        threshold=threshold,
        mean=float(counts.mean()),
        median=float(np.median(counts)),
    )


def compare_effective_dimension(
    pre: EffectiveDimension, post: EffectiveDimension
) -> dict[str, Any]:
    """
    Paired comparison of effective dimensions before and after PCA.

    A paired t-test is run only when both sides have the same number of skills.

    Args:
        pre: Effective dimension of the raw skills.
        post: Effective dimension of the PC skills.

    Returns:
        Means, their difference, whether the mean decreased and the test
        statistic and p-value (``None`` when not paired).

    """
    result: dict[str, Any] = {
        "mean_pre": pre.mean,
        "mean_post": post.mean,
        "mean_difference": post.mean - pre.mean,
        "decreased": post.mean < pre.mean,
        "t_statistic": None,
        "p_value": None,
    }
    if pre.counts.size == post.counts.size and pre.counts.size > 1:
        if np.any(pre.counts != post.counts):
            test = stats.ttest_rel(post.counts, pre.counts)
            if np.isfinite(test.statistic):
                result["t_statistic"] = float(test.statistic)
                result["p_value"] = float(test.pvalue)
    return result


def motion_field_from_activations(
    activations: FloatArray, dataset: Dataset, skill_index: int, top_k: int
) -> MotionField:
    """
    Average the states and actions of the rows that most activate one skill.

    Args:
        activations: Skill activations per row ``(N, d)``.
        dataset: Continuous dataset aligned with ``activations``.
        skill_index: Skill coordinate used for ranking.
        top_k: Number of rows averaged, at most the dataset size.

    Returns:
        The motion field.

    Raises:
        DataError: If the dataset is empty.
        ConfigurationError: If ``skill_index`` or ``top_k`` is out of range.

    """
    n = len(dataset)
    if n == 0:
        raise DataError("Motion field of an empty dataset")
    if not 0 <= skill_index < activations.shape[1]:
        raise ConfigurationError(f"Skill index {skill_index} outside [0, {activations.shape[1]})")
    if not 1 <= top_k <= n:
        raise ConfigurationError(f"top_k={top_k} outside [1, {n}]")
    order = np.argsort(-activations[:, skill_index], kind="stable")[:top_k]
    return MotionField(
        skill_index=skill_index,
        mean_state=np.atleast_2d(dataset.states)[order].mean(axis=0),
        mean_action=np.atleast_2d(dataset.actions)[order].mean(axis=0),
        support_size=top_k,
    )


def motion_field(model: EnergyModel, dataset: Dataset, skill_index: int, top_k: int) -> MotionField:
    """
    Motion field of one skill coordinate of ``f(psi(s, a))``.

    Args:
        model: Model with a fitted skill map.
        dataset: Continuous dataset.
        skill_index: Skill coordinate, below ``d``.
        top_k: Number of rows averaged.

    Returns:
        The motion field.

    """
    if len(dataset) == 0:
        raise DataError("Motion field of an empty dataset")
    activations = model.skill_features(dataset.states, dataset.actions)
    return motion_field_from_activations(activations, dataset, skill_index, top_k)


def sign_test(values: ArrayLike) -> float:
    """
    One-sided sign test that the values are mostly positive.

    Zeros are dropped.

    Args:
        values: Observations.

    Returns:
        p-value of the binomial test against ``p = 0.5``; 1.0 without nonzero values.

    """
    x = np.ravel(np.asarray(values, dtype=float))
    x = x[x != 0]
    if x.size == 0:
        return 1.0
    test = stats.binomtest(int(np.sum(x > 0)), int(x.size), 0.5, alternative="greater")
    return float(test.pvalue)


def regime_shift(u_timeline: FloatArray, boundary: int) -> dict[str, float]:
    """
    Separation of the weight timeline before and after a boundary bin.

    Args:
        u_timeline: Weights ``(bins, d)``.
        boundary: First bin of the second regime.

    Returns:
        ``shift`` (distance between the two mean weight vectors),
        ``within_std`` (root mean squared deviation from the own-half mean)
        and their ``ratio``.

    Raises:
        ConfigurationError: If either side of the boundary is empty.

    """
    if not 0 < boundary < u_timeline.shape[0]:
        raise ConfigurationError(f"Boundary {boundary} outside (0, {u_timeline.shape[0]})")
    first, second = u_timeline[:boundary], u_timeline[boundary:]
    shift = float(np.linalg.norm(first.mean(axis=0) - second.mean(axis=0)))
    spread = np.concatenate([first - first.mean(axis=0), second - second.mean(axis=0)])
    within = float(np.sqrt(np.mean(np.sum(spread * spread, axis=1))))
    return {
        "shift": shift,
        "within_std": within,
        "ratio": shift / within if within > 0 else float("inf"),
    }
