"""Energy-based transition model, ranking NCE training and time-varying skill weights."""

from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from mkdocs.plugins import get_plugin_logger
from scipy import linalg
from scipy.special import logsumexp, softmax

from .exceptions import (
    ConfigurationError,
    DataError,
    FormatVersionError,
    NumericalError,
    ShapeMismatchError,
    TimeRangeError,
)
from .models import Dataset, FloatArray, IntArray, _matrix_from_dict, _matrix_to_dict
from .networks import FeedforwardMap, SgdMomentum, step_decay
from .utils import rank_auc, stage_rng
from .validator import validate_time_index

logger = get_plugin_logger(__name__)

NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class EpochMetrics:
    """
    One line of the training metrics table.

    Attributes:
        stage: ``transition``, ``policy`` or ``policy-test``.
        epoch: Epoch (or coordinate-descent round) number, from 1.
        loss: Mean ranking-NCE loss over the epoch.
        auc: AUC on the monitoring slice, ``None`` when not computed.
        lr: Learning rate in effect.

    """

    stage: str
    epoch: int
    loss: float
    auc: float | None
    lr: float


@dataclass(eq=False)
class EnergyModel:
    """
    Energy-based transition model with a skill map and a weight timeline.

    ``psi(s, a)`` is the L2-normalized output of ``psi`` scaled by
    ``exp(log_scale)``; ``nu(s')`` is the L2-normalized output of ``nu``.
    Inputs are standardized with the stored training statistics.

    Attributes:
        psi: Map on concatenated standardized ``(s, a)``.
        nu: Map on standardized ``s'``.
        log_scale: Learned log temperature, shape ``(1,)``.
        state_mean: Training state mean.
        state_scale: Training state standard deviation.
        action_mean: Training action mean.
        action_scale: Training action standard deviation.
        skill_map_f: Map from psi-space to skill space, ``None`` before the policy fit.
        u_timeline: Weights indexed ``(time bin, d)``.
        t_min: Time index of the first bin.
        time_bin_width: Frames per bin.
        k: Negatives per positive.
        sigma: Random-walk prior standard deviation.
        smoothness_weight: Explicit penalty weight overriding ``1 / (2 sigma^2)``.

    """

    psi: FeedforwardMap
    nu: FeedforwardMap
    log_scale: FloatArray
    state_mean: FloatArray
    state_scale: FloatArray
    action_mean: FloatArray
    action_scale: FloatArray
    skill_map_f: FeedforwardMap | None = None
    u_timeline: FloatArray = field(default_factory=lambda: np.zeros((0, 0)))
    t_min: int = 0
    time_bin_width: int = 1
    k: int = 8
    sigma: float = 0.1
    smoothness_weight: float | None = None

    @property
    def g(self) -> int:
        """Feature dimension of psi and nu."""
        return self.psi.output_dim

    @property
    def d(self) -> int:
        """Number of skills (0 before the policy fit)."""
        return 0 if self.skill_map_f is None else self.skill_map_f.output_dim

    @property
    def n_bins(self) -> int:
        """Number of time bins in the weight timeline."""
        return int(self.u_timeline.shape[0])

    @property
    def penalty_weight(self) -> float:
        """Weight of ``sum ||u(t) - u(t-1)||^2`` in the weight objective."""
        if self.smoothness_weight is not None:
            return self.smoothness_weight
        return 1.0 / (2.0 * self.sigma**2)

    def bin_index(self, times: Any) -> IntArray:
        """
        Map time indices to timeline bins.

        Args:
            times: Scalar or array of time indices.

        Returns:
            Bin indices, same shape as ``times``.

        Raises:
            TimeRangeError: If a time lies outside the timeline.

        """
        t = np.asarray(times, dtype=np.int64)
        bins = (t - self.t_min) // self.time_bin_width
        if np.any(t < self.t_min) or np.any(bins >= self.n_bins):
            raise TimeRangeError(
                f"Time index outside the timeline [{self.t_min}, "
                f"{self.t_min + self.n_bins * self.time_bin_width - 1}]"
            )
        return bins

    def psi_inputs(self, states: FloatArray, actions: FloatArray) -> FloatArray:
        """Standardized, concatenated ``(s, a)`` rows."""
        s = (np.atleast_2d(states) - self.state_mean) / self.state_scale
        a = (np.atleast_2d(actions) - self.action_mean) / self.action_scale
        return np.hstack([s, a])

    def nu_inputs(self, states: FloatArray) -> FloatArray:
        """Standardized successor states."""
        return (np.atleast_2d(states) - self.state_mean) / self.state_scale

    def psi_features(self, states: FloatArray, actions: FloatArray) -> FloatArray:
        """Scaled unit-norm ``psi(s, a)`` rows ``(N, g)``."""
        unit, _ = _normalize(self.psi.forward(self.psi_inputs(states, actions)))
        return float(np.exp(self.log_scale[0])) * unit

    def nu_features(self, states: FloatArray) -> FloatArray:
        """Unit-norm ``nu(s')`` rows ``(N, g)``."""
        return _normalize(self.nu.forward(self.nu_inputs(states)))[0]

    def transition_score(
        self, states: FloatArray, actions: FloatArray, next_states: FloatArray
    ) -> FloatArray:
        """Unnormalized log-density ``psi(s, a)^T nu(s')`` per row."""
        return np.einsum(
            "ng,ng->n", self.psi_features(states, actions), self.nu_features(next_states)
        )

    def skill_features(self, states: FloatArray, actions: FloatArray) -> FloatArray:
        """
        Skill activations ``f(psi(s, a))`` per row.

        Raises:
            ConfigurationError: If the skill map has not been fitted.

        """
        if self.skill_map_f is None:
            raise ConfigurationError("Energy model has no fitted skill map")
        return self.skill_map_f.forward(self.psi_features(states, actions))

    def to_dict(self) -> dict[str, Any]:
        """Convert the model to an ``ebm.v1`` document.

        Returns:
            Dictionary with layer shapes, parameters, normalization constants
            and the weight timeline.
        """
        return {
            "format": "ebm.v1",
            "psi": self.psi.to_dict(),
            "nu": self.nu.to_dict(),
            "log_scale": float(self.log_scale[0]),
            "normalization": {
                "state_mean": self.state_mean.tolist(),
                "state_scale": self.state_scale.tolist(),
                "action_mean": self.action_mean.tolist(),
                "action_scale": self.action_scale.tolist(),
            },
            "skill_map_f": None if self.skill_map_f is None else self.skill_map_f.to_dict(),
            "u_timeline": _matrix_to_dict(self.u_timeline),
            "t_min": self.t_min,
            "time_bin_width": self.time_bin_width,
            "k": self.k,
            "sigma": self.sigma,
            "smoothness_weight": self.smoothness_weight,
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "EnergyModel":
        """Create a model from an ``ebm.v1`` document.

        Args:
            data: Dictionary produced by ``to_dict``.

        Returns:
            A new EnergyModel instance.

        Raises:
            FormatVersionError: If the document is not ``ebm.v1``.
        """
        if data.get("format") != "ebm.v1":
            raise FormatVersionError(f"Expected an ebm.v1 document, got {data.get('format')!r}")
        norm = data["normalization"]
        f_data = data.get("skill_map_f")
        return EnergyModel(
            psi=FeedforwardMap.from_dict(data["psi"]),
            nu=FeedforwardMap.from_dict(data["nu"]),
            log_scale=np.array([float(data["log_scale"])]),
            state_mean=np.asarray(norm["state_mean"], dtype=float),
            state_scale=np.asarray(norm["state_scale"], dtype=float),
            action_mean=np.asarray(norm["action_mean"], dtype=float),
            action_scale=np.asarray(norm["action_scale"], dtype=float),
            skill_map_f=None if f_data is None else FeedforwardMap.from_dict(f_data),
            u_timeline=_matrix_from_dict(data["u_timeline"]),
            t_min=int(data["t_min"]),
            time_bin_width=int(data["time_bin_width"]),
            k=int(data["k"]),
            sigma=float(data["sigma"]),
            smoothness_weight=(
                None if data.get("smoothness_weight") is None else float(data["smoothness_weight"])
            ),
        )


@dataclass
class TransitionGrads:
    """Gradients of the transition loss."""

    psi: list[FloatArray]
    nu: list[FloatArray]
    log_scale: FloatArray


@dataclass
class PolicyGrads:
    """Gradients of the policy loss."""

    f: list[FloatArray]
    u: FloatArray


def _normalize(h: FloatArray) -> tuple[FloatArray, FloatArray]:
    norm = np.maximum(np.linalg.norm(h, axis=-1, keepdims=True), NORM_FLOOR)
    return h / norm, norm


def _normalize_backward(grad: FloatArray, unit: FloatArray, norm: FloatArray) -> FloatArray:
    return (grad - unit * np.sum(grad * unit, axis=-1, keepdims=True)) / norm


def _ranking_terms(scores: FloatArray) -> tuple[FloatArray, FloatArray]:
    """
    Per-row ranking cross-entropy with the positive in column 0.

    Args:
        scores: Scores ``(N, 1 + k)``.

    Returns:
        Per-row losses and their gradient with respect to ``scores``.

    """
    losses = logsumexp(scores, axis=1) - scores[:, 0]
    dscores = softmax(scores, axis=1)
    dscores[:, 0] -= 1.0
    return losses, dscores


def transition_nce_loss(
    model: EnergyModel,
    sa_inputs: FloatArray,
    positive_inputs: FloatArray,
    negative_inputs: FloatArray,
) -> tuple[float, TransitionGrads]:
    """
    Mean ranking-NCE loss of the transition model and its gradients.

    For each row the positive successor competes with ``k`` negatives:
    ``-log softmax(psi^T nu)`` at the positive.

    Args:
        model: Energy model (psi, nu, log_scale are used).
        sa_inputs: Standardized ``(s, a)`` rows ``(N, in)``.
        positive_inputs: Standardized true successors ``(N, D)``.
        negative_inputs: Standardized negatives ``(N, k, D)``.

    Returns:
        Loss and gradients for psi, nu and log_scale.

    Raises:
        ShapeMismatchError: If the batch shapes disagree.

    """
    n = sa_inputs.shape[0]
    if positive_inputs.shape[0] != n or negative_inputs.shape[0] != n:
        raise ShapeMismatchError("Positive, negative and (s, a) batches differ in length")
    k = negative_inputs.shape[1]
    scale = float(np.exp(model.log_scale[0]))

    h_psi, psi_cache = model.psi.forward_cached(sa_inputs)
    unit_psi, norm_psi = _normalize(h_psi)
    psi = scale * unit_psi

    targets = np.concatenate([positive_inputs[:, None, :], negative_inputs], axis=1)
    h_nu, nu_cache = model.nu.forward_cached(targets.reshape(n * (k + 1), -1))
    unit_nu, norm_nu = _normalize(h_nu)
    nu = unit_nu.reshape(n, k + 1, -1)

    scores = np.einsum("ng,njg->nj", psi, nu)
    losses, dscores = _ranking_terms(scores)
    dscores /= n

    dpsi = np.einsum("nj,njg->ng", dscores, nu)
    dnu = np.einsum("nj,ng->njg", dscores, psi).reshape(n * (k + 1), -1)
    dlog_scale = np.array([float(np.sum(dpsi * psi))])
    psi_upstream = _normalize_backward(scale * dpsi, unit_psi, norm_psi)
    psi_grads, _ = model.psi.backward(psi_cache, psi_upstream)
    nu_grads, _ = model.nu.backward(nu_cache, _normalize_backward(dnu, unit_nu, norm_nu))
    return float(losses.mean()), TransitionGrads(psi_grads, nu_grads, dlog_scale)


def smoothness_penalty(u_timeline: FloatArray, weight: float) -> tuple[float, FloatArray]:
    """
    Random-walk penalty ``weight * sum_t ||u(t) - u(t-1)||^2`` and its gradient.

    Args:
        u_timeline: Weights ``(bins, d)``.
        weight: Penalty weight.

    Returns:
        Penalty value and gradient with respect to ``u_timeline``.

    """
    diff = np.diff(u_timeline, axis=0)
    grad = np.zeros_like(u_timeline)
    grad[1:] += 2.0 * weight * diff
    grad[:-1] -= 2.0 * weight * diff
    return float(weight * np.sum(diff * diff)), grad


def policy_nce_loss(
    skill_map_f: FeedforwardMap,
    u_timeline: FloatArray,
    positive_features: FloatArray,
    negative_features: FloatArray,
    bins: IntArray,
    penalty_weight: float = 0.0,
    reduction: str = "mean",
) -> tuple[float, PolicyGrads]:
    """
    Ranking-NCE loss of the skill policy plus the smoothness penalty.

    Each row scores ``f(psi(s, a))^T u(bin)`` for its own action against
    ``k`` mismatched actions paired with the same state.

    Args:
        skill_map_f: Skill map.
        u_timeline: Weights ``(bins, d)``.
        positive_features: ``psi(s, a)`` of the observed pairs ``(N, g)``.
        negative_features: ``psi(s, a')`` of the mismatched pairs ``(N, k, g)``.
        bins: Time bin of each row.
        penalty_weight: Weight of the random-walk penalty.
        reduction: ``mean`` or ``sum`` over rows for the data term.

    Returns:
        Loss and gradients for the skill map and the timeline.

    Raises:
        ConfigurationError: If ``reduction`` is unknown.

    """
    if reduction not in ("mean", "sum"):
        raise ConfigurationError(f"Unknown reduction '{reduction}'")
    n, k = negative_features.shape[:2]
    inputs = np.concatenate([positive_features[:, None, :], negative_features], axis=1)
    out, cache = skill_map_f.forward_cached(inputs.reshape(n * (k + 1), -1))
    skills = out.reshape(n, k + 1, -1)
    u_rows = u_timeline[bins]
    losses, dscores = _ranking_terms(np.einsum("njd,nd->nj", skills, u_rows))
    denom = float(n) if reduction == "mean" else 1.0
    dscores /= denom

    dskills = (dscores[:, :, None] * u_rows[:, None, :]).reshape(n * (k + 1), -1)
    f_grads, _ = skill_map_f.backward(cache, dskills)
    u_grad = np.zeros_like(u_timeline)
    np.add.at(u_grad, bins, np.einsum("nj,njd->nd", dscores, skills))
    penalty, penalty_grad = smoothness_penalty(u_timeline, penalty_weight)
    loss = float(losses.sum() / denom) + penalty
    return loss, PolicyGrads(f_grads, u_grad + penalty_grad)


def _standardization(values: FloatArray) -> tuple[FloatArray, FloatArray]:
    mean = values.mean(axis=0)
    scale = values.std(axis=0)
    return mean, np.where(scale > 1e-8, scale, 1.0)


def _check_finite(loss: float, stage: str, epoch: int) -> None:
    if not np.isfinite(loss):
        raise NumericalError(f"Non-finite {stage} loss at epoch {epoch}")


def nce_fit_transition(
    dataset: Dataset,
    g: int = 32,
    k: int = 8,
    negative_source: str = "marginal-shuffle",
    epochs: int = 40,
    lr: float = 0.05,
    seed: int = 0,
    *,
    hidden: Sequence[int] = (64, 64),
    activation: str = "tanh",
    batch_size: int = 256,
    momentum: float = 0.9,
    lr_decay: float = 0.5,
    decay_every: int = 20,
    validation: Dataset | None = None,
) -> tuple[EnergyModel, list[EpochMetrics]]:
    """
    Train psi and nu by ranking NCE on a continuous dataset.

    Negatives for every row are ``k`` states drawn uniformly from the pooled
    states and successors of the dataset. Training is mini-batch SGD with
    momentum and a step-decay schedule, seeded by ``seed``.

    Args:
        dataset: Continuous dataset.
        g: Feature dimension.
        k: Negatives per positive.
        negative_source: Only ``marginal-shuffle`` is supported.
        epochs: Passes over the data.
        lr: Initial learning rate.
        seed: Seed of the training stream.
        hidden: Hidden layer sizes of psi and nu.
        activation: Hidden nonlinearity.
        batch_size: Rows per mini-batch.
        momentum: Momentum coefficient.
        lr_decay: Factor applied every ``decay_every`` epochs.
        decay_every: Epochs between decays.
        validation: Optional slice whose transition AUC is logged per epoch.

    Returns:
        Model with psi and nu trained (no skill map yet) and per-epoch metrics.

    Raises:
        ConfigurationError: If the source is unknown, ``k < 1`` or the data
            has fewer than two distinct states.
        NumericalError: If the loss becomes non-finite.

    """
    if negative_source != "marginal-shuffle":
        raise ConfigurationError(f"Unknown negative source '{negative_source}'")
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    if dataset.is_discrete:
        raise ConfigurationError("NCE training needs a continuous dataset")
    pool = np.vstack([dataset.states, dataset.next_states])
    if np.unique(pool, axis=0).shape[0] < 2:
        raise ConfigurationError(
            "Dataset has fewer than two distinct states; cannot draw negatives"
        )

    rng = stage_rng(seed, "nce-transition")
    state_mean, state_scale = _standardization(pool)
    action_mean, action_scale = _standardization(dataset.actions)
    sizes_psi = [dataset.state_dim + dataset.action_dim, *hidden, g]
    sizes_nu = [dataset.state_dim, *hidden, g]
    model = EnergyModel(
        psi=FeedforwardMap.initialize(sizes_psi, rng, activation),
        nu=FeedforwardMap.initialize(sizes_nu, rng, activation),
        log_scale=np.zeros(1),
        state_mean=state_mean,
        state_scale=state_scale,
        action_mean=action_mean,
        action_scale=action_scale,
        k=k,
    )
    sa = model.psi_inputs(dataset.states, dataset.actions)
    nxt = model.nu_inputs(dataset.next_states)
    pool_std = model.nu_inputs(pool)

    optimizer = SgdMomentum(momentum)
    metrics: list[EpochMetrics] = []
    n = len(dataset)
    for epoch in range(epochs):
        rate = step_decay(lr, epoch, lr_decay, decay_every)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            rows = order[start : start + batch_size]
            negatives = pool_std[rng.integers(0, pool_std.shape[0], size=(rows.size, k))]
            loss, grads = transition_nce_loss(model, sa[rows], nxt[rows], negatives)
            _check_finite(loss, "transition", epoch + 1)
            total += loss * rows.size
            params = [*model.psi.parameters(), *model.nu.parameters(), model.log_scale]
            optimizer.step(params, [*grads.psi, *grads.nu, grads.log_scale], rate)
        auc = None if validation is None else eval_transition_auc(model, validation, seed)
        metrics.append(EpochMetrics("transition", epoch + 1, total / n, auc, rate))
        logger.debug(f"Transition epoch {epoch + 1}: loss {total / n:.4f}")

    logger.info(
        f"Trained transition model on {n} rows: final loss {metrics[-1].loss:.4f}"
        + ("" if metrics[-1].auc is None else f", validation AUC {metrics[-1].auc:.3f}")
    )
    return model, metrics


def timeline_layout(times: IntArray, time_bin_width: int) -> tuple[int, int]:
    """
    First time index and number of bins covering ``[min(times), max(times)]``.

    Args:
        times: Time indices of a dataset.
        time_bin_width: Frames per bin.

    Returns:
        ``(t_min, n_bins)``.

    """
    t_min = int(times.min())
    span = int(times.max()) - t_min + 1
    return t_min, -(-span // time_bin_width)


def _mismatched_rows(rng: np.random.Generator, rows: IntArray, n: int, k: int) -> IntArray:
    """For each of ``rows``, ``k`` uniformly chosen row indices other than itself."""
    offsets = rng.integers(1, n, size=(rows.size, k))
    return ((rows[:, None] + offsets) % n).astype(np.int64)


def _prox_smoothness(values: FloatArray, strength: float) -> FloatArray:
    """
    Solve ``(I + strength * L) u = values`` for the path Laplacian ``L``.

    This is the proximal map of ``strength / 2 * sum ||u(t) - u(t-1)||^2``.
    """
    n = values.shape[0]
    if n == 1 or strength == 0.0:
        return values.copy()
    bands = np.zeros((3, n))
    bands[0, 1:] = -strength
    bands[2, :-1] = -strength
    bands[1] = 1.0 + 2.0 * strength
    bands[1, 0] = bands[1, -1] = 1.0 + strength
    return linalg.solve_banded((1, 1), bands, values)


def _summed_policy_nll(
    skills: FloatArray, u: FloatArray, bins: IntArray
) -> tuple[float, FloatArray]:
    losses, dscores = _ranking_terms(np.einsum("njd,nd->nj", skills, u[bins]))
    grad = np.zeros_like(u)
    np.add.at(grad, bins, np.einsum("nj,njd->nd", dscores, skills))
    return float(losses.sum()), grad


def _u_sweep(
    skills: FloatArray,
    u: FloatArray,
    bins: IntArray,
    weight: float,
    lr_u: float,
    steps: int,
) -> FloatArray:
    """Proximal gradient steps on the weight timeline with backtracking."""
    value, grad = _summed_policy_nll(skills, u, bins)
    step = lr_u
    for _ in range(steps):
        while True:
            candidate = _prox_smoothness(u - step * grad, 2.0 * step * weight)
            cand_value, cand_grad = _summed_policy_nll(skills, candidate, bins)
            delta = candidate - u
            bound = value + float(np.sum(grad * delta)) + float(np.sum(delta * delta)) / (2 * step)
            if cand_value <= bound + 1e-12:
                break
            step *= 0.5
            if step < 1e-12:
                return u
        u, value, grad = candidate, cand_value, cand_grad
    return u


def nce_fit_policy(
    dataset: Dataset,
    model: EnergyModel,
    d: int = 64,
    k: int = 8,
    sigma: float = 0.1,
    time_bin_width: int = 1,
    rounds: int = 40,
    lr: float = 0.05,
    seed: int = 0,
    freeze_f: bool = False,
    *,
    f_hidden: Sequence[int] = (32,),
    activation: str = "tanh",
    lr_u: float = 0.5,
    u_steps: int = 5,
    batch_size: int = 256,
    momentum: float = 0.9,
    lr_decay: float = 0.5,
    decay_every: int = 20,
    smoothness_weight: float | None = None,
) -> tuple[EnergyModel, list[EpochMetrics]]:
    """
    Fit the skill map f and the weight timeline u(t) by coordinate descent.

    psi stays frozen. Each round runs one epoch of mini-batch f-steps on the
    mean policy loss with u fixed, then ``u_steps`` proximal gradient steps
    on the summed loss plus the random-walk penalty with f fixed. With
    ``freeze_f`` only the u-steps run and the timeline is rebuilt for
    ``dataset``, as done on held-out data.

    Args:
        dataset: Continuous dataset with time indices.
        model: Model with trained psi (and a skill map when ``freeze_f``).
        d: Number of skills.
        k: Mismatched actions per positive.
        sigma: Random-walk prior standard deviation.
        time_bin_width: Frames per weight bin.
        rounds: Coordinate-descent rounds.
        lr: Initial f learning rate.
        seed: Seed of the training stream.
        freeze_f: Keep f fixed and only fit u(t).
        f_hidden: Hidden layer sizes of f.
        activation: Hidden nonlinearity of f.
        lr_u: Initial step size of the u-steps.
        u_steps: Proximal steps per round.
        batch_size: Rows per f mini-batch.
        momentum: Momentum coefficient of the f-steps.
        lr_decay: Factor applied every ``decay_every`` rounds.
        decay_every: Rounds between decays.
        smoothness_weight: Overrides ``1 / (2 sigma^2)`` when set.

    Returns:
        Model with the skill map and timeline, and per-round metrics.

    Raises:
        ConfigurationError: If time indices are missing, ``sigma <= 0``,
            ``freeze_f`` is set without a fitted skill map, or the dataset
            has fewer than two rows.
        NumericalError: If the loss becomes non-finite.

    """
    validate_time_index(dataset)
    assert dataset.time_index is not None
    if sigma <= 0:
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    n = len(dataset)
    if n < 2:
        raise ConfigurationError("Policy fit needs at least two rows to draw mismatched actions")

    stage = "nce-policy-test" if freeze_f else "nce-policy"
    rng = stage_rng(seed, stage)
    if freeze_f:
        if model.skill_map_f is None:
            raise ConfigurationError("freeze_f requires a model with a fitted skill map")
        skill_map = model.skill_map_f
        d = skill_map.output_dim
    else:
        skill_map = FeedforwardMap.initialize([model.g, *f_hidden, d], rng, activation)

    t_min, n_bins = timeline_layout(dataset.time_index, time_bin_width)
    fitted = replace(
        model,
        skill_map_f=skill_map,
        u_timeline=np.zeros((n_bins, d)),
        t_min=t_min,
        time_bin_width=time_bin_width,
        k=k,
        sigma=sigma,
        smoothness_weight=smoothness_weight,
    )
    bins = fitted.bin_index(dataset.time_index)
    weight = fitted.penalty_weight
    positive = fitted.psi_features(dataset.states, dataset.actions)

    optimizer = SgdMomentum(momentum)
    metrics: list[EpochMetrics] = []
    for rnd in range(rounds):
        rate = step_decay(lr, rnd, lr_decay, decay_every)
        if not freeze_f:
            order = rng.permutation(n)
            for start in range(0, n, batch_size):
                rows = order[start : start + batch_size]
                mismatch = _mismatched_rows(rng, rows, n, k)
                negative = fitted.psi_features(
                    np.repeat(dataset.states[rows], k, axis=0), dataset.actions[mismatch.ravel()]
                ).reshape(rows.size, k, -1)
                loss, grads = policy_nce_loss(
                    skill_map, fitted.u_timeline, positive[rows], negative, bins[rows]
                )
                _check_finite(loss, "policy", rnd + 1)
                optimizer.step(skill_map.parameters(), grads.f, rate)

        mismatch = _mismatched_rows(rng, np.arange(n), n, k)
        negative = fitted.psi_features(
            np.repeat(dataset.states, k, axis=0), dataset.actions[mismatch.ravel()]
        ).reshape(n, k, -1)
        inputs = np.concatenate([positive[:, None, :], negative], axis=1)
        skills = skill_map.forward(inputs.reshape(n * (k + 1), -1)).reshape(n, k + 1, d)
        fitted.u_timeline = _u_sweep(skills, fitted.u_timeline, bins, weight, lr_u, u_steps)

        nll, _ = _summed_policy_nll(skills, fitted.u_timeline, bins)
        _check_finite(nll, "policy", rnd + 1)
        scores = np.einsum("njd,nd->nj", skills, fitted.u_timeline[bins])
        auc = rank_auc(scores[:, 0], scores[:, 1])
        metrics.append(
            EpochMetrics("policy-test" if freeze_f else "policy", rnd + 1, nll / n, auc, rate)
        )
        logger.debug(f"Policy round {rnd + 1}: loss {nll / n:.4f}, AUC {auc:.3f}")

    logger.info(
        f"Fitted {'test-time ' if freeze_f else ''}skill weights over {n_bins} bins: "
        f"final loss {metrics[-1].loss:.4f}"
    )
    return fitted, metrics


def energy_scores(
    model: EnergyModel, states: FloatArray, actions: FloatArray, times: Any
) -> FloatArray:
    """
    Negative energies ``f(psi(s, a))^T u(bin(t))`` for many rows.

    Raises:
        TimeRangeError: If a time lies outside the timeline.

    """
    bins = model.bin_index(np.atleast_1d(times))
    features = model.skill_features(states, actions)
    return np.einsum("nd,nd->n", features, model.u_timeline[bins])


def energy_score(model: EnergyModel, s: FloatArray, a: FloatArray, t: int) -> float:
    """
    Negative energy of one ``(s, a)`` pair at time ``t``.

    Args:
        model: Model with skill map and timeline.
        s: State vector.
        a: Action vector.
        t: Time index within the timeline.

    Returns:
        The score.

    Raises:
        TimeRangeError: If ``t`` lies outside the timeline.

    """
    return float(energy_scores(model, np.atleast_2d(s), np.atleast_2d(a), [t])[0])


def _require_rows(test: Dataset) -> None:
    if len(test) < 2:
        raise DataError(f"AUC evaluation needs at least 2 rows, got {len(test)}")


def eval_auc(model: EnergyModel, test: Dataset, seed: int) -> float:
    """
    Policy AUC of observed ``(s, a, t)`` against mismatched ``(s, a', t)``.

    Each row is paired with the action of another uniformly chosen row;
    the AUC is the rank statistic over the pooled scores.

    Args:
        model: Model whose timeline covers the test times.
        test: Dataset with at least two rows.
        seed: Seed of the pairing draw.

    Returns:
        AUC in ``[0, 1]``.

    Raises:
        DataError: If the dataset has fewer than two rows.

    """
    _require_rows(test)
    validate_time_index(test)
    mismatch = _mismatched_rows(
        stage_rng(seed, "eval-policy"), np.arange(len(test)), len(test), 1
    )[:, 0]
    positive = energy_scores(model, test.states, test.actions, test.time_index)
    negative = energy_scores(model, test.states, test.actions[mismatch], test.time_index)
    return rank_auc(positive, negative)


def eval_transition_auc(model: EnergyModel, test: Dataset, seed: int) -> float:
    """
    Transition AUC of observed successors against successors of other rows.

    Args:
        model: Model with trained psi and nu.
        test: Dataset with at least two rows.
        seed: Seed of the pairing draw.

    Returns:
        AUC in ``[0, 1]``.

    Raises:
        DataError: If the dataset has fewer than two rows.

    """
    _require_rows(test)
    mismatch = _mismatched_rows(
        stage_rng(seed, "eval-transition"), np.arange(len(test)), len(test), 1
    )[:, 0]
    positive = model.transition_score(test.states, test.actions, test.next_states)
    negative = model.transition_score(test.states, test.actions, test.next_states[mismatch])
    return rank_auc(positive, negative)
