"""End-to-end pipelines behind the command line.

Every pipeline runs named stages in order. A failing stage raises
``StageError`` naming the stage and carrying the exit code of the cause.
Outputs land in the run's ``output_dir``::

    config.resolved.json   all effective settings
    report.json            report.v1 metrics
    *.csv / *.svg          plot-ready artifacts
    models/                mdp.v1, skills.v1 and ebm.v1 documents
"""

from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from mkdocs.config import base
from mkdocs.plugins import get_plugin_logger

from . import analysis, continuous, datasets, discrete, envs, solver
from .config import resolved_dict
from .exceptions import (
    ConfigurationError,
    DataError,
    NumericalError,
    SkillBasisError,
    StageError,
)
from .generator import (
    effective_dimension_table,
    matrix_table,
    metrics_table,
    motion_fields_document,
    render_motion_field_svg,
    report_document,
    reward_table,
    state_action_labels,
    timeline_table,
    variance_table,
    write_table,
)
from .models import (
    Dataset,
    GridworldSpec,
    LabyrinthSpec,
    PcaResult,
    Policy,
    SkillSet,
    SyntheticSpec,
    TabularMDP,
    TaskWeights,
)
from .parser import load_dataset, load_recording, read_document, save_dataset, write_document
from .utils import derive_seed, pearson, stage_rng

logger = get_plugin_logger(__name__)

SINGULAR_RTOL = 1e-10


@contextmanager
def stage(name: str) -> Iterator[None]:
    """
    Run a block as a named pipeline stage.

    Raises:
        StageError: Wrapping any project error or numerical failure of the block.

    """
    logger.debug(f"Stage '{name}' started")
    try:
        yield
    except StageError:
        raise
    except SkillBasisError as e:
        raise StageError(name, e) from e
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
        raise StageError(name, NumericalError(str(e))) from e


@dataclass
class RunFlags:
    """Soft failures raised during a run; fatal under ``strict``."""

    strict: bool = False
    raised: list[str] = field(default_factory=list)

    def flag(self, message: str) -> None:
        """Record a soft failure.

        Args:
            message: Description of the condition.

        Raises:
            NumericalError: In strict mode.
        """
        logger.warning(message)
        self.raised.append(message)
        if self.strict:
            raise NumericalError(f"{message} (fatal under --strict)")


class RunDirectory:
    """Output tree of one run."""

    def __init__(self, root: Path):
        """Create the directory if needed.

        Args:
            root: Output directory of the run.
        """
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)

    @property
    def models(self) -> Path:
        """Directory of serialized models."""
        return self.root / "models"

    def document(self, name: str, document: dict[str, Any]) -> None:
        """Write a JSON document relative to the run directory."""
        write_document(self.root / name, document)

    def table(self, name: str, frame: pd.DataFrame) -> None:
        """Write a CSV table relative to the run directory."""
        write_table(frame, self.root / name)

    def text(self, name: str, content: str) -> None:
        """Write a text file relative to the run directory."""
        (self.root / name).write_text(content, encoding="utf-8")


def _write_config(
    run: RunDirectory, config: base.Config, name: str = "config.resolved.json"
) -> None:
    run.document(name, resolved_dict(config))


# ---------------------------------------------------------------- discrete


@dataclass(eq=False)
class DiscreteRun:
    """Intermediate results of the shared discrete pipeline."""

    mdp: TabularMDP
    policy: Policy
    dataset: Dataset
    skills: SkillSet
    weights: TaskWeights
    rewards: np.ndarray
    residual: float
    pca: PcaResult


def gridworld_spec(config: base.Config) -> GridworldSpec:
    """
    Gridworld layout described by a ``GridworldConfig``.

    Raises:
        ConfigurationError: If a task location is not a ``[row, col]`` pair.

    """
    env = config.env
    locations = [tuple(loc) for loc in env.task_locations]
    if any(len(loc) != 2 for loc in locations):
        raise ConfigurationError("Every task location must be a [row, col] pair")
    if not locations:
        return GridworldSpec.every_cell(env.width, env.height)
    return GridworldSpec(env.width, env.height, tuple((int(r), int(c)) for r, c in locations))


def labyrinth_spec(config: base.Config) -> LabyrinthSpec:
    """Labyrinth layout described by a ``LabyrinthConfig``."""
    env = config.env
    return LabyrinthSpec(env.depth, env.home_node, env.port_node)


def build_environment(kind: str, config: base.Config) -> TabularMDP:
    """
    Build the MDP of a gridworld or labyrinth run configuration.

    Args:
        kind: ``gridworld`` or ``labyrinth``.
        config: Matching run configuration.

    Returns:
        The MDP.

    Raises:
        ConfigurationError: If ``kind`` is unknown or the layout is invalid.

    """
    if kind == "gridworld":
        return envs.build_gridworld(
            gridworld_spec(config),
            config.solver.gamma,
            config.env.reward_shape,
            config.solver.horizon,
        )
    if kind == "labyrinth":
        return envs.build_labyrinth(
            labyrinth_spec(config),
            config.solver.gamma,
            config.env.explore_reward,
            config.solver.horizon,
        )
    raise ConfigurationError(f"Unknown environment '{kind}'")


def _run_discrete(mdp: TabularMDP, config: base.Config, flags: RunFlags) -> DiscreteRun:
    """Solve, sample, factorize, fit, recover and decompose."""
    fit = config.fit
    with stage("solve"):
        values = solver.solve_all_tasks(mdp, config.solver.tol, config.solver.max_iters)
        if not values.all_converged:
            late = [t for t, ok in enumerate(values.converged) if not ok]
            flags.flag(f"Soft value iteration did not converge for tasks {late}")
        policy = solver.softmax_policy(values)

    with stage("sample"):
        schedule = solver.task_schedule(mdp.n_tasks, config.solver.episodes)
        dataset = solver.sample_trajectories(
            mdp,
            policy,
            len(schedule),
            config.solver.horizon,
            schedule,
            derive_seed(config.seed, "sampling"),
        )

    with stage("factorize"):
        transition = None
        if fit.transition_source == "empirical":
            transition = solver.empirical_transitions(dataset, mdp.n_states, mdp.n_actions)
        skills = discrete.factorize_transitions(mdp, fit.rank_d, transition)

    with stage("fit-weights"):
        weights = discrete.fit_policy_weights_mle(
            dataset, skills, mdp.n_tasks, fit.lr, fit.tol, fit.max_iters, fit.ridge
        )
        if weights.empty_tasks:
            flags.flag(f"Tasks without demonstrations: {list(weights.empty_tasks)}")
        late = [t for t, ok in enumerate(weights.converged) if not ok]
        if late:
            flags.flag(f"Skill-weight MLE did not converge for tasks {late}")

    with stage("recover-reward"):
        fitted_values = discrete.fitted_value_tables(skills, weights)
        weights, rewards = discrete.recover_reward(skills, weights, mdp.gamma, fitted_values)
        residual = discrete.consistency_residual(skills, weights, mdp.gamma, fitted_values)

    with stage("pca"):
        observations, dims = (
            (fit.rank_d, skills.phi.shape[0])
            if fit.pca_axis == "skills"
            else (skills.phi.shape[0], fit.rank_d)
        )
        n_pcs = min(fit.n_pcs, observations, dims)
        pca = analysis.pca_skills(skills.phi, n_pcs, fit.pca_axis)
        if pca.degenerate:
            flags.flag("Skill matrix has zero variance; PCA is degenerate")

    return DiscreteRun(mdp, policy, dataset, skills, weights, rewards, residual, pca)


def _discrete_report(result: DiscreteRun, config: base.Config) -> dict[str, Any]:
    mdp = result.mdp
    fitted_policy = discrete.policy_from_weights(result.skills, result.weights.u)
    total_variation = 0.5 * np.abs(fitted_policy - result.policy.probs).sum(axis=-1)
    s = result.skills.singular_values
    return {
        "environment": {
            "n_states": mdp.n_states,
            "n_actions": mdp.n_actions,
            "n_tasks": mdp.n_tasks,
            "gamma": mdp.gamma,
            # Labyrinth rewards indicate the successor node.
            "reward_shape": config.env.get("reward_shape", "successor-indicator"),
        },
        "dataset": {
            "transitions": len(result.dataset),
            "episodes_per_task": config.solver.episodes,
            "horizon": config.solver.horizon,
        },
        "skills": {
            "rank_d": result.skills.rank_d,
            "transition_source": config.fit.transition_source,
            "matrix_rank": int(result.skills.active(SINGULAR_RTOL).sum()),
            "singular_values": s.tolist(),
        },
        "pearson_reward": pearson(result.rewards, mdp.rewards),
        "pearson_reward_per_task": {
            name: pearson(result.rewards[t], mdp.rewards[t])
            for t, name in enumerate(_task_names(mdp))
        },
        "policy_total_variation": float(total_variation.mean()),
        "consistency_residual": result.residual,
        "pca": {
            "axis": config.fit.pca_axis,
            "explained_variance_ratio": result.pca.explained_variance_ratio.tolist(),
            "top_variance": float(result.pca.explained_variance_ratio.sum()),
            "degenerate": result.pca.degenerate,
        },
    }


def _task_names(mdp: TabularMDP) -> list[str]:
    return list(mdp.task_names) or [f"task-{t}" for t in range(mdp.n_tasks)]


def _write_discrete_artifacts(run: RunDirectory, result: DiscreteRun, axis: str) -> None:
    mdp = result.mdp
    labels = state_action_labels(mdp.n_states, mdp.n_actions, mdp.action_names)
    tasks = _task_names(mdp)
    write_document(run.models / "mdp.json", mdp.to_dict())
    write_document(
        run.models / "skills.json",
        {
            "format": "skills.v1",
            "skills": result.skills.to_dict(),
            "weights": result.weights.to_dict(),
        },
    )
    run.table("skills.csv", matrix_table(result.skills.phi, labels))
    components = result.pca.components.T
    pc_rows = labels if axis == "skills" else [f"skill_{j}" for j in range(components.shape[0])]
    run.table("pc_skills.csv", matrix_table(components, pc_rows, column_prefix="pc"))
    run.table("pca_variance.csv", variance_table(result.pca.explained_variance_ratio))
    run.table("rewards.csv", reward_table(mdp.rewards, result.rewards, tasks))
    run.table("weights_u.csv", matrix_table(result.weights.u, tasks))
    if result.weights.w is not None:
        run.table("weights_w.csv", matrix_table(result.weights.w, tasks))


def run_gridworld(config: base.Config, output_dir: Path) -> dict[str, Any]:
    """
    Regenerate the gridworld experiment end to end.

    Builds the gridworld, solves every task, samples demonstrations,
    factorizes the transitions, fits skill weights, recovers rewards and
    decomposes the skills with PCA.

    Args:
        config: Validated ``GridworldRunConfig``.
        output_dir: Directory receiving all outputs.

    Returns:
        The report written to ``report.json``.

    Raises:
        StageError: If a stage fails.

    """
    run = RunDirectory(output_dir)
    _write_config(run, config)
    flags = RunFlags(config.strict)
    with stage("build-env"):
        mdp = build_environment("gridworld", config)
    result = _run_discrete(mdp, config, flags)

    report = report_document(
        "gridworld", config.seed, **_discrete_report(result, config), flags=flags.raised
    )
    with stage("write-outputs"):
        _write_discrete_artifacts(run, result, config.fit.pca_axis)
        run.document("report.json", report)
    logger.info(
        f"Gridworld: reward correlation {report['pearson_reward']:.3f}, "
        f"top-{result.pca.components.shape[0]} PCA variance {report['pca']['top_variance']:.3f}"
    )
    return report


def _path_membership(mdp: TabularMDP, rows: np.ndarray, path: set[int]) -> list[bool]:
    """Whether each flattened ``(s, a)`` row starts on or leads onto the path."""
    return [
        int(row) // mdp.n_actions in path
        or mdp.successor(int(row) // mdp.n_actions, int(row) % mdp.n_actions) in path
        for row in rows
    ]


def run_labyrinth(config: base.Config, output_dir: Path) -> dict[str, Any]:
    """
    Regenerate the labyrinth experiment end to end.

    On top of the discrete pipeline, exports the top reward-weight skills of
    every task, checks how much of the water task's leading skill lies on the
    root-to-port path, and compares effective dimensions before and after PCA.

    Args:
        config: Validated ``LabyrinthRunConfig``.
        output_dir: Directory receiving all outputs.

    Returns:
        The report written to ``report.json``.

    Raises:
        StageError: If a stage fails.

    """
    run = RunDirectory(output_dir)
    _write_config(run, config)
    flags = RunFlags(config.strict)
    with stage("build-env"):
        spec = labyrinth_spec(config)
        mdp = build_environment("labyrinth", config)
    result = _run_discrete(mdp, config, flags)
    phi = result.skills.phi
    active_mask = result.skills.active(SINGULAR_RTOL)
    tasks = _task_names(mdp)

    assert result.weights.w is not None
    with stage("interpret"):
        path = set(envs.labyrinth_path(0, spec.resolved_port))
        top_rows: list[dict[str, Any]] = []
        entry_rows: list[dict[str, Any]] = []
        for t, name in enumerate(tasks):
            leading = discrete.top_weight_skills(result.weights, t, k=2, active=active_mask)
            for rank, j in enumerate(leading):
                top_rows.append(
                    {
                        "task": name,
                        "rank": rank,
                        "skill": int(j),
                        "w": float(result.weights.w[t, j]),
                    }
                )
                entries = discrete.top_entries(phi[:, j])
                for row, on_path in zip(entries, _path_membership(mdp, entries, path), strict=True):
                    entry_rows.append(
                        {
                            "task": name,
                            "skill": int(j),
                            "state": int(row) // mdp.n_actions,
                            "action": mdp.action_names[int(row) % mdp.n_actions],
                            "phi": float(phi[row, j]),
                            "on_path": on_path,
                        }
                    )
        water_skill = int(
            discrete.top_weight_skills(result.weights, 0, k=1, active=active_mask)[0]
        )
        water_entries = discrete.top_entries(phi[:, water_skill])
        membership = _path_membership(mdp, water_entries, path)
        path_fraction = float(np.mean(membership)) if membership else 0.0

    with stage("effective-dimension"):
        mixed = analysis.generic_basis(phi[:, active_mask], stage_rng(config.seed, "skill-gauge"))
        pre = analysis.effective_dimension(mixed)
        pca_mixed = analysis.pca_skills(mixed, mixed.shape[1], "skills")
        post = analysis.effective_dimension(pca_mixed.components.T)
        comparison = analysis.compare_effective_dimension(pre, post)

    report = report_document(
        "labyrinth",
        config.seed,
        **_discrete_report(result, config),
        water_path={
            "skill": water_skill,
            "path": sorted(path),
            "fraction_on_path": path_fraction,
            "entries": len(membership),
        },
        effective_dimension={"pre": pre.to_dict(), "post": post.to_dict(), **comparison},
        flags=flags.raised,
    )
    with stage("write-outputs"):
        _write_discrete_artifacts(run, result, config.fit.pca_axis)
        run.table("top_skills.csv", pd.DataFrame(top_rows))
        run.table("top_skill_entries.csv", pd.DataFrame(entry_rows))
        run.table("effective_dimension.csv", effective_dimension_table({"pre": pre, "post": post}))
        run.document("report.json", report)
    logger.info(
        "Labyrinth: reward correlation per task "
        + ", ".join(f"{k} {v:.3f}" for k, v in report["pearson_reward_per_task"].items())
        + f"; water skill path fraction {path_fraction:.2f}"
    )
    return report


# -------------------------------------------------------------- continuous


@dataclass(eq=False)
class ContinuousData:
    """Dataset of a continuous run and its held-out split."""

    train: Dataset
    test: Dataset
    source: str
    synthetic: SyntheticSpec | None = None
    part_names: tuple[str, ...] = ()


@dataclass(eq=False)
class ContinuousFit:
    """Model and metrics of one continuous fit."""

    data: ContinuousData
    model: continuous.EnergyModel
    metrics: list[continuous.EpochMetrics]


def synthetic_spec(config: base.Config, seed: int) -> SyntheticSpec:
    """Generator settings of a run configuration with the given seed."""
    synth = config.synthetic
    return SyntheticSpec(
        state_dim=synth.state_dim,
        dynamics=synth.dynamics,
        noise_std=synth.noise_std,
        length=synth.length,
        seed=seed,
        action_noise=synth.action_noise,
    )


def load_continuous_data(config: base.Config, seed: int) -> ContinuousData:
    """
    Load or generate the dataset of a continuous run and split it.

    Source precedence: ``dataset`` file, then ``pose_csv`` recording, then
    the synthetic generator.

    Args:
        config: Validated ``ContinuousRunConfig``.
        seed: Seed of the synthetic draw and of the split.

    Returns:
        Train and test splits with their provenance.

    Raises:
        StageError: If loading or splitting fails.

    """
    spec = None
    part_names: tuple[str, ...] = ()
    with stage("load-data"):
        if config.dataset:
            source = "dataset"
            dataset = load_dataset(Path(config.dataset))
        elif config.pose_csv:
            source = "pose"
            recording = load_recording(Path(config.pose_csv))
            if config.interpolate_gaps > 0:
                recording = datasets.interpolate_gaps(recording, config.interpolate_gaps)
            dataset = datasets.derive_dataset(recording, config.dt)
            part_names = recording.part_names
        else:
            source = f"synthetic:{config.synthetic.dynamics}"
            spec = synthetic_spec(config, seed)
            dataset = datasets.generate_synthetic(spec)
        if dataset.is_discrete:
            raise ConfigurationError("Continuous commands need a continuous dataset")
    with stage("split"):
        train, test = datasets.split_train_test(dataset, config.train_ratio, seed, config.n_blocks)
    logger.info(
        f"Loaded {len(dataset)} transitions ({source}): {len(train)} train, {len(test)} test"
    )
    return ContinuousData(train, test, source, spec, part_names)


def fit_continuous(config: base.Config, seed: int) -> ContinuousFit:
    """
    Train psi and nu, then the skill map and weight timeline, on the train split.

    Args:
        config: Validated ``ContinuousRunConfig``.
        seed: Root seed of this fit.

    Returns:
        The fitted model and its training metrics.

    Raises:
        StageError: If a stage fails.

    """
    data = load_continuous_data(config, seed)
    nce = config.nce
    with stage("nce-transition"):
        model, metrics = continuous.nce_fit_transition(
            data.train,
            nce.g,
            nce.k,
            "marginal-shuffle",
            nce.transition_epochs,
            nce.lr,
            seed,
            hidden=tuple(nce.psi_hidden),
            activation=nce.activation,
            batch_size=nce.batch_size,
            momentum=nce.momentum,
            lr_decay=nce.lr_decay,
            decay_every=nce.decay_every,
            validation=data.test,
        )
    with stage("nce-policy"):
        model, policy_metrics = continuous.nce_fit_policy(
            data.train,
            model,
            nce.d,
            nce.k,
            nce.sigma,
            nce.time_bin_width,
            nce.policy_rounds,
            nce.lr,
            seed,
            f_hidden=tuple(nce.f_hidden),
            activation=nce.activation,
            lr_u=nce.lr_u,
            u_steps=nce.u_steps,
            batch_size=nce.batch_size,
            momentum=nce.momentum,
            lr_decay=nce.lr_decay,
            decay_every=nce.decay_every,
            smoothness_weight=nce.smoothness_weight,
        )
    return ContinuousFit(data, model, metrics + policy_metrics)


def _regime_section(fit: ContinuousFit) -> dict[str, float] | None:
    spec = fit.data.synthetic
    if spec is None or spec.dynamics != "two-regime-switch":
        return None
    model = fit.model
    boundary = (spec.length // 2 - model.t_min) // model.time_bin_width
    if not 0 < boundary < model.n_bins:
        return None
    return analysis.regime_shift(model.u_timeline, boundary)


def run_continuous_fit(config: base.Config, output_dir: Path) -> dict[str, Any]:
    """
    Fit the energy model on the train split and serialize it.

    Args:
        config: Validated ``ContinuousRunConfig``.
        output_dir: Directory receiving all outputs.

    Returns:
        The report written to ``report.json``.

    Raises:
        StageError: If a stage fails.

    """
    run = RunDirectory(output_dir)
    _write_config(run, config)
    fit = fit_continuous(config, config.seed)
    data, model = fit.data, fit.model

    with stage("evaluate"):
        auc = {
            "transition_train": continuous.eval_transition_auc(model, data.train, config.seed),
            "transition_test": continuous.eval_transition_auc(model, data.test, config.seed),
            "policy_train": continuous.eval_auc(model, data.train, config.seed),
        }
        bayes = None
        if data.synthetic is not None:
            bayes = {
                "train": datasets.bayes_auc(data.synthetic, data.train, config.seed),
                "test": datasets.bayes_auc(data.synthetic, data.test, config.seed),
            }

    report = report_document(
        "continuous-fit",
        config.seed,
        dataset={
            "source": data.source,
            "train_rows": len(data.train),
            "test_rows": len(data.test),
            "state_dim": data.train.state_dim,
            "action_dim": data.train.action_dim,
        },
        model={"g": model.g, "d": model.d, "bins": model.n_bins, "t_min": model.t_min},
        final_loss={
            stage_name: next(m.loss for m in reversed(fit.metrics) if m.stage == stage_name)
            for stage_name in ("transition", "policy")
        },
        auc=auc,
        bayes_auc=bayes,
        regime_shift=_regime_section(fit),
    )
    with stage("write-outputs"):
        write_document(run.models / "ebm.json", model.to_dict())
        run.table("metrics.csv", metrics_table(fit.metrics))
        run.table("u_timeline.csv", timeline_table(model))
        run.document("report.json", report)
    logger.info(
        f"Continuous fit: transition AUC {auc['transition_test']:.3f} (held out), "
        f"policy AUC {auc['policy_train']:.3f} (train)"
    )
    return report


def evaluate_continuous(
    config: base.Config, seed: int, model: continuous.EnergyModel, data: ContinuousData
) -> tuple[continuous.EnergyModel, list[continuous.EpochMetrics], dict[str, Any]]:
    """
    Re-estimate the weight timeline on the test split with f frozen and score both splits.

    Args:
        config: Validated ``ContinuousRunConfig``.
        seed: Root seed of the fit being evaluated.
        model: Fitted model.
        data: Splits the model was fitted on.

    Returns:
        Test-time model, its metrics and the AUC sections.

    Raises:
        StageError: If a stage fails.

    """
    nce = config.nce
    with stage("nce-policy-test"):
        test_model, metrics = continuous.nce_fit_policy(
            data.test,
            model,
            k=model.k,
            sigma=model.sigma,
            time_bin_width=model.time_bin_width,
            rounds=nce.test_rounds,
            lr=nce.lr,
            seed=seed,
            freeze_f=True,
            lr_u=nce.lr_u,
            u_steps=nce.u_steps,
            smoothness_weight=model.smoothness_weight,
        )
    with stage("evaluate"):
        sections: dict[str, Any] = {
            "auc": {
                "transition_train": continuous.eval_transition_auc(model, data.train, seed),
                "transition_test": continuous.eval_transition_auc(model, data.test, seed),
                "policy_train": continuous.eval_auc(model, data.train, seed),
                "policy_test": continuous.eval_auc(test_model, data.test, seed),
            },
            "bayes_auc": None,
        }
        if data.synthetic is not None:
            sections["bayes_auc"] = {
                "train": datasets.bayes_auc(data.synthetic, data.train, seed),
                "test": datasets.bayes_auc(data.synthetic, data.test, seed),
            }
    return test_model, metrics, sections


def _motion_fields(
    config: base.Config, model: continuous.EnergyModel, test: Dataset
) -> list[Any]:
    n_skills = min(config.motion_skills, model.d)
    top_k = min(config.motion_top_k, len(test))
    return [analysis.motion_field(model, test, j, top_k) for j in range(n_skills)]


def run_continuous_eval(
    config: base.Config, run_dir: Path, output_dir: Path
) -> dict[str, Any]:
    """
    Evaluate a fitted model on its held-out blocks.

    Args:
        config: Validated ``ContinuousRunConfig``, normally the fit's resolved config.
        run_dir: Output directory of the fit (holds ``models/ebm.json``).
        output_dir: Directory receiving the evaluation outputs.

    Returns:
        The report written to ``eval_report.json``.

    Raises:
        StageError: If the fit artifact is missing or a stage fails.

    """
    with stage("load-model"):
        model = continuous.EnergyModel.from_dict(
            read_document(run_dir / "models" / "ebm.json", "ebm.v1")
        )
        if model.skill_map_f is None:
            raise DataError(f"Model in '{run_dir}' has no fitted skill map")
    run = RunDirectory(output_dir)
    _write_config(run, config, "config.eval.resolved.json")
    data = load_continuous_data(config, config.seed)
    test_model, metrics, sections = evaluate_continuous(config, config.seed, model, data)

    with stage("motion-fields"):
        fields = _motion_fields(config, model, data.test)
        svgs: dict[str, str] = {}
        dim = data.test.state_dim
        if fields and dim % 2 == 0 and dim == data.test.action_dim:
            for mf in fields:
                svgs[f"motion_field_{mf.skill_index}.svg"] = render_motion_field_svg(
                    mf, data.part_names
                )
        elif fields:
            logger.info(f"Skipping motion-field SVGs: {dim}-dimensional states are not points")

    report = report_document(
        "continuous-eval",
        config.seed,
        **sections,
        test_bins=test_model.n_bins,
        final_loss=metrics[-1].loss,
        motion_fields=len(fields),
    )
    with stage("write-outputs"):
        run.table("metrics_test.csv", metrics_table(metrics))
        run.table("u_timeline_test.csv", timeline_table(test_model))
        run.document("motion_fields.json", motion_fields_document(fields, data.part_names))
        for name, svg in svgs.items():
            run.text(name, svg)
        run.document("eval_report.json", report)
    auc = sections["auc"]
    logger.info(
        f"Continuous eval: policy AUC {auc['policy_test']:.3f} test / "
        f"{auc['policy_train']:.3f} train, transition AUC {auc['transition_test']:.3f}"
    )
    return report


def run_continuous_repeat(config: base.Config, output_dir: Path) -> dict[str, Any]:
    """
    Repeat fit and evaluation with seeds ``seed, seed + 1, ...``.

    Args:
        config: Validated ``ContinuousRunConfig``; ``repeats`` sets the count.
        output_dir: Directory receiving all outputs.

    Returns:
        The report written to ``report.json``; ``auc_boxplot.csv`` has one
        row per repeat.

    Raises:
        StageError: If a stage fails in any repeat.

    """
    run = RunDirectory(output_dir)
    _write_config(run, config)
    rows: list[dict[str, Any]] = []
    for r in range(config.repeats):
        seed = config.seed + r
        logger.info(f"Repeat {r + 1}/{config.repeats} (seed {seed})")
        fit = fit_continuous(config, seed)
        _, _, sections = evaluate_continuous(config, seed, fit.model, fit.data)
        row: dict[str, Any] = {"repeat": r, "seed": seed, **sections["auc"]}
        if sections["bayes_auc"] is not None:
            row["bayes_transition_test"] = sections["bayes_auc"]["test"]["transition"]
            row["bayes_policy_test"] = sections["bayes_auc"]["test"]["policy"]
        rows.append(row)

    table = pd.DataFrame(rows)
    summary = table.drop(columns=["repeat", "seed"]).describe().loc[
        ["mean", "std", "min", "25%", "50%", "75%", "max"]
    ].fillna(0.0)
    report = report_document(
        "continuous-repeat",
        config.seed,
        repeats=config.repeats,
        summary={col: {k: float(v) for k, v in summary[col].items()} for col in summary.columns},
    )
    with stage("write-outputs"):
        run.table("auc_boxplot.csv", table)
        run.document("report.json", report)
    return report


def write_synthetic(config: base.Config, path: Path) -> Dataset:
    """
    Generate a synthetic dataset and write it (CSV or ``.npz`` by suffix).

    Args:
        config: Validated ``ContinuousRunConfig``.
        path: Target file.

    Returns:
        The generated dataset.

    """
    with stage("synthesize"):
        dataset = datasets.generate_synthetic(synthetic_spec(config, config.seed))
        save_dataset(dataset, path)
    logger.info(f"Wrote {len(dataset)} synthetic transitions to {path}")
    return dataset
