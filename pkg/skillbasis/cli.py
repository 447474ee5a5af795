"""Command line of skillbasis.

Every command takes ``--config`` (a JSON file such as a previous
``config.resolved.json``), repeated ``--set key=value`` overrides and a few
first-class flags; flags take precedence over ``--set``, which takes
precedence over the file. Errors exit with 2 (configuration), 3 (data) or
4 (numerical failure).
"""

import functools
import logging
from collections.abc import Callable
from pathlib import Path
from typing import Any, TypeVar

import click
from mkdocs.__main__ import ColorFormatter
from mkdocs.config import base

from . import __version__
from .config import (
    ContinuousRunConfig,
    GridworldRunConfig,
    LabyrinthRunConfig,
    load_run_config,
    parse_override,
)
from .exceptions import MissingArtifactError
from .parser import write_document
from .pipelines import (
    build_environment,
    run_continuous_eval,
    run_continuous_fit,
    run_continuous_repeat,
    run_gridworld,
    run_labyrinth,
    write_synthetic,
)

F = TypeVar("F", bound=Callable[..., Any])

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class ClickHandler(logging.Handler):
    """Write records through ``click.echo`` to the current standard error."""

    def emit(self, record: logging.LogRecord) -> None:
        """Emit a record.

        Args:
            record: The log record.
        """
        try:
            click.echo(self.format(record), err=True)
        except Exception:
            self.handleError(record)


def _root_logger() -> logging.Logger:
    """The ``mkdocs`` logger that every plugin-style module logger propagates to."""
    logger = logging.getLogger("mkdocs")
    if not any(isinstance(h, ClickHandler) for h in logger.handlers):
        handler = ClickHandler()
        handler.setFormatter(ColorFormatter())
        logger.addHandler(handler)
    return logger


def common_options(func: F) -> F:
    """Add the options shared by every run command."""
    options = [
        click.option(
            "--config",
            "config_file",
            type=click.Path(exists=True, dir_okay=False, path_type=Path),
            help="JSON configuration file.",
        ),
        click.option(
            "--set",
            "overrides",
            multiple=True,
            metavar="KEY=VALUE",
            help="Override one setting, e.g. nce.k=4. Repeatable.",
        ),
        click.option("--seed", type=int, help="Root seed of the run."),
        click.option("--output-dir", type=click.Path(path_type=Path), help="Output directory."),
        click.option(
            "--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), help="Log level."
        ),
        click.option(
            "--strict/--no-strict",
            default=None,
            help="Treat flagged non-convergence as a fatal numerical error.",
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _nested(key: str, value: Any) -> dict[str, Any]:
    node: dict[str, Any] = {}
    result = node
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value
    return result


def _load(
    config_class: type[base.Config],
    config_file: Path | None,
    overrides: tuple[str, ...],
    flags: dict[str, Any],
) -> base.Config:
    """Merge file, ``--set`` items and flags, validate, and apply the log level."""
    patches = [parse_override(item) for item in overrides]
    for key, value in flags.items():
        if value is not None:
            patches.append(_nested(key, str(value) if isinstance(value, Path) else value))
    config = load_run_config(config_class, config_file, patches)
    _root_logger().setLevel(config.log_level)
    return config


def _global_flags(
    seed: int | None, output_dir: Path | None, log_level: str | None, strict: bool | None
) -> dict[str, Any]:
    return {
        "seed": seed,
        "output_dir": output_dir,
        "log_level": None if log_level is None else log_level.upper(),
        "strict": strict,
    }


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, "-V", "--version")
def cli() -> None:
    """Skill discovery, compositional policy fitting and reward recovery."""
    _root_logger().setLevel(logging.INFO)


def _discrete_flags(func: F) -> F:
    options = [
        click.option("--episodes", type=int, help="Demonstration episodes per task."),
        click.option("--horizon", type=int, help="Steps per episode."),
        click.option("--gamma", type=float, help="Discount factor."),
        click.option("--rank-d", type=int, help="Number of skills."),
        click.option(
            "--transition-source",
            type=click.Choice(("true", "empirical")),
            help="Factorize the true or the empirical transition tensor.",
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _discrete_overrides(
    episodes: int | None,
    horizon: int | None,
    gamma: float | None,
    rank_d: int | None,
    transition_source: str | None,
) -> dict[str, Any]:
    return {
        "solver.episodes": episodes,
        "solver.horizon": horizon,
        "solver.gamma": gamma,
        "fit.rank_d": rank_d,
        "fit.transition_source": transition_source,
    }


@cli.command()
@common_options
@_discrete_flags
@click.option("--width", type=int, help="Grid columns.")
@click.option("--height", type=int, help="Grid rows.")
@click.option(
    "--reward-shape", type=click.Choice(("approach", "successor")), help="Task reward shape."
)
def gridworld(
    config_file: Path | None,
    overrides: tuple[str, ...],
    seed: int | None,
    output_dir: Path | None,
    log_level: str | None,
    strict: bool | None,
    width: int | None,
    height: int | None,
    reward_shape: str | None,
    **discrete: Any,
) -> None:
    """Regenerate the multi-task gridworld experiment."""
    config = _load(
        GridworldRunConfig,
        config_file,
        overrides,
        {
            **_global_flags(seed, output_dir, log_level, strict),
            **_discrete_overrides(**discrete),
            "env.width": width,
            "env.height": height,
            "env.reward_shape": reward_shape,
        },
    )
    report = run_gridworld(config, Path(config.output_dir))
    click.echo(f"pearson_reward={report['pearson_reward']:.4f}")


@cli.command()
@common_options
@_discrete_flags
@click.option("--depth", type=int, help="Tree depth.")
@click.option("--port-node", type=int, help="Node of the water port.")
def labyrinth(
    config_file: Path | None,
    overrides: tuple[str, ...],
    seed: int | None,
    output_dir: Path | None,
    log_level: str | None,
    strict: bool | None,
    depth: int | None,
    port_node: int | None,
    **discrete: Any,
) -> None:
    """Regenerate the binary-tree labyrinth experiment."""
    config = _load(
        LabyrinthRunConfig,
        config_file,
        overrides,
        {
            **_global_flags(seed, output_dir, log_level, strict),
            **_discrete_overrides(**discrete),
            "env.depth": depth,
            "env.port_node": port_node,
        },
    )
    report = run_labyrinth(config, Path(config.output_dir))
    per_task = report["pearson_reward_per_task"]
    click.echo(" ".join(f"{name}={value:.4f}" for name, value in per_task.items()))


def _data_flags(func: F) -> F:
    options = [
        click.option(
            "--dataset", "dataset_path", type=click.Path(path_type=Path), help="Dataset CSV/NPZ."
        ),
        click.option(
            "--pose-csv", "pose_path", type=click.Path(path_type=Path), help="Pose recording."
        ),
        click.option(
            "--synthetic",
            type=click.Choice(("linear-gaussian", "two-regime-switch", "signal-free")),
            help="Generate synthetic data with these dynamics.",
        ),
        click.option("--interpolate-gaps", type=int, help="Fill missing runs up to N frames."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _data_overrides(
    dataset_path: Path | None,
    pose_path: Path | None,
    synthetic: str | None,
    interpolate_gaps: int | None,
) -> dict[str, Any]:
    return {
        "dataset": dataset_path,
        "pose_csv": pose_path,
        "synthetic.dynamics": synthetic,
        "interpolate_gaps": interpolate_gaps,
    }


@cli.group(name="continuous")
def continuous_group() -> None:
    """Fit and evaluate the energy-based model on continuous data."""


@continuous_group.command()
@common_options
@_data_flags
def fit(
    config_file: Path | None,
    overrides: tuple[str, ...],
    seed: int | None,
    output_dir: Path | None,
    log_level: str | None,
    strict: bool | None,
    **data: Any,
) -> None:
    """Train psi, nu, f and u(t) on the train split."""
    config = _load(
        ContinuousRunConfig,
        config_file,
        overrides,
        {**_global_flags(seed, output_dir, log_level, strict), **_data_overrides(**data)},
    )
    report = run_continuous_fit(config, Path(config.output_dir))
    click.echo(f"transition_auc_test={report['auc']['transition_test']:.4f}")


@continuous_group.command(name="eval")
@click.argument("run_dir", type=click.Path(file_okay=False, path_type=Path))
@common_options
def eval_command(
    run_dir: Path,
    config_file: Path | None,
    overrides: tuple[str, ...],
    seed: int | None,
    output_dir: Path | None,
    log_level: str | None,
    strict: bool | None,
) -> None:
    """Re-estimate u(t) on the held-out blocks of a fit in RUN_DIR and report AUCs."""
    if config_file is None:
        config_file = run_dir / "config.resolved.json"
        if not config_file.is_file():
            raise MissingArtifactError(
                f"'{run_dir}' holds no config.resolved.json; run 'continuous fit' first"
            )
    config = _load(
        ContinuousRunConfig,
        config_file,
        overrides,
        _global_flags(seed, output_dir or run_dir, log_level, strict),
    )
    report = run_continuous_eval(config, run_dir, Path(config.output_dir))
    click.echo(f"policy_auc_test={report['auc']['policy_test']:.4f}")


@continuous_group.command()
@common_options
@_data_flags
@click.option("--repeats", type=int, help="Number of seeds.")
def repeat(
    config_file: Path | None,
    overrides: tuple[str, ...],
    seed: int | None,
    output_dir: Path | None,
    log_level: str | None,
    strict: bool | None,
    repeats: int | None,
    **data: Any,
) -> None:
    """Repeat fit and evaluation over consecutive seeds; writes auc_boxplot.csv."""
    config = _load(
        ContinuousRunConfig,
        config_file,
        overrides,
        {
            **_global_flags(seed, output_dir, log_level, strict),
            **_data_overrides(**data),
            "repeats": repeats,
        },
    )
    report = run_continuous_repeat(config, Path(config.output_dir))
    click.echo(f"repeats={report['repeats']}")


@cli.command()
@click.argument("output", type=click.Path(dir_okay=False, path_type=Path))
@common_options
@click.option(
    "--dynamics",
    type=click.Choice(("linear-gaussian", "two-regime-switch", "signal-free")),
    help="Generator dynamics.",
)
@click.option("--length", type=int, help="Number of states.")
@click.option("--state-dim", type=int, help="State and action dimension.")
@click.option("--noise-std", type=float, help="Transition noise.")
def synth(
    output: Path,
    config_file: Path | None,
    overrides: tuple[str, ...],
    seed: int | None,
    output_dir: Path | None,
    log_level: str | None,
    strict: bool | None,
    dynamics: str | None,
    length: int | None,
    state_dim: int | None,
    noise_std: float | None,
) -> None:
    """Write a synthetic continuous dataset to OUTPUT (.csv or .npz)."""
    config = _load(
        ContinuousRunConfig,
        config_file,
        overrides,
        {
            **_global_flags(seed, output_dir, log_level, strict),
            "synthetic.dynamics": dynamics,
            "synthetic.length": length,
            "synthetic.state_dim": state_dim,
            "synthetic.noise_std": noise_std,
        },
    )
    write_synthetic(config, output)


@cli.command(name="build-env")
@click.argument("kind", type=click.Choice(("gridworld", "labyrinth")))
@click.argument("output", type=click.Path(dir_okay=False, path_type=Path))
@common_options
@click.option("--depth", type=int, help="Labyrinth depth.")
@click.option("--width", type=int, help="Grid columns.")
@click.option("--height", type=int, help="Grid rows.")
def build_env(
    kind: str,
    output: Path,
    config_file: Path | None,
    overrides: tuple[str, ...],
    seed: int | None,
    output_dir: Path | None,
    log_level: str | None,
    strict: bool | None,
    depth: int | None,
    width: int | None,
    height: int | None,
) -> None:
    """Write the MDP of a gridworld or labyrinth as an mdp.v1 document."""
    config_class = GridworldRunConfig if kind == "gridworld" else LabyrinthRunConfig
    env_flags = (
        {"env.width": width, "env.height": height}
        if kind == "gridworld"
        else {"env.depth": depth}
    )
    config = _load(
        config_class,
        config_file,
        overrides,
        {**_global_flags(seed, output_dir, log_level, strict), **env_flags},
    )
    write_document(output, build_environment(kind, config).to_dict())
