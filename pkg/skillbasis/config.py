"""Configuration schemas for skillbasis runs.

Settings are declared the way MkDocs declares plugin options: a
``mkdocs.config.base.Config`` subclass whose class attributes are
``config_options``. Nested sections use ``SubConfig``.
"""

import json
from pathlib import Path
from typing import Any

from mkdocs.config import base
from mkdocs.config import config_options as c
from mkdocs.plugins import get_plugin_logger

from .exceptions import ConfigurationError

logger = get_plugin_logger(__name__)


class Real(c.BaseConfigOption[float]):
    """A number (int or float, cast to float) with optional bounds."""

    def __init__(
        self,
        default: float | None = None,
        *,
        minimum: float | None = None,
        maximum: float | None = None,
        exclusive: bool = False,
    ) -> None:
        """Declare the option.

        Args:
            default: Value used when the key is absent; ``None`` inside ``Optional``.
            minimum: Lower bound, if any.
            maximum: Upper bound, if any.
            exclusive: Whether both bounds are exclusive.
        """
        super().__init__()
        self.default = default
        self.minimum = minimum
        self.maximum = maximum
        self.exclusive = exclusive

    def run_validation(self, value: object) -> float:
        """Check the type and the bounds.

        Args:
            value: Raw configuration value.

        Returns:
            The value as float.

        Raises:
            ValidationError: If the value is not a number or out of range.
        """
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise base.ValidationError(f"Expected a number but received: {value!r}")
        number = float(value)
        low_bad = self.minimum is not None and (
            number <= self.minimum if self.exclusive else number < self.minimum
        )
        high_bad = self.maximum is not None and (
            number >= self.maximum if self.exclusive else number > self.maximum
        )
        if low_bad or high_bad:
            left, right = ("(", ")") if self.exclusive else ("[", "]")
            raise base.ValidationError(
                f"Value {number!r} outside {left}{self.minimum}, {self.maximum}{right}"
            )
        return number


class Count(c.BaseConfigOption[int]):
    """An integer with a lower bound."""

    def __init__(self, default: int | None = None, *, minimum: int = 0) -> None:
        """Declare the option.

        Args:
            default: Value used when the key is absent; ``None`` inside ``Optional``.
            minimum: Smallest accepted value.
        """
        super().__init__()
        self.default = default
        self.minimum = minimum

    def run_validation(self, value: object) -> int:
        """Check the type and the lower bound.

        Args:
            value: Raw configuration value.

        Returns:
            The value as int.

        Raises:
            ValidationError: If the value is not an integer or too small.
        """
        if isinstance(value, bool) or not isinstance(value, int):
            raise base.ValidationError(f"Expected an integer but received: {value!r}")
        if value < self.minimum:
            raise base.ValidationError(f"Value {value} is below the minimum {self.minimum}")
        return value


class GridworldConfig(base.Config):
    """Multi-task gridworld layout."""

    width = Count(3, minimum=1)
    height = Count(3, minimum=1)
    # Empty means one task per cell, row-major.
    task_locations = c.ListOfItems(c.ListOfItems(c.Type(int), default=[]), default=[])
    reward_shape = c.Choice(("approach", "successor"), default="approach")


class LabyrinthConfig(base.Config):
    """Binary-tree maze layout."""

    depth = Count(4, minimum=1)
    home_node = Count(0)
    port_node = c.Optional(Count())
    explore_reward = Real(0.05, minimum=0.0, maximum=1.0)


class SolverConfig(base.Config):
    """Soft value iteration and demonstration sampling."""

    gamma = Real(0.9, minimum=0.0, maximum=1.0, exclusive=True)
    tol = Real(1e-8, minimum=0.0, exclusive=True)
    max_iters = Count(10_000, minimum=1)
    episodes = Count(1000, minimum=1)
    horizon = Count(12, minimum=1)


class DiscreteFitConfig(base.Config):
    """Skill factorization and per-task MLE."""

    rank_d = Count(64, minimum=1)
    transition_source = c.Choice(("true", "empirical"), default="true")
    lr = Real(0.5, minimum=0.0, exclusive=True)
    tol = Real(1e-6, minimum=0.0, exclusive=True)
    max_iters = Count(20_000, minimum=1)
    ridge = Real(1e-4, minimum=0.0)
    n_pcs = Count(8, minimum=1)
    pca_axis = c.Choice(("skills", "pairs"), default="skills")


class NceConfig(base.Config):
    """Energy-model architecture and ranking-NCE training."""

    g = Count(32, minimum=1)
    d = Count(64, minimum=1)
    psi_hidden = c.ListOfItems(Count(1, minimum=1), default=[64, 64])
    f_hidden = c.ListOfItems(Count(1, minimum=1), default=[32])
    activation = c.Choice(("tanh", "relu", "identity"), default="tanh")
    k = Count(8, minimum=1)
    transition_epochs = Count(40, minimum=1)
    policy_rounds = Count(40, minimum=1)
    u_steps = Count(5, minimum=1)
    test_rounds = Count(60, minimum=1)
    lr = Real(0.05, minimum=0.0, exclusive=True)
    lr_u = Real(0.5, minimum=0.0, exclusive=True)
    momentum = Real(0.9, minimum=0.0, maximum=1.0)
    batch_size = Count(256, minimum=1)
    lr_decay = Real(0.5, minimum=0.0, maximum=1.0, exclusive=True)
    decay_every = Count(20, minimum=1)
    sigma = Real(0.1, minimum=0.0, exclusive=True)
    smoothness_weight = c.Optional(Real(minimum=0.0))
    time_bin_width = Count(1, minimum=1)


class SyntheticConfig(base.Config):
    """Synthetic continuous data generator."""

    state_dim = Count(2, minimum=1)
    dynamics = c.Choice(
        ("linear-gaussian", "two-regime-switch", "signal-free"), default="linear-gaussian"
    )
    noise_std = Real(0.1, minimum=0.0)
    action_noise = Real(0.2, minimum=0.0)
    length = Count(2000, minimum=2)


class _RunConfig(base.Config):
    """Globals shared by every command."""

    seed = Count(0)
    output_dir = c.Type(str, default="out/run")
    log_level = c.Choice(("DEBUG", "INFO", "WARNING", "ERROR"), default="INFO")
    strict = c.Type(bool, default=False)


class GridworldRunConfig(_RunConfig):
    """Settings of the gridworld regeneration."""

    env = c.SubConfig(GridworldConfig)
    solver = c.SubConfig(SolverConfig)
    fit = c.SubConfig(DiscreteFitConfig)


class LabyrinthRunConfig(_RunConfig):
    """Settings of the labyrinth regeneration."""

    env = c.SubConfig(LabyrinthConfig)
    solver = c.SubConfig(SolverConfig)
    fit = c.SubConfig(DiscreteFitConfig)


class ContinuousRunConfig(_RunConfig):
    """Settings of the continuous fit / eval commands."""

    dataset = c.Optional(c.Type(str))
    pose_csv = c.Optional(c.Type(str))
    synthetic = c.SubConfig(SyntheticConfig)
    nce = c.SubConfig(NceConfig)
    dt = Real(1.0, minimum=0.0, exclusive=True)
    interpolate_gaps = Count(0)
    train_ratio = Real(0.8, minimum=0.0, maximum=1.0, exclusive=True)
    n_blocks = Count(10, minimum=2)
    repeats = Count(10, minimum=1)
    motion_top_k = Count(100, minimum=1)
    motion_skills = Count(8, minimum=0)


# Defaults that differ from the library defaults for the regenerations.
COMMAND_DEFAULTS: dict[type[base.Config], dict[str, Any]] = {
    GridworldRunConfig: {"env": {"reward_shape": "successor"}, "fit": {"rank_d": 64}},
    LabyrinthRunConfig: {
        "solver": {"episodes": 2000, "horizon": 16},
        "fit": {"rank_d": 64},
    },
    ContinuousRunConfig: {},
}


def _merge(target: dict[str, Any], patch: dict[str, Any]) -> dict[str, Any]:
    """Recursively merge ``patch`` into ``target`` (in place)."""
    for key, value in patch.items():
        if isinstance(value, dict) and isinstance(target.get(key), dict):
            _merge(target[key], value)
        else:
            target[key] = value
    return target


def parse_override(item: str) -> dict[str, Any]:
    """
    Turn ``"nce.epochs=10"`` into ``{"nce": {"epochs": 10}}``.

    Values are parsed as JSON when possible and kept as strings otherwise.

    Args:
        item: Dotted key, ``=``, value.

    Returns:
        Nested dictionary holding the single setting.

    Raises:
        ConfigurationError: If the item has no ``=``.

    """
    if "=" not in item:
        raise ConfigurationError(f"Override '{item}' must look like key=value")
    key, raw = item.split("=", 1)
    try:
        value: Any = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    result: dict[str, Any] = {}
    node = result
    parts = key.strip().split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value
    return result


def load_run_config(
    config_class: type[base.Config],
    config_file: Path | None = None,
    overrides: list[dict[str, Any]] | None = None,
) -> base.Config:
    """
    Build and validate a run configuration.

    Precedence, lowest first: schema defaults, command defaults, the JSON
    config file, then overrides (command-line flags).

    Args:
        config_class: One of the run config classes.
        config_file: Optional JSON file (e.g. a ``config.resolved.json``).
        overrides: Settings from command-line flags.

    Returns:
        The validated configuration.

    Raises:
        ConfigurationError: If the file is unreadable or any value is invalid.

    """
    values: dict[str, Any] = json.loads(json.dumps(COMMAND_DEFAULTS.get(config_class, {})))
    if config_file is not None:
        try:
            file_values = json.loads(config_file.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Cannot read config file '{config_file}': {e}") from e
        if not isinstance(file_values, dict):
            raise ConfigurationError(f"Config file '{config_file}' must hold a JSON object")
        _merge(values, file_values)
    for patch in overrides or []:
        _merge(values, patch)

    config = config_class()
    config.load_dict(values)
    errors, warnings = config.validate()
    for key, warning in warnings:
        logger.warning(f"Config option '{key}': {warning}")
    if errors:
        msg = "Invalid configuration:\n"
        for key, error in errors:
            msg += f"  - {key}: {error}\n"
        raise ConfigurationError(msg)
    return config


def resolved_dict(config: base.Config) -> dict[str, Any]:
    """
    Return every effective value of a validated configuration, defaults included.

    Args:
        config: A validated configuration.

    Returns:
        Plain nested dictionary, suitable for ``config.resolved.json``.

    """
    result: dict[str, Any] = {}
    for key, _ in config._schema:
        value = config[key]
        result[key] = resolved_dict(value) if isinstance(value, base.Config) else value
    return result
