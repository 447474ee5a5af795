"""Custom exceptions for skillbasis."""

from mkdocs.exceptions import PluginError


class SkillBasisError(PluginError):
    """Base exception for all skillbasis errors.

    ``PluginError`` is a ``click.ClickException``: the command line prints the
    message and exits with the class's ``exit_code``.
    """

    exit_code = 1


class ConfigurationError(SkillBasisError):
    """Raised when a spec, config value or argument is invalid."""

    exit_code = 2


class ShapeMismatchError(ConfigurationError):
    """Raised when array shapes are inconsistent with each other."""

    pass


class TimeRangeError(ConfigurationError, IndexError):
    """Raised when a time index lies outside a fitted timeline."""

    pass


class DataError(SkillBasisError):
    """Raised when input data is malformed, too small or unreadable."""

    exit_code = 3


class NonFiniteDataError(DataError):
    """Raised when a recording contains non-finite coordinates."""

    pass


class MissingArtifactError(DataError):
    """Raised when a required artifact from an earlier run is absent."""

    pass


class FormatVersionError(DataError):
    """Raised when a file carries an unknown or missing version header."""

    pass


class NumericalError(SkillBasisError):
    """Raised when a numerical routine fails or a flagged result is fatal."""

    exit_code = 4


class StageError(SkillBasisError):
    """Raised by pipelines; names the failing stage and keeps the cause's exit code."""

    def __init__(self, stage: str, cause: Exception):
        """Wrap a stage failure.

        Args:
            stage: Name of the pipeline stage that failed.
            cause: The original exception.
        """
        super().__init__(f"Stage '{stage}' failed: {cause}")
        self.stage = stage
        self.exit_code = getattr(cause, "exit_code", 1)
