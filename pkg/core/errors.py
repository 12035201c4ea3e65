"""
SCEF Error Hierarchy
====================

Every failure raised by the ``core`` package derives from :class:`ScefError`.
Each class carries the process exit code the command-line front end maps it
to, so ``cli.app`` never has to guess:

* 1 - usage errors (bad command line)
* 2 - data, format, configuration and precondition errors
* 3 - numeric failures (non-finite values, divergence)
"""

from __future__ import annotations


class ScefError(Exception):
    """Base class for all library errors."""

    exit_code: int = 2


class UsageError(ScefError):
    """Invalid command-line usage."""

    exit_code = 1


class DimensionError(ScefError, ValueError):
    """Tensor or filter shapes do not line up."""


class ParameterError(ScefError, ValueError):
    """A scalar parameter (rank, dimension, threshold, depth) is out of range."""


class ConfigError(ScefError, ValueError):
    """A network or training configuration does not validate."""

    def __init__(self, message: str, layer_index: int | None = None) -> None:
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)
        self.layer_index = layer_index


class FormatError(ScefError):
    """A file or container could not be parsed."""

    def __init__(self, message: str, entry: str | None = None) -> None:
        if entry is not None:
            message = f"{entry}: {message}"
        super().__init__(message)
        self.entry = entry


class ConsistencyError(ScefError):
    """Several inputs that must agree (e.g. checkpoint topologies) do not."""


class PreconditionError(ScefError):
    """The hypotheses of a check are not met by its inputs."""


class NumericError(ScefError, ArithmeticError):
    """Non-finite values where finite ones are required."""

    exit_code = 3


class DivergenceError(NumericError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, batch: int, loss: float) -> None:
        super().__init__(
            f"training diverged at epoch {epoch}, batch {batch} (loss={loss})"
        )
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


__all__ = [
    "ScefError",
    "UsageError",
    "DimensionError",
    "ParameterError",
    "ConfigError",
    "FormatError",
    "ConsistencyError",
    "PreconditionError",
    "NumericError",
    "DivergenceError",
]
