"""Exception hierarchy shared by the library and the command line."""

from __future__ import annotations


class FosError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(FosError, ValueError):
    """Invalid arguments, settings or run configuration."""


class ShapeError(FosError, ValueError):
    """Array lengths or dimensions that do not line up."""


class DomainError(FosError, ValueError):
    """A value outside the domain a function is defined on."""


class IngestionError(FosError, ValueError):
    """A dataset file that cannot be read into a FunctionalDataset."""

    def __init__(self, message: str, row: int | None = None, sample_id: str | None = None):
        super().__init__(message)
        self.row = row
        self.sample_id = sample_id


class NumericError(FosError, ArithmeticError):
    """Non-finite values, degenerate variances or singular systems."""

    def __init__(self, message: str, epoch: int | None = None, replicate: int | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.replicate = replicate

    def with_replicate(self, replicate: int) -> NumericError:
        return NumericError(f"replicate {replicate}: {self}", epoch=self.epoch, replicate=replicate)
