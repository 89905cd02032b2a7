"""Functional samples: a predictor vector plus a response curve on its own grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from core.errors import ConfigurationError, DomainError, ShapeError
from core.quadrature import QuadratureMode, TimeGrid, riemann_weights


@dataclass(frozen=True, eq=False)
class FunctionalSample:
    x: np.ndarray
    grid: TimeGrid
    y: np.ndarray
    sample_id: str | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64).reshape(-1)
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if not isinstance(self.grid, TimeGrid):
            object.__setattr__(self, "grid", TimeGrid(self.grid))
        if y.size != len(self.grid):
            raise ShapeError(f"response has {y.size} values but the grid has {len(self.grid)} points")
        if y.size < 1:
            raise ShapeError("a functional sample needs at least one grid point")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("functional sample contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n_points(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class RowBatch:
    """Samples flattened into (x, t) rows, with per-row targets and weights."""

    inputs: np.ndarray   # m x (d + 1)
    targets: np.ndarray  # m
    weights: np.ndarray  # m, quadrature weight of each row


@dataclass(eq=False)
class FunctionalDataset:
    samples: list[FunctionalSample]
    d: int
    names: tuple[str, ...] | None = None
    _rows: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.d < 1:
            raise ConfigurationError(f"predictor dimension must be >= 1, got {self.d}")
        if self.names is not None and len(self.names) != self.d:
            raise ShapeError(f"{len(self.names)} covariate names for {self.d} predictors")
        for i, sample in enumerate(self.samples):
            if sample.x.size != self.d:
                raise ShapeError(f"sample {i} has {sample.x.size} predictors, expected {self.d}")

    @classmethod
    def from_arrays(cls, X: np.ndarray, grid: TimeGrid, Y: np.ndarray) -> FunctionalDataset:
        """Build a dataset whose samples all share one grid (Y is n x G)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        if X.shape[0] != Y.shape[0]:
            raise ShapeError(f"{X.shape[0]} predictor rows but {Y.shape[0]} response rows")
        samples = [FunctionalSample(x, grid, y) for x, y in zip(X, Y)]
        return cls(samples, X.shape[1])

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def predictors(self) -> np.ndarray:
        if not self.samples:
            return np.zeros((0, self.d))
        return np.vstack([s.x for s in self.samples])

    def subset(self, indices: Sequence[int]) -> FunctionalDataset:
        return FunctionalDataset([self.samples[i] for i in indices], self.d, self.names)

    def with_predictors(self, X: np.ndarray) -> FunctionalDataset:
        """Same curves, replaced predictor matrix."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape != (self.n, self.d):
            raise ShapeError(f"predictor matrix must be {(self.n, self.d)}, got {X.shape}")
        samples = [FunctionalSample(x, s.grid, s.y, s.sample_id) for x, s in zip(X, self.samples)]
        return FunctionalDataset(samples, self.d, self.names)

    def shared_grid(self) -> TimeGrid | None:
        """The common grid when every sample uses the same points, else None."""
        if not self.samples:
            return None
        first = self.samples[0].grid.points
        for s in self.samples[1:]:
            if s.grid.points.size != first.size or not np.array_equal(s.grid.points, first):
                return None
        return self.samples[0].grid

    def rows(self, mode: QuadratureMode = QuadratureMode.RIGHT_ENDPOINT) -> tuple[RowBatch, np.ndarray]:
        """All samples as rows, plus the row offset of each sample (length n + 1)."""
        cached = self._rows.get(mode)
        if cached is not None:
            return cached
        counts = np.array([s.n_points for s in self.samples], dtype=np.int64)
        offsets = np.concatenate(([0], np.cumsum(counts)))
        m = int(offsets[-1])
        inputs = np.empty((m, self.d + 1))
        targets = np.empty(m)
        weights = np.empty(m)
        for i, s in enumerate(self.samples):
            lo, hi = offsets[i], offsets[i + 1]
            inputs[lo:hi, :self.d] = s.x
            inputs[lo:hi, self.d] = s.grid.points
            targets[lo:hi] = s.y
            weights[lo:hi] = riemann_weights(s.grid, mode)
        result = (RowBatch(inputs, targets, weights), offsets)
        self._rows[mode] = result
        return result


def select_rows(rows: RowBatch, offsets: np.ndarray, indices: np.ndarray, scale: float = 1.0) -> RowBatch:
    """Gather the rows of the given samples, multiplying their weights by *scale*."""
    pieces = [np.arange(offsets[i], offsets[i + 1]) for i in indices]
    take = np.concatenate(pieces) if pieces else np.zeros(0, dtype=np.int64)
    return RowBatch(rows.inputs[take], rows.targets[take], rows.weights[take] * scale)
