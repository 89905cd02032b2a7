"""Time grids and quadrature weights for integrating response curves."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from core.errors import ConfigurationError, DomainError, ShapeError


class QuadratureMode(Enum):
    RIGHT_ENDPOINT = "right-endpoint"
    TRAPEZOID = "trapezoid"

    @classmethod
    def _missing_(cls, value):
        alias = MODE_ALIASES.get(value)
        return cls(alias) if alias is not None else None


# alternative spellings accepted on input; output always uses the member value
MODE_ALIASES = {"paper-literal": "right-endpoint"}


@dataclass(frozen=True, eq=False)
class TimeGrid:
    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1)
        if points.size and not np.all(np.isfinite(points)):
            raise DomainError("time grid contains non-finite points")
        if points.size and (points[0] < 0.0 or points[-1] > 1.0):
            raise DomainError(f"time grid must lie in [0, 1], got [{points[0]}, {points[-1]}]")
        if np.any(np.diff(points) <= 0.0):
            raise DomainError("time grid must be strictly increasing")
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.points.size

    @classmethod
    def equispaced(cls, size: int) -> TimeGrid:
        """*size* points from 0 to 1 inclusive (spacing 1/(size-1))."""
        if size < 1:
            raise ConfigurationError(f"grid size must be >= 1, got {size}")
        if size == 1:
            return cls(np.array([0.0]))
        return cls(np.linspace(0.0, 1.0, size))


def riemann_weights(grid: TimeGrid, mode: QuadratureMode = QuadratureMode.RIGHT_ENDPOINT) -> np.ndarray:
    """Per-point weights w such that sum(w * f(t)) approximates the integral of f.

    RIGHT_ENDPOINT is the right-endpoint sum with t_0 = 0, so the weights add up
    to the last grid point and a grid starting at 0 gets a zero first weight.
    """
    points = grid.points
    if points.size == 0:
        raise ConfigurationError("cannot build quadrature weights on an empty grid")
    if mode == QuadratureMode.RIGHT_ENDPOINT:
        return np.diff(points, prepend=0.0)
    elif mode == QuadratureMode.TRAPEZOID:
        return _trapezoid(points)
    raise ConfigurationError(f"Unknown quadrature mode: {mode}")


def _trapezoid(points: np.ndarray) -> np.ndarray:
    weights = np.zeros_like(points)
    if points.size == 1:
        return weights
    gaps = np.diff(points)
    weights[:-1] += gaps / 2
    weights[1:] += gaps / 2
    return weights


def quad_integrate(values, weights) -> float:
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if values.shape != weights.shape:
        raise ShapeError(f"values {values.shape} and weights {weights.shape} differ in shape")
    if values.size == 0:
        raise ShapeError("cannot integrate an empty vector")
    return float(values @ weights)
