"""Linear function-on-scalar regression on a cubic B-spline basis.

    Y(t) ~ beta_0(t) + sum_j X_j beta_j(t),   beta_j(t) = sum_k C[j, k] B_k(t)

The coefficient matrix C is the ridge-penalized minimizer of the
quadrature-weighted squared residual, found from the normal equations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from core.dataset import FunctionalDataset
from core.errors import ConfigurationError, DomainError, NumericError, ShapeError
from core.quadrature import QuadratureMode, TimeGrid, riemann_weights

logger = logging.getLogger(__name__)

_JITTER = 1e-10


@dataclass(frozen=True, eq=False)
class SplineBasis:
    K: int = 15
    degree: int = 3
    knots: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.degree < 0:
            raise ConfigurationError(f"degree must be >= 0, got {self.degree}")
        if self.K < self.degree + 1:
            raise ConfigurationError(f"need K >= {self.degree + 1} basis functions, got {self.K}")
        if self.knots is None:
            object.__setattr__(self, "knots", clamped_knots(self.K, self.degree))
        else:
            knots = np.asarray(self.knots, dtype=np.float64)
            if knots.size != self.K + self.degree + 1 or np.any(np.diff(knots) < 0):
                raise ConfigurationError("knot vector must be non-decreasing with K + degree + 1 entries")
            object.__setattr__(self, "knots", knots)

    def matrix(self, points) -> np.ndarray:
        """Basis values at each point, one row per point (len(points) x K)."""
        return _cox_de_boor(self.knots, self.degree, self.K, np.asarray(points, dtype=np.float64).reshape(-1))


def clamped_knots(K: int, degree: int = 3) -> np.ndarray:
    """Equispaced interior knots on [0, 1] with degree + 1 copies of each end."""
    interior = np.linspace(0.0, 1.0, K - degree + 1)[1:-1]
    return np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])


def _cox_de_boor(knots: np.ndarray, degree: int, K: int, t: np.ndarray) -> np.ndarray:
    if np.any((t < 0.0) | (t > 1.0)) or not np.all(np.isfinite(t)):
        raise DomainError("B-spline evaluation points must lie in [0, 1]")
    n_intervals = knots.size - 1
    B = np.zeros((t.size, n_intervals))
    for i in range(n_intervals):
        if knots[i] < knots[i + 1]:
            B[:, i] = (knots[i] <= t) & (t < knots[i + 1])
    # t = 1 belongs to the last non-empty interval
    last = np.flatnonzero(knots[:-1] < knots[1:])[-1]
    B[t == knots[-1], last] = 1.0
    for p in range(1, degree + 1):
        nxt = np.zeros((t.size, n_intervals - p))
        for i in range(n_intervals - p):
            left_span = knots[i + p] - knots[i]
            right_span = knots[i + p + 1] - knots[i + 1]
            if left_span > 0:
                nxt[:, i] += (t - knots[i]) / left_span * B[:, i]
            if right_span > 0:
                nxt[:, i] += (knots[i + p + 1] - t) / right_span * B[:, i + 1]
        B = nxt
    return B[:, :K]


def bspline_eval(basis: SplineBasis, t: float) -> np.ndarray:
    return basis.matrix([t])[0]


@dataclass(frozen=True, eq=False)
class LinearFosModel:
    basis: SplineBasis
    coefficients: np.ndarray  # (d + 1) x K; row 0 is the intercept curve
    lam: float = 0.0

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if coefficients.ndim != 2 or coefficients.shape[1] != self.basis.K or coefficients.shape[0] < 1:
            raise ShapeError(f"coefficients must be (d + 1) x {self.basis.K}, got {coefficients.shape}")
        if not np.all(np.isfinite(coefficients)):
            raise NumericError("non-finite spline coefficients")
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def K(self) -> int:
        return self.basis.K

    @property
    def d(self) -> int:
        return self.coefficients.shape[0] - 1

    def coefficient_curve(self, j: int, grid: TimeGrid) -> np.ndarray:
        """beta_j on the grid; j = 0 is the intercept."""
        return self.basis.matrix(grid.points) @ self.coefficients[j]

    def to_dict(self) -> dict:
        return {
            "K": self.basis.K,
            "degree": self.basis.degree,
            "knots": self.basis.knots.tolist(),
            "lambda": self.lam,
            "coefficients": self.coefficients.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> LinearFosModel:
        try:
            basis = SplineBasis(int(data["K"]), int(data["degree"]), np.array(data["knots"], dtype=np.float64))
            return cls(basis, np.array(data["coefficients"], dtype=np.float64), float(data["lambda"]))
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed linear model document: {exc}") from exc


def count_linear_params(d: int, K: int) -> int:
    return (d + 1) * K


def _design(x: np.ndarray) -> np.ndarray:
    return np.concatenate(([1.0], x))


def fit_linear_fos(
    data: FunctionalDataset,
    K: int = 15,
    lam: float = 1e-6,
    mode: QuadratureMode = QuadratureMode.RIGHT_ENDPOINT,
) -> LinearFosModel:
    if data.n < 1:
        raise ConfigurationError("cannot fit the linear baseline on an empty dataset")
    if K < 4:
        raise ConfigurationError(f"need K >= 4 cubic basis functions, got {K}")
    if lam < 0:
        raise ConfigurationError(f"ridge strength must be >= 0, got {lam}")
    basis = SplineBasis(K)
    p = data.d + 1
    shared = data.shared_grid()
    if shared is not None:
        # (Z'Z) kron (B'WB) and vec(Z'YWB), without forming the row design
        B = basis.matrix(shared.points)
        w = riemann_weights(shared, mode)
        Z = np.column_stack([np.ones(data.n), data.predictors])
        Y = np.vstack([s.y for s in data.samples])
        gram = np.kron(Z.T @ Z, B.T @ (w[:, None] * B))
        rhs = (Z.T @ (Y * w) @ B).reshape(-1)
    else:
        gram = np.zeros((p * K, p * K))
        rhs = np.zeros(p * K)
        for s in data.samples:
            B = basis.matrix(s.grid.points)
            w = riemann_weights(s.grid, mode)
            z = _design(s.x)
            gram += np.kron(np.outer(z, z), B.T @ (w[:, None] * B))
            rhs += np.kron(z, B.T @ (w * s.y))
    theta = _solve_ridge(gram, rhs, lam)
    logger.debug("fitted linear baseline: d=%d K=%d lambda=%g", data.d, K, lam)
    return LinearFosModel(basis, theta.reshape(p, K), lam)


def _solve_ridge(gram: np.ndarray, rhs: np.ndarray, lam: float) -> np.ndarray:
    system = gram + lam * np.eye(gram.shape[0])
    try:
        factor = cho_factor(system, lower=True)
    except LinAlgError:
        if lam == 0:
            raise NumericError("normal equations are singular at lambda = 0; use a ridge strength lambda > 0")
        jitter = max(_JITTER, _JITTER * float(np.trace(gram)) / gram.shape[0])
        logger.warning("normal equations not positive definite at lambda=%g; adding jitter %g", lam, jitter)
        try:
            factor = cho_factor(system + jitter * np.eye(gram.shape[0]), lower=True)
        except LinAlgError as exc:
            raise NumericError(f"normal equations could not be factorized: {exc}") from exc
    return cho_solve(factor, rhs)


def predict_linear(model: LinearFosModel, x, grid: TimeGrid) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != model.d:
        raise ShapeError(f"model expects {model.d} predictors, got {x.size}")
    return model.basis.matrix(grid.points) @ (_design(x) @ model.coefficients)


def predict_linear_dataset(model: LinearFosModel, data: FunctionalDataset) -> list[np.ndarray]:
    shared = data.shared_grid()
    if shared is not None:
        if data.d != model.d:
            raise ShapeError(f"model expects {model.d} predictors, data has {data.d}")
        Z = np.column_stack([np.ones(data.n), data.predictors])
        curves = Z @ model.coefficients @ model.basis.matrix(shared.points).T
        return list(curves)
    return [predict_linear(model, s.x, s.grid) for s in data.samples]


@dataclass(frozen=True)
class LinearConfig:
    """Settings of the linear baseline, tunable by the same CV harness as the network."""

    K: int = 15
    lam: float = 1e-6
    quadrature: QuadratureMode = QuadratureMode.RIGHT_ENDPOINT

    def __post_init__(self):
        if isinstance(self.quadrature, str):
            object.__setattr__(self, "quadrature", QuadratureMode(self.quadrature))
        if self.K < 4:
            raise ConfigurationError(f"need K >= 4 cubic basis functions, got {self.K}")
        if self.lam < 0:
            raise ConfigurationError(f"ridge strength must be >= 0, got {self.lam}")

    def to_dict(self) -> dict:
        return {"K": self.K, "lam": self.lam, "quadrature": self.quadrature.value}

    @classmethod
    def from_dict(cls, data: dict) -> LinearConfig:
        unknown = set(data) - {"K", "lam", "quadrature"}
        if unknown:
            raise ConfigurationError(f"unknown linear baseline settings: {sorted(unknown)}")
        return cls(**data)
