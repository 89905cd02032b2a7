"""Synthetic benchmark scenarios: true functions, predictor laws and noisy curves.

Each scenario draws predictors X from one of three laws (Xtype 1: Unif[-1, 1]^d,
Xtype 2: N(0, Sigma_0.1), Xtype 3: N(0, Sigma_0.5)) and observes

    Y_i(t_j) = c * f(X_i, t_j) + eps_ij,   eps_ij ~ N(0, noise_sd^2),

on an equispaced grid of ``grid_size`` points from 0 to 1, where c scales the
signal to unit integrated variance.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import expit

from core.dataset import FunctionalDataset
from core.errors import ConfigurationError, NumericError, ShapeError
from core.quadrature import QuadratureMode, TimeGrid, quad_integrate, riemann_weights
from core.rng import STREAM_DATA, STREAM_SCALE, RngStream
from core.samplers import sample_equicorr_normal, sample_uniform_cube

logger = logging.getLogger(__name__)

SCALE_SEED = 20250101
SCALE_MC_SAMPLES = 100_000
_MC_CHUNK = 10_000


class Scenario(Enum):
    S1 = "s1"
    S1A = "s1a"
    S2 = "s2"
    S3 = "s3"

    @property
    def dimension(self) -> int:
        return {"s1": 3, "s1a": 5, "s2": 5, "s3": 10}[self.value]

    @property
    def default_n_train(self) -> int:
        return {"s1": 200, "s1a": 200, "s2": 5000, "s3": 10000}[self.value]


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: Scenario = Scenario.S1
    model: int = 1
    xtype: int = 1
    n_train: int | None = None
    n_test: int = 1000
    grid_size: int = 100
    noise_sd: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.scenario, str):
            try:
                object.__setattr__(self, "scenario", Scenario(self.scenario.lower()))
            except ValueError as exc:
                raise ConfigurationError(f"unknown scenario {self.scenario!r}") from exc
        if self.model not in (1, 2, 3):
            raise ConfigurationError(f"model must be 1, 2 or 3, got {self.model}")
        if self.xtype not in (1, 2, 3):
            raise ConfigurationError(f"xtype must be 1, 2 or 3, got {self.xtype}")
        if self.n_train is None:
            object.__setattr__(self, "n_train", self.scenario.default_n_train)
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigurationError(f"sample sizes must be >= 1, got {self.n_train}, {self.n_test}")
        if self.grid_size < 2:
            raise ConfigurationError(f"grid size must be >= 2, got {self.grid_size}")
        if self.noise_sd < 0:
            raise ConfigurationError(f"noise_sd must be >= 0, got {self.noise_sd}")

    @property
    def d(self) -> int:
        return self.scenario.dimension

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.equispaced(self.grid_size)

    @property
    def label(self) -> str:
        return f"{self.scenario.value}/model{self.model}/xtype{self.xtype}/n{self.n_train}"

    def replace(self, **changes) -> ScenarioSpec:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["scenario"] = self.scenario.value
        return data


@dataclass(frozen=True)
class ScaledSignal:
    c: float
    mc_samples: int
    integrated_variance: float

    def __post_init__(self):
        if not self.c > 0:
            raise NumericError(f"scaling constant must be positive, got {self.c}")


# -- scalar helpers -----------------------------------------------------------

def tanh(x):
    return np.tanh(x)


def gaussian(x):
    return np.exp(-np.square(x))


def relu(x):
    return np.maximum(x, 0.0)


def logistic(x):
    return expit(x)


# -- Scenario 1 ---------------------------------------------------------------

def _s1_model1(X, t):
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    return x1 * np.sin(4 * t) / (x1 ** 2 + 1) + np.exp(-((x2 - 2) ** 2) / 2) + (1 + t * np.cos(x3))


def _s1_model2(X, t):
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    # The printed log term reads "X^2"; taken as X_2^2.
    inner = x1 * x2 * np.cos(2 * np.pi * t) + np.log(1 + x2 ** 2 + x3 ** 2 + t ** 2)
    return inner * np.exp(-(x1 ** 2 + x2 ** 2 + x3 ** 2) / 10)


def _s1_model3(X, t):
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    numerator = (x1 * t ** 2 + x2 * t - x3) ** 2
    return numerator / (1 + x1 ** 2 * t + x2 ** 2 * np.sin(t) ** 2 + x3 ** 2)


# -- Scenario 1-A -------------------------------------------------------------

def _s1a_model1(X, t):
    x1, x2, x3, x4, x5 = X.T
    return (
        np.sin(x1 + t)
        + (x2 + t) ** 2 / (x2 ** 2 + 1)
        + np.exp(x3 * t) / (1 + np.exp(x3))
        + np.log(1 + x4 ** 2 + t ** 2)
        + x5 * (1 - t) * np.cos(2 * np.pi * t)
    )


def _s1a_model2(X, t):
    x1, x2, x3, x4, x5 = X.T
    return np.cos(x1 - 2 * x2 + x3) * t ** 2 + np.sin(x4 + x5) * np.exp(t)


def _s1a_model3(X, t):
    x1, x2, x3, x4, x5 = X.T
    return (x1 - x2 * t + 2 * x3 * t ** 2) / (1 + 2 * x4 ** 2 + 4 * x5 ** 2 * np.cos(2 * np.pi * t) ** 2)


# -- spatially inhomogeneous components ----------------------------------------

def _spike(x, t, rate=15.0):
    return np.exp(-rate * tanh(np.abs(x) - 0.5) ** 2 * (t + 1)) * np.sin(50 * (gaussian(tanh(np.abs(x))) - 0.5) ** 2)


def _spike_shifted(x, t, rate=15.0):
    # variant printed with the 1/2 shift inside the gaussian
    return np.exp(-rate * tanh(np.abs(x) - 0.5) ** 2 * (t + 1)) * np.sin(50 * gaussian(tanh(np.abs(x)) - 0.5) ** 2)


def _ripple(x, t):
    return gaussian(-50 * tanh(np.abs(x) - 0.5) ** 2 * (t + 1)) * np.cos((np.exp(gaussian(x)) - 0.5) ** 2)


def _step_tanh(x, t):
    return -tanh(-80 * tanh(np.abs(x) - 0.5) ** 2 * (t + 1)) * np.sin((relu(np.exp(np.abs(x))) - 0.5) ** 2)


def _step_logistic(x, t):
    return logistic(-80 * tanh(np.abs(x) - 0.5) ** 2 * (t + 1)) * np.sin(5 * (relu(np.exp(np.abs(x))) - 0.5) ** 2)


# -- Scenario 2 ---------------------------------------------------------------

def _s2_model1(X, t):
    a = np.abs(X)
    low = np.log(1 + (relu(a[:, 0]) + tanh(a[:, 1] + a[:, 2]) + gaussian(a[:, 3] + a[:, 4])) ** 2 * (t + 1))
    return _spike(X[:, 0], t) + low


def _s2_model2(X, t):
    a = np.abs(X)
    low = (a[:, 0] + a[:, 1] * (t + 1)) / (1 + np.abs(X[:, 2] + X[:, 3] + X[:, 4]) * (t + 1) ** 2)
    return _spike(X[:, 0], t) + _ripple(X[:, 1], t) + low


def _s2_model3(X, t):
    a2 = np.square(X)
    low = np.exp(-(a2[:, 0] + a2[:, 1] + a2[:, 2]) / 10) * (1 + (a2[:, 3] + a2[:, 4]) * (t + 1))
    return _spike(X[:, 0], t) + _ripple(X[:, 1], t) + _step_tanh(X[:, 2], t) + low


# -- Scenario 3 ---------------------------------------------------------------

def _s3_model1(X, t):
    a = np.abs(X)
    inner = relu(a[:, 0:4].sum(axis=1)) + tanh(a[:, 4:7].sum(axis=1)) + gaussian(a[:, 7:10].sum(axis=1))
    return _spike(X[:, 0], t) + np.log(1 + inner ** 2) * (t + 1)


def _s3_model2(X, t):
    a = np.abs(X)
    low = (a[:, 0:3].sum(axis=1) + a[:, 3:5].sum(axis=1) * (t + 1)) / (
        1 + np.abs(X[:, 5:10].sum(axis=1)) * (t + 1) ** 2
    )
    return _spike(X[:, 0], t) + _ripple(X[:, 1], t) + _step_logistic(X[:, 2], t) + low


def _s3_model3(X, t):
    a2 = np.square(X)
    low = np.exp(-a2[:, 0:5].sum(axis=1) / 10) * (1 + a2[:, 5:10].sum(axis=1) * (t + 1))
    return (
        _spike_shifted(X[:, 0], t)
        + _ripple(X[:, 1], t)
        + _step_logistic(X[:, 2], t)
        - _ripple(X[:, 3], t)
        - _spike_shifted(X[:, 4], t, rate=30.0)
        + low
    )


_TRUE_FUNCTIONS: dict[tuple[Scenario, int], Callable] = {
    (Scenario.S1, 1): _s1_model1,
    (Scenario.S1, 2): _s1_model2,
    (Scenario.S1, 3): _s1_model3,
    (Scenario.S1A, 1): _s1a_model1,
    (Scenario.S1A, 2): _s1a_model2,
    (Scenario.S1A, 3): _s1a_model3,
    (Scenario.S2, 1): _s2_model1,
    (Scenario.S2, 2): _s2_model2,
    (Scenario.S2, 3): _s2_model3,
    (Scenario.S3, 1): _s3_model1,
    (Scenario.S3, 2): _s3_model2,
    (Scenario.S3, 3): _s3_model3,
}


def evaluate(spec: ScenarioSpec, X: np.ndarray, t) -> np.ndarray:
    """Unscaled true function at rows of X (m x d) and times t (scalar or length m)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != spec.d:
        raise ShapeError(f"{spec.scenario.value} expects {spec.d} predictors, got {X.shape[1]}")
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (X.shape[0],))
    return _TRUE_FUNCTIONS[(spec.scenario, spec.model)](X, t)


def true_function(spec: ScenarioSpec, x, t: float) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != spec.d:
        raise ShapeError(f"{spec.scenario.value} expects {spec.d} predictors, got {x.size}")
    return float(evaluate(spec, x[None, :], t)[0])


def sample_predictors(spec: ScenarioSpec, rng: RngStream, n: int) -> np.ndarray:
    if spec.xtype == 1:
        return sample_uniform_cube(rng, n, spec.d, -1.0, 1.0)
    elif spec.xtype == 2:
        return sample_equicorr_normal(rng, n, spec.d, 0.1)
    elif spec.xtype == 3:
        return sample_equicorr_normal(rng, n, spec.d, 0.5)
    raise ConfigurationError(f"Unknown xtype: {spec.xtype}")


def signal_matrix(spec: ScenarioSpec, X: np.ndarray, func: Callable | None = None) -> np.ndarray:
    """f(X_i, t_j) for every predictor row and grid point (n x grid_size)."""
    func = func or (lambda rows, t: evaluate(spec, rows, t))
    points = spec.grid.points
    n = X.shape[0]
    rows = np.repeat(X, points.size, axis=0)
    times = np.tile(points, n)
    return np.asarray(func(rows, times), dtype=np.float64).reshape(n, points.size)


def estimate_scale(
    spec: ScenarioSpec,
    n_mc: int,
    rng: RngStream,
    func: Callable | None = None,
) -> ScaledSignal:
    """c = 1 / sqrt(integrated variance over X of f(X, t)), by Monte Carlo.

    *func* overrides the scenario's true function; it takes an m x d matrix
    and a length-m time vector.
    """
    if n_mc < 1000:
        raise ConfigurationError(f"n_mc must be >= 1000, got {n_mc}")
    weights = riemann_weights(spec.grid, QuadratureMode.TRAPEZOID)
    total = np.zeros(spec.grid_size)
    total_sq = np.zeros(spec.grid_size)
    for i, start in enumerate(range(0, n_mc, _MC_CHUNK)):
        size = min(_MC_CHUNK, n_mc - start)
        X = sample_predictors(spec, rng.split(i), size)
        F = signal_matrix(spec, X, func)
        total += F.sum(axis=0)
        total_sq += np.square(F).sum(axis=0)
    mean = total / n_mc
    variance = (total_sq - n_mc * mean * mean) / (n_mc - 1)
    integrated = quad_integrate(variance, weights)
    if not np.isfinite(integrated) or integrated <= 1e-12:
        raise NumericError(f"integrated variance of the signal is {integrated}; cannot scale a degenerate signal")
    return ScaledSignal(1.0 / np.sqrt(integrated), n_mc, integrated)


@lru_cache(maxsize=None)
def _cached_scale(scenario: Scenario, model: int, xtype: int, grid_size: int) -> ScaledSignal:
    spec = ScenarioSpec(scenario, model, xtype, grid_size=grid_size)
    signal = estimate_scale(spec, SCALE_MC_SAMPLES, RngStream(SCALE_SEED).split(STREAM_SCALE))
    logger.debug("scale for %s/model%d/xtype%d: c=%.6g", scenario.value, model, xtype, signal.c)
    return signal


def scale_for(spec: ScenarioSpec) -> ScaledSignal:
    """The cached scaling constant of a (scenario, model, xtype, grid) setting."""
    return _cached_scale(spec.scenario, spec.model, spec.xtype, spec.grid_size)


def _noisy_curves(spec: ScenarioSpec, signal: ScaledSignal, rng: RngStream, n: int) -> FunctionalDataset:
    X = sample_predictors(spec, rng.split(0), n)
    Y = signal.c * signal_matrix(spec, X)
    if spec.noise_sd > 0:
        Y = Y + rng.split(1).normal(Y.shape, scale=spec.noise_sd)
    return FunctionalDataset.from_arrays(X, spec.grid, Y)


def generate_dataset(
    spec: ScenarioSpec,
    rng: RngStream | None = None,
) -> tuple[FunctionalDataset, FunctionalDataset, ScaledSignal]:
    """Train and test sets for *spec*; both carry observation noise."""
    rng = rng or RngStream(spec.seed)
    signal = scale_for(spec)
    stream = rng.split(STREAM_DATA)
    train = _noisy_curves(spec, signal, stream.split(0), spec.n_train)
    test = _noisy_curves(spec, signal, stream.split(1), spec.n_test)
    return train, test, signal
