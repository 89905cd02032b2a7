"""Prediction error, cross-validation and replicated experiments."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from core.baseline import LinearConfig, count_linear_params, fit_linear_fos, predict_linear_dataset
from core.dataset import FunctionalDataset
from core.errors import ConfigurationError, NumericError, ShapeError
from core.network import count_params
from core.quadrature import QuadratureMode, riemann_weights
from core.rng import STREAM_FOLDS, STREAM_INIT, STREAM_REPLICATES, STREAM_TUNING, RngStream
from core.scenarios import Scenario, ScenarioSpec, generate_dataset
from core.training import TrainConfig, predict_dataset, train

logger = logging.getLogger(__name__)

MISPE_DT = 0.01

ModelConfig = Union[TrainConfig, LinearConfig]


class Method(Enum):
    FOSDNN = "fosdnn"
    LINEAR = "linear"


class Tuning(Enum):
    NONE = "none"
    ONCE = "once"
    PER_REPLICATE = "per-replicate"


# -- error measures -------------------------------------------------------------

def _check_predictions(predictions: Sequence[np.ndarray], test: FunctionalDataset) -> None:
    if len(predictions) != test.n:
        raise ShapeError(f"{len(predictions)} predicted curves for {test.n} test samples")
    for i, (pred, sample) in enumerate(zip(predictions, test.samples)):
        if np.shape(pred) != sample.y.shape:
            raise ShapeError(f"sample {i}: prediction shape {np.shape(pred)} != response shape {sample.y.shape}")


def mispe(predictions: Sequence[np.ndarray], test: FunctionalDataset, dt: float = MISPE_DT) -> float:
    """(1/N) sum_i sum_j (Y_i(t_j) - f_i(t_j))^2 dt with a constant dt."""
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    _check_predictions(predictions, test)
    if test.n == 0:
        raise ConfigurationError("MISPE of an empty test set")
    total = sum(float(np.sum((s.y - np.asarray(p)) ** 2)) for p, s in zip(predictions, test.samples))
    return total * dt / test.n


def mispe_quadrature(
    predictions: Sequence[np.ndarray],
    test: FunctionalDataset,
    mode: QuadratureMode = QuadratureMode.TRAPEZOID,
) -> float:
    """MISPE with each curve integrated by the weights of its own grid."""
    _check_predictions(predictions, test)
    if test.n == 0:
        raise ConfigurationError("MISPE of an empty test set")
    total = sum(
        float(np.sum((s.y - np.asarray(p)) ** 2 * riemann_weights(s.grid, mode)))
        for p, s in zip(predictions, test.samples)
    )
    return total / test.n


def _score(predictions, test: FunctionalDataset, dt: float | None) -> float:
    return mispe(predictions, test, dt) if dt is not None else mispe_quadrature(predictions, test)


# -- fitting any method ----------------------------------------------------------

def n_params(config: ModelConfig, d: int) -> int:
    if isinstance(config, TrainConfig):
        return count_params(config.shape(d))
    return count_linear_params(d, config.K)


def _strength(config: ModelConfig) -> float:
    return config.alpha if isinstance(config, TrainConfig) else config.lam


def fit_and_predict(config: ModelConfig, train_data: FunctionalDataset, test_data: FunctionalDataset, seed: int):
    if isinstance(config, TrainConfig):
        model = train(train_data, config.replace(seed=seed))
        return predict_dataset(model, test_data)
    elif isinstance(config, LinearConfig):
        model = fit_linear_fos(train_data, config.K, config.lam, config.quadrature)
        return predict_linear_dataset(model, test_data)
    raise ConfigurationError(f"Unknown model configuration: {config!r}")


def _derived_seed(rng: RngStream) -> int:
    return int(rng.generator.integers(0, 2 ** 63))


# -- reports --------------------------------------------------------------------

@dataclass(frozen=True)
class MispeReport:
    per_replicate: tuple[float, ...]
    method: str
    label: str
    config: dict = field(default_factory=dict)
    n_params: int | None = None
    mean: float = field(init=False)
    std: float = field(init=False)

    def __post_init__(self):
        values = np.asarray(self.per_replicate, dtype=np.float64)
        if values.size == 0:
            raise ConfigurationError("a report needs at least one replicate")
        object.__setattr__(self, "per_replicate", tuple(float(v) for v in values))
        object.__setattr__(self, "mean", float(values.mean()))
        object.__setattr__(self, "std", float(values.std(ddof=1)) if values.size > 1 else 0.0)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "label": self.label,
            "mean": self.mean,
            "std": self.std,
            "per_replicate": list(self.per_replicate),
            "config": self.config,
            "n_params": self.n_params,
        }


@dataclass(frozen=True)
class CvRow:
    config: ModelConfig
    mean: float
    std: float
    n_params: int

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "mean": self.mean, "std": self.std, "n_params": self.n_params}


@dataclass(frozen=True)
class CvTable:
    rows: tuple[CvRow, ...]
    k: int
    selected: int = field(init=False)

    def __post_init__(self):
        if not self.rows:
            raise ConfigurationError("cross-validation table has no rows")
        object.__setattr__(self, "selected", select_row(self.rows))

    @property
    def best(self) -> ModelConfig:
        return self.rows[self.selected].config

    def to_dict(self) -> dict:
        return {"k": self.k, "selected": self.selected, "rows": [r.to_dict() for r in self.rows]}


def select_row(rows: Sequence[CvRow]) -> int:
    """Smallest mean CV loss; ties go to fewer parameters, then weaker penalty."""
    return min(range(len(rows)), key=lambda i: (rows[i].mean, rows[i].n_params, _strength(rows[i].config)))


# -- cross-validation -------------------------------------------------------------

def fold_partition(n: int, k: int, rng: RngStream) -> list[np.ndarray]:
    """Shuffled indices split into k disjoint folds whose sizes differ by at most one."""
    if k < 2:
        raise ConfigurationError(f"need k >= 2 folds, got {k}")
    if n < k:
        raise ConfigurationError(f"cannot split {n} samples into {k} folds")
    return [np.sort(fold) for fold in np.array_split(rng.permutation(n), k)]


def _cv_cell(config: ModelConfig, data: FunctionalDataset, train_idx, test_idx, seed: int, dt) -> float:
    test = data.subset(test_idx)
    predictions = fit_and_predict(config, data.subset(train_idx), test, seed)
    return _score(predictions, test, dt)


def kfold_cv(
    data: FunctionalDataset,
    grid: Sequence[ModelConfig],
    k: int,
    rng: RngStream,
    dt: float | None = MISPE_DT,
    n_jobs: int = 1,
) -> CvTable:
    """Held-out MISPE of every configuration in *grid* over k shuffled folds."""
    if not grid:
        raise ConfigurationError("cross-validation grid is empty")
    folds = fold_partition(data.n, k, rng.split(0))
    seeds = [_derived_seed(rng.split(1).split(f)) for f in range(k)]
    cells = []
    for config in grid:
        for f, test_idx in enumerate(folds):
            train_idx = np.concatenate([folds[g] for g in range(k) if g != f])
            cells.append((config, train_idx, test_idx, seeds[f]))
    logger.info("cross-validating %d configurations over %d folds", len(grid), k)
    scores = Parallel(n_jobs=n_jobs)(
        delayed(_cv_cell)(config, data, train_idx, test_idx, seed, dt)
        for config, train_idx, test_idx, seed in cells
    )
    rows = []
    for c, config in enumerate(grid):
        fold_scores = np.asarray(scores[c * k:(c + 1) * k])
        rows.append(CvRow(config, float(fold_scores.mean()), float(fold_scores.std(ddof=1)), n_params(config, data.d)))
    table = CvTable(tuple(rows), k)
    logger.info("selected configuration %d with mean CV MISPE %.4g", table.selected, table.rows[table.selected].mean)
    return table


# -- tuning grids used for each scenario ------------------------------------------

ALPHA_GRID = (1e-9, 1e-7, 1e-5, 1e-3, 1e-1)
LAMBDA_GRID = (1e-8, 1e-6, 1e-4, 1e-2, 1.0)


def candidate_grid(scenario: Scenario, base: TrainConfig | None = None) -> list[TrainConfig]:
    base = base or TrainConfig()
    if scenario == Scenario.S1:
        widths, depths = (8, 16, 32), (5, 6, 7)
    else:
        widths, depths = (16, 32, 64), (6, 7, 8)
    return [base.replace(width=w, depth=l, alpha=a) for w in widths for l in depths for a in ALPHA_GRID]


def linear_grid(base: LinearConfig | None = None) -> list[LinearConfig]:
    base = base or LinearConfig()
    return [LinearConfig(base.K, lam, base.quadrature) for lam in LAMBDA_GRID]


def default_config(scenario: Scenario) -> TrainConfig:
    if scenario == Scenario.S1:
        return TrainConfig(width=32, depth=6, alpha=1e-3)
    return TrainConfig(width=32, depth=6, alpha=1e-5)


# -- replicated experiments --------------------------------------------------------

def _replicate(spec: ScenarioSpec, config: ModelConfig, rng: RngStream, index: int, grid, k: int) -> float:
    try:
        train_data, test_data, _ = generate_dataset(spec, rng)
        if grid:
            config = kfold_cv(train_data, grid, k, rng.split(STREAM_FOLDS)).best
        predictions = fit_and_predict(config, train_data, test_data, _derived_seed(rng.split(STREAM_INIT)))
        return mispe(predictions, test_data, MISPE_DT)
    except NumericError as exc:
        raise exc.with_replicate(index) from exc


def replicate_experiment(
    spec: ScenarioSpec,
    method: Method,
    config: ModelConfig | None,
    reps: int,
    rng: RngStream,
    grid: Sequence[ModelConfig] | None = None,
    tuning: Tuning = Tuning.ONCE,
    k: int = 3,
    n_jobs: int = 1,
) -> MispeReport:
    """Fresh data, fit and test MISPE for each of *reps* replicates.

    With a *grid*, hyperparameters are chosen by k-fold CV either once on a
    dedicated tuning dataset (Tuning.ONCE) or inside every replicate.
    """
    if reps < 1:
        raise ConfigurationError(f"reps must be >= 1, got {reps}")
    config = config or (default_config(spec.scenario) if method == Method.FOSDNN else LinearConfig())
    _check_method(method, config)
    per_replicate_grid = None
    if grid and tuning == Tuning.ONCE:
        tuning_stream = rng.split(STREAM_TUNING)
        tuning_data, _, _ = generate_dataset(spec, tuning_stream)
        config = kfold_cv(tuning_data, grid, k, tuning_stream.split(STREAM_FOLDS), n_jobs=n_jobs).best
    elif grid and tuning == Tuning.PER_REPLICATE:
        per_replicate_grid = list(grid)
    streams = rng.split(STREAM_REPLICATES)
    logger.info("running %d replicates of %s with %s", reps, spec.label, method.value)
    values = Parallel(n_jobs=n_jobs)(
        delayed(_replicate)(spec, config, streams.split(r), r, per_replicate_grid, k) for r in range(reps)
    )
    return MispeReport(
        tuple(values),
        method.value,
        spec.label,
        config.to_dict() if per_replicate_grid is None else {"tuning": Tuning.PER_REPLICATE.value},
        n_params(config, spec.d) if per_replicate_grid is None else None,
    )


def _split_replicate(data: FunctionalDataset, config: ModelConfig, rng: RngStream, index: int, n_train: int) -> float:
    try:
        order = rng.split(0).permutation(data.n)
        train_data = data.subset(np.sort(order[:n_train]))
        test_data = data.subset(np.sort(order[n_train:]))
        predictions = fit_and_predict(config, train_data, test_data, _derived_seed(rng.split(STREAM_INIT)))
        return mispe_quadrature(predictions, test_data)
    except NumericError as exc:
        raise exc.with_replicate(index) from exc


def split_experiment(
    data: FunctionalDataset,
    method: Method,
    config: ModelConfig,
    reps: int,
    rng: RngStream,
    train_fraction: float = 0.8,
    label: str = "dataset",
    n_jobs: int = 1,
) -> MispeReport:
    """Repeated random train/test splits of one observed dataset."""
    if reps < 1:
        raise ConfigurationError(f"reps must be >= 1, got {reps}")
    if not 0 < train_fraction < 1:
        raise ConfigurationError(f"train fraction must be in (0, 1), got {train_fraction}")
    _check_method(method, config)
    n_train = int(round(train_fraction * data.n))
    if n_train < 1 or n_train >= data.n:
        raise ConfigurationError(f"a {train_fraction} split of {data.n} samples leaves an empty side")
    streams = rng.split(STREAM_REPLICATES)
    values = Parallel(n_jobs=n_jobs)(
        delayed(_split_replicate)(data, config, streams.split(r), r, n_train) for r in range(reps)
    )
    return MispeReport(tuple(values), method.value, label, config.to_dict(), n_params(config, data.d))


def _check_method(method: Method, config: ModelConfig) -> None:
    expected = TrainConfig if method == Method.FOSDNN else LinearConfig
    if not isinstance(config, expected):
        raise ConfigurationError(f"method {method.value} needs a {expected.__name__}, got {type(config).__name__}")


# -- convergence rate ----------------------------------------------------------------

@dataclass(frozen=True)
class RateProbe:
    slope: float
    n_values: tuple[int, ...]
    means: tuple[float, ...]
    noise_floor: float
    used: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "n_values": list(self.n_values),
            "means": list(self.means),
            "noise_floor": self.noise_floor,
            "used": list(self.used),
        }


def noise_floor(spec: ScenarioSpec, dt: float = MISPE_DT) -> float:
    """Expected MISPE of the true regression function: the noise variance summed over the grid."""
    return spec.grid_size * dt * spec.noise_sd ** 2


def _check_sizes(n_values: Sequence[int]) -> tuple[int, ...]:
    n_values = tuple(int(n) for n in n_values)
    if len(n_values) < 2 or any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ConfigurationError(f"need at least two strictly increasing sample sizes, got {list(n_values)}")
    if n_values[0] < 1:
        raise ConfigurationError(f"sample sizes must be >= 1, got {n_values[0]}")
    return n_values


def fit_rate(n_values: Sequence[int], errors: Sequence[float], noise_floor: float = 0.0) -> RateProbe:
    """Least-squares slope of log(error - noise_floor) against log(n).

    Points whose excess error is not positive are dropped with a warning.
    """
    errors = tuple(float(e) for e in errors)
    if len(n_values) != len(errors):
        raise ShapeError(f"{len(n_values)} sample sizes for {len(errors)} errors")
    n_values = _check_sizes(n_values)
    used = []
    for n, e in zip(n_values, errors):
        if e - noise_floor > 0:
            used.append(n)
        else:
            logger.warning("dropping n=%d: error %.4g is not above the noise floor %.4g", n, e, noise_floor)
    if len(used) < 2:
        raise NumericError("fewer than two points above the noise floor; cannot fit a rate")
    excess = [e - noise_floor for n, e in zip(n_values, errors) if n in used]
    slope = float(np.polyfit(np.log(used), np.log(excess), 1)[0])
    return RateProbe(slope, n_values, errors, noise_floor, tuple(used))


def rate_probe(
    spec: ScenarioSpec,
    n_list: Sequence[int],
    method: Method,
    config: ModelConfig | None,
    reps: int,
    rng: RngStream,
    n_jobs: int = 1,
) -> RateProbe:
    """Mean MISPE at each training size and the log-log slope of its excess over the noise."""
    n_list = _check_sizes(n_list)
    means = []
    for i, n in enumerate(n_list):
        report = replicate_experiment(spec.replace(n_train=int(n)), method, config, reps, rng.split(i), n_jobs=n_jobs)
        means.append(report.mean)
    return fit_rate(n_list, means, noise_floor(spec))
