"""Fitting the network to functional data by minibatch gradient methods.

The objective is the quadrature-weighted squared error averaged over curves,

    (1/n) sum_i sum_j (Y_i(t_ij) - f(X_i, t_ij))^2 w_ij + alpha * ||theta||^2,

with w_ij from ``riemann_weights``. Minibatches are sets of whole curves.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from core.dataset import FunctionalDataset, select_rows
from core.errors import ConfigurationError, NumericError, ShapeError
from core.network import (
    ClipBound,
    NetworkParams,
    NetworkShape,
    batch_loss,
    forward_batch,
    init_params,
    loss_and_grad,
)
from core.optimizers import Optimizer, make_optimizer
from core.quadrature import QuadratureMode, TimeGrid
from core.rng import STREAM_INIT, STREAM_SHUFFLE, RngStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    width: int = 32
    depth: int = 6
    alpha: float = 1e-3
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 500
    optimizer: Optimizer = Optimizer.ADAM
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    quadrature: QuadratureMode = QuadratureMode.RIGHT_ENDPOINT
    clip: bool = False
    log_every: int = 50

    def __post_init__(self):
        if isinstance(self.optimizer, str):
            object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        if isinstance(self.quadrature, str):
            object.__setattr__(self, "quadrature", QuadratureMode(self.quadrature))
        if self.width < 1 or self.depth < 2:
            raise ConfigurationError(f"need width >= 1 and depth >= 2, got W={self.width}, L={self.depth}")
        if self.alpha < 0:
            raise ConfigurationError(f"alpha must be >= 0, got {self.alpha}")
        if not self.learning_rate > 0:
            raise ConfigurationError(f"learning rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigurationError(f"need batch_size >= 1 and epochs >= 1, got {self.batch_size}, {self.epochs}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.epsilon > 0):
            raise ConfigurationError("Adam needs 0 <= beta1, beta2 < 1 and epsilon > 0")

    def shape(self, d: int) -> NetworkShape:
        return NetworkShape(d, self.width, self.depth)

    def replace(self, **changes) -> TrainConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["optimizer"] = self.optimizer.value
        data["quadrature"] = self.quadrature.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> TrainConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown training settings: {sorted(unknown)}")
        try:
            return cls(**data)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc


@dataclass(frozen=True, eq=False)
class FittedModel:
    shape: NetworkShape
    params: NetworkParams
    config: TrainConfig
    loss_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    clip_bound: ClipBound | None = None

    @property
    def d(self) -> int:
        return self.shape.d


def objective(
    params: NetworkParams,
    data: FunctionalDataset,
    alpha: float,
    mode: QuadratureMode = QuadratureMode.RIGHT_ENDPOINT,
    bound: ClipBound | None = None,
) -> float:
    if data.n == 0:
        raise ConfigurationError("objective of an empty dataset")
    if params.input_dim != data.d + 1:
        raise ShapeError(f"network expects {params.input_dim - 1} predictors, data has {data.d}")
    rows, offsets = data.rows(mode)
    batch = select_rows(rows, offsets, np.arange(data.n), scale=1.0 / data.n)
    return batch_loss(params, batch, alpha, bound)


def train(data: FunctionalDataset, config: TrainConfig) -> FittedModel:
    if data.n == 0:
        raise ConfigurationError("cannot train on an empty dataset")
    shape = config.shape(data.d)
    rng = RngStream(config.seed)
    params = init_params(shape, rng.split(STREAM_INIT))
    shuffler = rng.split(STREAM_SHUFFLE)
    bound = _clip_bound(data) if config.clip else None

    arrays = list(params.arrays())
    optimizer = make_optimizer(
        config.optimizer,
        [a.shape for a in arrays],
        config.learning_rate,
        (config.beta1, config.beta2),
        config.epsilon,
    )
    rows, offsets = data.rows(config.quadrature)
    batch_size = min(config.batch_size, data.n)
    trace = np.empty(config.epochs)
    logger.info(
        "training W=%d L=%d alpha=%g on n=%d curves for %d epochs (%s, batch %d)",
        config.width, config.depth, config.alpha, data.n, config.epochs, config.optimizer.value, batch_size,
    )
    for epoch in range(config.epochs):
        order = shuffler.permutation(data.n)
        try:
            for start in range(0, data.n, batch_size):
                idx = order[start:start + batch_size]
                batch = select_rows(rows, offsets, idx, scale=1.0 / idx.size)
                _, grad = loss_and_grad(params, batch, config.alpha, bound)
                optimizer.step(arrays, list(grad.arrays()))
            trace[epoch] = objective(params, data, config.alpha, config.quadrature, bound)
        except NumericError as exc:
            raise NumericError(f"training diverged at epoch {epoch}: {exc}", epoch=epoch) from exc
        if config.log_every and (epoch + 1) % config.log_every == 0:
            logger.debug("epoch %d objective %.6g", epoch + 1, trace[epoch])
    logger.info("final objective %.6g", trace[-1])
    return FittedModel(shape, params.copy(), config, trace, bound)


def _clip_bound(data: FunctionalDataset) -> ClipBound:
    largest = max(float(np.max(np.abs(s.y))) for s in data.samples)
    return ClipBound(1.0 + largest)


def predict_curve(model: FittedModel, x, grid: TimeGrid) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != model.d:
        raise ShapeError(f"model expects {model.d} predictors, got {x.size}")
    points = grid.points
    Z = np.empty((points.size, model.d + 1))
    Z[:, :model.d] = x
    Z[:, model.d] = points
    return forward_batch(model.params, Z, model.clip_bound)


def predict_dataset(model: FittedModel, data: FunctionalDataset) -> list[np.ndarray]:
    """Predicted curve of every sample on that sample's own grid."""
    if data.d != model.d:
        raise ShapeError(f"model expects {model.d} predictors, data has {data.d}")
    if data.n == 0:
        return []
    rows, offsets = data.rows()
    values = forward_batch(model.params, rows.inputs, model.clip_bound)
    return [values[offsets[i]:offsets[i + 1]] for i in range(data.n)]
