"""Dense ReLU network over (x_1, ..., x_d, t) with hand-written backpropagation.

A network of depth L has the width vector (d + 1, W, ..., W, 1) of length L
and L - 1 affine maps between consecutive entries. Every affine map except
the last is followed by an elementwise ReLU.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from core.dataset import RowBatch
from core.errors import ConfigurationError, NumericError, ShapeError
from core.rng import RngStream


@dataclass(frozen=True)
class NetworkShape:
    d: int
    width: int
    depth: int

    def __post_init__(self):
        if self.d < 1:
            raise ConfigurationError(f"predictor dimension must be >= 1, got {self.d}")
        if self.width < 1:
            raise ConfigurationError(f"width must be >= 1, got {self.width}")
        if self.depth < 2:
            raise ConfigurationError(f"depth must be >= 2, got {self.depth}")

    @property
    def input_dim(self) -> int:
        return self.d + 1

    @property
    def width_vector(self) -> tuple[int, ...]:
        return (self.input_dim,) + (self.width,) * (self.depth - 2) + (1,)

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        """(fan_out, fan_in) of each of the depth - 1 affine maps."""
        c = self.width_vector
        return [(c[l + 1], c[l]) for l in range(self.depth - 1)]


@dataclass(frozen=True, eq=False)
class NetworkParams:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        weights = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        biases = tuple(np.asarray(b, dtype=np.float64).reshape(-1) for b in self.biases)
        if len(weights) != len(biases) or not weights:
            raise ShapeError(f"{len(weights)} weight matrices for {len(biases)} bias vectors")
        for l, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or w.shape[0] != b.size:
                raise ShapeError(f"layer {l}: weight {w.shape} does not match bias of length {b.size}")
            if l > 0 and w.shape[1] != weights[l - 1].shape[0]:
                raise ShapeError(f"layer {l}: fan-in {w.shape[1]} != previous fan-out {weights[l - 1].shape[0]}")
        if weights[-1].shape[0] != 1:
            raise ShapeError(f"the last layer must have one output, got {weights[-1].shape[0]}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def arrays(self) -> Iterator[np.ndarray]:
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def shape(self) -> NetworkShape:
        return NetworkShape(self.input_dim - 1, self.weights[0].shape[0] if self.n_layers > 1 else 1, self.n_layers + 1)

    def squared_norm(self) -> float:
        return float(sum(np.sum(a * a) for a in self.arrays()))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflatten(self, theta: np.ndarray) -> NetworkParams:
        """Parameters with this layout and the entries of *theta*."""
        theta = np.asarray(theta, dtype=np.float64)
        arrays = []
        offset = 0
        for a in self.arrays():
            arrays.append(theta[offset:offset + a.size].reshape(a.shape))
            offset += a.size
        if offset != theta.size:
            raise ShapeError(f"expected {offset} parameters, got {theta.size}")
        return NetworkParams(tuple(arrays[0::2]), tuple(arrays[1::2]))

    def copy(self) -> NetworkParams:
        return NetworkParams(tuple(w.copy() for w in self.weights), tuple(b.copy() for b in self.biases))

    def to_dict(self) -> dict:
        shape = self.shape()
        return {
            "shape": {"d": shape.d, "W": shape.width, "L": shape.depth},
            "layers": [
                {"weights": w.tolist(), "bias": b.tolist()}
                for w, b in zip(self.weights, self.biases)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> NetworkParams:
        try:
            layers = data["layers"]
            params = cls(
                tuple(np.array(layer["weights"], dtype=np.float64) for layer in layers),
                tuple(np.array(layer["bias"], dtype=np.float64) for layer in layers),
            )
            shape = NetworkShape(int(data["shape"]["d"]), int(data["shape"]["W"]), int(data["shape"]["L"]))
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed network document: {exc}") from exc
        if [w.shape for w in params.weights] != shape.layer_shapes:
            raise ShapeError(f"layer shapes do not match the declared shape {shape}")
        return params


@dataclass(frozen=True)
class ClipBound:
    F: float

    def __post_init__(self):
        if not self.F >= 1.0:
            raise ConfigurationError(f"clip bound must be >= 1, got {self.F}")


def count_params(shape: NetworkShape) -> int:
    return sum(fan_out * fan_in + fan_out for fan_out, fan_in in shape.layer_shapes)


def init_params(shape: NetworkShape, rng: RngStream) -> NetworkParams:
    """He initialization: weights N(0, 2 / fan_in), biases zero."""
    weights = []
    biases = []
    for fan_out, fan_in in shape.layer_shapes:
        weights.append(rng.normal((fan_out, fan_in), scale=np.sqrt(2.0 / fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(tuple(weights), tuple(biases))


def zero_params(shape: NetworkShape) -> NetworkParams:
    return NetworkParams(
        tuple(np.zeros(s) for s in shape.layer_shapes),
        tuple(np.zeros(s[0]) for s in shape.layer_shapes),
    )


def clip(value, bound: ClipBound):
    """Truncate to [-F, F]; works on scalars and arrays."""
    clipped = np.clip(value, -bound.F, bound.F)
    return float(clipped) if np.ndim(clipped) == 0 else clipped


def forward_batch(params: NetworkParams, Z: np.ndarray, bound: ClipBound | None = None) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != params.input_dim:
        raise ShapeError(f"inputs must be m x {params.input_dim}, got {Z.shape}")
    h = Z
    last = params.n_layers - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if l < last:
            h = np.maximum(h, 0.0)
    out = h[:, 0]
    return out if bound is None else clip(out, bound)


def forward(params: NetworkParams, z, bound: ClipBound | None = None) -> float:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size != params.input_dim:
        raise ShapeError(f"input must have length {params.input_dim}, got shape {z.shape}")
    return float(forward_batch(params, z[None, :], bound)[0])


def batch_loss(params: NetworkParams, batch: RowBatch, alpha: float, bound: ClipBound | None = None) -> float:
    """sum_r w_r (y_r - f(z_r))^2 + alpha * ||theta||^2."""
    _check_batch(params, batch, alpha)
    residual = batch.targets - forward_batch(params, batch.inputs, bound)
    loss = float(np.sum(batch.weights * residual * residual)) + alpha * params.squared_norm()
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss}")
    return loss


def loss_and_grad(
    params: NetworkParams,
    batch: RowBatch,
    alpha: float,
    bound: ClipBound | None = None,
) -> tuple[float, NetworkParams]:
    """Loss of *batch* and its exact gradient, by reverse-mode differentiation."""
    _check_batch(params, batch, alpha)
    last = params.n_layers - 1
    activations = [batch.inputs]
    pre_activations = []
    h = batch.inputs
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = h @ w.T + b
        pre_activations.append(a)
        h = np.maximum(a, 0.0) if l < last else a
        if l < last:
            activations.append(h)
    out = h[:, 0]
    if bound is not None:
        clipped = clip(out, bound)
        passthrough = np.abs(out) < bound.F
        out = clipped
    residual = batch.targets - out
    loss = float(np.sum(batch.weights * residual * residual)) + alpha * params.squared_norm()
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss}")

    delta = (-2.0 * batch.weights * residual)[:, None]
    if bound is not None:
        delta = delta * passthrough[:, None]
    grad_w = [None] * params.n_layers
    grad_b = [None] * params.n_layers
    for l in range(last, -1, -1):
        grad_w[l] = delta.T @ activations[l] + 2.0 * alpha * params.weights[l]
        grad_b[l] = delta.sum(axis=0) + 2.0 * alpha * params.biases[l]
        if l > 0:
            # ReLU derivative taken as 0 at 0
            delta = (delta @ params.weights[l]) * (pre_activations[l - 1] > 0.0)
    gradient = NetworkParams(tuple(grad_w), tuple(grad_b))
    if not gradient.is_finite():
        raise NumericError("non-finite gradient")
    return loss, gradient


def grad_loss(params: NetworkParams, batch: RowBatch, alpha: float, bound: ClipBound | None = None) -> NetworkParams:
    return loss_and_grad(params, batch, alpha, bound)[1]


def _check_batch(params: NetworkParams, batch: RowBatch, alpha: float) -> None:
    if alpha < 0:
        raise ConfigurationError(f"L2 strength must be >= 0, got {alpha}")
    m = batch.targets.shape[0]
    if batch.inputs.ndim != 2 or batch.inputs.shape != (m, params.input_dim) or batch.weights.shape != (m,):
        raise ShapeError(
            f"batch shapes inputs={batch.inputs.shape}, targets={batch.targets.shape}, "
            f"weights={batch.weights.shape} do not fit a network with input dimension {params.input_dim}"
        )
