"""First-order update rules operating on lists of parameter arrays in place."""

from __future__ import annotations

from enum import Enum

import numpy as np

from core.errors import ConfigurationError


class Optimizer(Enum):
    ADAM = "adam"
    SGD = "sgd"


class Sgd:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.learning_rate * g


class Adam:
    """Adam with bias-corrected first and second moment estimates."""

    def __init__(self, shapes, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        bias_correction_1 = 1 - self.beta1 ** self.t
        bias_correction_2 = 1 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            m_hat = m / bias_correction_1
            v_hat = v / bias_correction_2
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def make_optimizer(kind: Optimizer, shapes, learning_rate: float, betas=(0.9, 0.999), epsilon: float = 1e-8):
    if kind == Optimizer.ADAM:
        return Adam(shapes, learning_rate, betas[0], betas[1], epsilon)
    elif kind == Optimizer.SGD:
        return Sgd(learning_rate)
    raise ConfigurationError(f"Unknown optimizer: {kind}")
