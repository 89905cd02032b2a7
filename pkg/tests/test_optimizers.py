import numpy as np
import pytest

from core.errors import ConfigurationError
from core.optimizers import Adam, Optimizer, Sgd, make_optimizer


class TestSgd:
    def test_step(self):
        p = [np.array([1.0, 2.0])]
        Sgd(0.1).step(p, [np.array([1.0, -1.0])])
        np.testing.assert_allclose(p[0], [0.9, 2.1])


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        """With bias correction the first update is lr * g / (|g| + eps)."""
        p = [np.array([0.0, 0.0, 0.0])]
        g = np.array([3.0, -0.5, 0.0])
        Adam([(3,)], 0.01).step(p, [g])
        np.testing.assert_allclose(p[0], [-0.01, 0.01, 0.0], rtol=1e-6)

    def test_updates_in_place(self):
        p = np.ones((2, 2))
        params = [p]
        Adam([(2, 2)], 0.1).step(params, [np.ones((2, 2))])
        assert params[0] is p
        assert np.all(p < 1.0)

    def test_minimizes_quadratic(self):
        p = [np.array([5.0, -3.0])]
        adam = Adam([(2,)], 0.1)
        for _ in range(2000):
            adam.step(p, [2 * p[0]])
        assert np.all(np.abs(p[0]) < 1e-2)


def test_make_optimizer_dispatch():
    assert isinstance(make_optimizer(Optimizer.ADAM, [(1,)], 0.1), Adam)
    assert isinstance(make_optimizer(Optimizer.SGD, [(1,)], 0.1), Sgd)
    with pytest.raises(ConfigurationError):
        make_optimizer("rmsprop", [(1,)], 0.1)
