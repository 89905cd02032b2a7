import numpy as np
import pytest

from core.dataset import FunctionalDataset, FunctionalSample
from core.quadrature import TimeGrid
from core.rng import RngStream


@pytest.fixture
def rng():
    return RngStream(12345)


@pytest.fixture
def smooth_dataset():
    """32 curves y = x1 * t + 0.5 * x2 on a shared 10-point grid, no noise."""
    X = RngStream(7).uniform(-1.0, 1.0, (32, 2))
    grid = TimeGrid.equispaced(10)
    Y = X[:, :1] * grid.points[None, :] + 0.5 * X[:, 1:]
    return FunctionalDataset.from_arrays(X, grid, Y)


@pytest.fixture
def irregular_dataset():
    """Five curves, each on its own grid."""
    stream = RngStream(11)
    samples = []
    for i in range(5):
        points = np.sort(stream.split(i).uniform(0.0, 1.0, 6 + i))
        x = stream.split(100 + i).uniform(-1.0, 1.0, 2)
        samples.append(FunctionalSample(x, TimeGrid(points), np.sin(3 * points) * x[0] + x[1], f"s{i}"))
    return FunctionalDataset(samples, 2)
