import numpy as np
import pytest

from core.dataset import FunctionalDataset, FunctionalSample
from core.errors import ConfigurationError, NumericError, ShapeError
from core.network import NetworkShape, grad_loss, init_params, zero_params
from core.optimizers import Optimizer
from core.quadrature import TimeGrid
from core.rng import RngStream
from core.training import TrainConfig, objective, predict_curve, predict_dataset, train


@pytest.fixture
def quick_config():
    return TrainConfig(width=8, depth=3, alpha=0.0, learning_rate=1e-2, batch_size=8, epochs=40, seed=3)


class TestTrainConfig:
    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ConfigurationError):
            TrainConfig.from_dict({"width": 8, "momentum": 0.9})

    def test_dict_round_trip(self):
        config = TrainConfig(width=16, optimizer=Optimizer.SGD)
        assert TrainConfig.from_dict(config.to_dict()) == config

    @pytest.mark.parametrize(
        "changes",
        [{"depth": 1}, {"alpha": -1.0}, {"learning_rate": 0.0}, {"batch_size": 0}, {"beta1": 1.0}],
    )
    def test_invalid_settings(self, changes):
        with pytest.raises(ConfigurationError):
            TrainConfig(**changes)

    def test_string_enums_are_converted(self):
        config = TrainConfig(optimizer="sgd", quadrature="trapezoid")
        assert config.optimizer == Optimizer.SGD


class TestObjective:
    def test_zero_network_by_hand(self):
        grid = TimeGrid([0.25, 0.5, 1.0])
        data = FunctionalDataset([FunctionalSample([0.0], grid, [1.0, 2.0, 3.0])], 1)
        params = zero_params(NetworkShape(1, 4, 3))
        # weights 0.25, 0.25, 0.5
        assert objective(params, data, 0.0) == pytest.approx(0.25 + 1.0 + 4.5)

    def test_empty_dataset(self):
        with pytest.raises(ConfigurationError):
            objective(zero_params(NetworkShape(1, 2, 3)), FunctionalDataset([], 1), 0.0)


class TestTrain:
    def test_objective_decreases(self, smooth_dataset, quick_config):
        model = train(smooth_dataset, quick_config)
        assert model.loss_trace.shape == (40,)
        assert model.loss_trace[-1] < model.loss_trace[0]

    def test_deterministic(self, smooth_dataset, quick_config):
        a = train(smooth_dataset, quick_config)
        b = train(smooth_dataset, quick_config)
        assert np.array_equal(a.params.flatten(), b.params.flatten())
        assert np.array_equal(a.loss_trace, b.loss_trace)

    def test_seed_changes_the_fit(self, smooth_dataset, quick_config):
        a = train(smooth_dataset, quick_config)
        b = train(smooth_dataset, quick_config.replace(seed=4))
        assert not np.array_equal(a.params.flatten(), b.params.flatten())

    def test_full_batch_ignores_sample_order(self, smooth_dataset):
        config = TrainConfig(width=6, depth=3, optimizer=Optimizer.SGD, learning_rate=0.05, batch_size=64, epochs=5)
        reversed_data = smooth_dataset.subset(list(range(smooth_dataset.n))[::-1])
        a = train(smooth_dataset, config)
        b = train(reversed_data, config)
        np.testing.assert_allclose(a.params.flatten(), b.params.flatten(), rtol=1e-9, atol=1e-12)

    def test_learns_a_simple_surface(self, smooth_dataset):
        config = TrainConfig(width=16, depth=3, alpha=0.0, learning_rate=1e-2, batch_size=8, epochs=300, seed=1)
        model = train(smooth_dataset, config)
        assert model.loss_trace[-1] < 0.2 * model.loss_trace[0]

    def test_irregular_grids(self, irregular_dataset, quick_config):
        model = train(irregular_dataset, quick_config)
        predictions = predict_dataset(model, irregular_dataset)
        assert [p.shape for p in predictions] == [s.y.shape for s in irregular_dataset.samples]

    def test_clipping_bounds_predictions(self, smooth_dataset, quick_config):
        model = train(smooth_dataset, quick_config.replace(clip=True))
        bound = 1.0 + max(np.max(np.abs(s.y)) for s in smooth_dataset.samples)
        assert model.clip_bound.F == pytest.approx(bound)
        for prediction in predict_dataset(model, smooth_dataset):
            assert np.all(np.abs(prediction) <= bound)

    def test_divergence_reports_epoch(self, quick_config):
        grid = TimeGrid([0.5, 1.0])
        data = FunctionalDataset([FunctionalSample([0.0], grid, [1e200, 1e200])], 1)
        with pytest.raises(NumericError) as info:
            train(data, quick_config)
        assert info.value.epoch == 0

    def test_empty_dataset(self, quick_config):
        with pytest.raises(ConfigurationError):
            train(FunctionalDataset([], 2), quick_config)


class TestPredict:
    def test_dataset_prediction_matches_single_curves(self, smooth_dataset, quick_config):
        model = train(smooth_dataset, quick_config)
        predictions = predict_dataset(model, smooth_dataset)
        for sample, prediction in zip(smooth_dataset.samples[:5], predictions):
            np.testing.assert_allclose(predict_curve(model, sample.x, sample.grid), prediction, rtol=1e-12, atol=1e-14)

    def test_wrong_dimension(self, smooth_dataset, quick_config):
        model = train(smooth_dataset, quick_config.replace(epochs=1))
        with pytest.raises(ShapeError):
            predict_curve(model, [0.0], smooth_dataset.samples[0].grid)


@pytest.fixture
def constant_dataset():
    """32 noise-free curves that all equal 0.7 on a 20-point grid."""
    X = RngStream(21).uniform(-1.0, 1.0, (32, 2))
    grid = TimeGrid.equispaced(20)
    return FunctionalDataset.from_arrays(X, grid, np.full((32, 20), 0.7))


class TestObjectiveProperties:
    def test_penalty_separates(self, smooth_dataset):
        params = init_params(NetworkShape(2, 8, 4), RngStream(5))
        unpenalized = objective(params, smooth_dataset, 0.0)
        for alpha in (1e-3, 0.5, 2.0):
            expected = unpenalized + alpha * params.squared_norm()
            assert objective(params, smooth_dataset, alpha) == pytest.approx(expected, rel=1e-12)

    def test_penalty_alone_on_zero_responses(self):
        grid = TimeGrid([0.5, 1.0])
        data = FunctionalDataset([FunctionalSample([0.3], grid, [0.0, 0.0])], 1)
        params = zero_params(NetworkShape(1, 4, 3))
        assert objective(params, data, 1.0) == 0.0

    def test_hand_value_on_two_points(self):
        grid = TimeGrid([0.5, 1.0])
        data = FunctionalDataset([FunctionalSample([0.0], grid, [1.0, 1.0])], 1)
        assert objective(zero_params(NetworkShape(1, 4, 3)), data, 0.0) == pytest.approx(1.0)

    def test_sample_order_does_not_matter(self, irregular_dataset):
        params = init_params(NetworkShape(2, 6, 3), RngStream(8))
        shuffled = irregular_dataset.subset([3, 0, 4, 1, 2])
        assert objective(params, shuffled, 0.1) == pytest.approx(objective(params, irregular_dataset, 0.1), rel=1e-12)

    def test_gradient_vanishes_at_a_perfect_fit(self):
        grid = TimeGrid.equispaced(5)
        data = FunctionalDataset.from_arrays(np.ones((3, 2)), grid, np.zeros((3, 5)))
        rows, _ = data.rows()
        gradient = grad_loss(zero_params(NetworkShape(2, 4, 3)), rows, 0.0)
        assert np.all(gradient.flatten() == 0.0)


class TestConstantTarget:
    def test_fits_a_constant(self, constant_dataset):
        # lr 1e-2 with 8-curve batches gives 800 Adam steps; the default lr 1e-3 needs far more epochs
        config = TrainConfig(width=8, depth=3, alpha=0.0, learning_rate=1e-2, batch_size=8, epochs=200, seed=2)
        model = train(constant_dataset, config)
        assert model.loss_trace[-1] < 1e-3

    def test_full_batch_descent_is_monotone(self, constant_dataset):
        config = TrainConfig(
            width=8, depth=3, alpha=0.0, optimizer=Optimizer.SGD, learning_rate=1e-2,
            batch_size=constant_dataset.n, epochs=60, seed=2,
        )
        trace = train(constant_dataset, config).loss_trace
        assert np.all(np.diff(trace[10:]) <= 1e-6)
