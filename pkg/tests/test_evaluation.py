import logging

import numpy as np
import pytest

from core import evaluation
from core.baseline import LinearConfig
from core.dataset import FunctionalDataset
from core.errors import ConfigurationError, NumericError, ShapeError
from core.evaluation import (
    ALPHA_GRID,
    CvRow,
    CvTable,
    Method,
    MispeReport,
    Tuning,
    candidate_grid,
    default_config,
    fit_rate,
    fold_partition,
    kfold_cv,
    linear_grid,
    mispe,
    mispe_quadrature,
    n_params,
    noise_floor,
    rate_probe,
    replicate_experiment,
    select_row,
    split_experiment,
)
from core.quadrature import TimeGrid
from core.rng import RngStream
from core.scenarios import Scenario, ScenarioSpec, generate_dataset
from core.training import TrainConfig


@pytest.fixture
def small_spec():
    return ScenarioSpec("s1", 2, 1, n_train=60, n_test=30)


class TestMispe:
    def test_constant_residual(self):
        grid = TimeGrid.equispaced(100)
        test = FunctionalDataset.from_arrays(np.zeros((3, 2)), grid, np.ones((3, 100)))
        assert mispe([np.zeros(100)] * 3, test) == pytest.approx(1.0)

    def test_perfect_prediction(self, smooth_dataset):
        assert mispe([s.y for s in smooth_dataset.samples], smooth_dataset) == 0.0

    def test_quadrature_version(self, irregular_dataset):
        predictions = [s.y - 1.0 for s in irregular_dataset.samples]
        expected = np.mean([s.grid.points[-1] - s.grid.points[0] for s in irregular_dataset.samples])
        assert mispe_quadrature(predictions, irregular_dataset) == pytest.approx(expected)

    @pytest.mark.parametrize("gamma", [0.5, 3.0])
    def test_scales_with_residual_squared(self, irregular_dataset, gamma):
        residuals = [np.cos(s.grid.points) for s in irregular_dataset.samples]
        base = [s.y - r for s, r in zip(irregular_dataset.samples, residuals)]
        scaled = [s.y - gamma * r for s, r in zip(irregular_dataset.samples, residuals)]
        for score in (lambda p: mispe(p, irregular_dataset), lambda p: mispe_quadrature(p, irregular_dataset)):
            assert score(scaled) == pytest.approx(gamma**2 * score(base), rel=1e-12)

    def test_shape_mismatch(self, smooth_dataset):
        with pytest.raises(ShapeError):
            mispe([np.zeros(10)] * 3, smooth_dataset)
        with pytest.raises(ShapeError):
            mispe([np.zeros(9)] * smooth_dataset.n, smooth_dataset)

    def test_non_positive_dt(self, smooth_dataset):
        with pytest.raises(ConfigurationError):
            mispe([s.y for s in smooth_dataset.samples], smooth_dataset, dt=0.0)


class TestReport:
    def test_mean_and_sample_std(self):
        report = MispeReport((1.0, 2.0, 3.0), "fosdnn", "x")
        assert report.mean == 2.0
        assert report.std == 1.0

    def test_single_replicate(self):
        assert MispeReport((0.5,), "linear", "x").std == 0.0

    def test_empty(self):
        with pytest.raises(ConfigurationError):
            MispeReport((), "linear", "x")


class TestFolds:
    def test_partition(self, rng):
        folds = fold_partition(10, 3, rng)
        assert sorted(len(f) for f in folds) == [3, 3, 4]
        assert sorted(np.concatenate(folds).tolist()) == list(range(10))

    def test_deterministic(self):
        a = fold_partition(17, 4, RngStream(2))
        b = fold_partition(17, 4, RngStream(2))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_even_split(self, rng):
        assert [len(f) for f in fold_partition(9, 3, rng)] == [3, 3, 3]

    def test_too_few_samples(self, rng):
        with pytest.raises(ConfigurationError):
            fold_partition(2, 3, rng)
        with pytest.raises(ConfigurationError):
            fold_partition(10, 1, rng)


class TestSelection:
    def test_lowest_mean_wins(self):
        rows = [CvRow(LinearConfig(lam=1.0), 0.3, 0.0, 60), CvRow(LinearConfig(lam=0.1), 0.2, 0.0, 60)]
        assert select_row(rows) == 1

    def test_ties_prefer_fewer_parameters_then_weaker_penalty(self):
        rows = [
            CvRow(TrainConfig(width=32, alpha=1e-5), 0.2, 0.0, 5000),
            CvRow(TrainConfig(width=16, alpha=1e-3), 0.2, 0.0, 1500),
            CvRow(TrainConfig(width=16, alpha=1e-7), 0.2, 0.0, 1500),
        ]
        assert select_row(rows) == 2
        assert CvTable(tuple(rows), 3).best.alpha == 1e-7


class TestGrids:
    def test_candidate_grid_sizes(self):
        s1 = candidate_grid(Scenario.S1)
        s3 = candidate_grid(Scenario.S3)
        assert len(s1) == len(s3) == 45
        assert {c.width for c in s1} == {8, 16, 32}
        assert {c.depth for c in s3} == {6, 7, 8}
        assert {c.alpha for c in s1} == set(ALPHA_GRID)

    def test_candidate_grid_keeps_base_settings(self):
        grid = candidate_grid(Scenario.S2, TrainConfig(epochs=7))
        assert all(c.epochs == 7 for c in grid)

    def test_default_configs(self):
        assert default_config(Scenario.S1) == TrainConfig(width=32, depth=6, alpha=1e-3)
        assert default_config(Scenario.S2).alpha == 1e-5

    def test_n_params(self):
        assert n_params(TrainConfig(width=32, depth=7), 10) == 4641
        assert n_params(LinearConfig(K=15), 10) == 165


class TestCrossValidation:
    def test_linear_grid(self, smooth_dataset):
        grid = linear_grid(LinearConfig(K=6))
        table = kfold_cv(smooth_dataset, grid, 3, RngStream(1))
        assert len(table.rows) == len(grid)
        assert 0 <= table.selected < len(grid)
        assert table.rows[table.selected].mean == min(r.mean for r in table.rows)

    def test_deterministic(self, smooth_dataset):
        grid = [TrainConfig(width=4, depth=3, epochs=3), TrainConfig(width=4, depth=3, epochs=3, alpha=0.1)]
        a = kfold_cv(smooth_dataset, grid, 3, RngStream(1))
        b = kfold_cv(smooth_dataset, grid, 3, RngStream(1))
        assert a.to_dict() == b.to_dict()

    def test_single_configuration(self, smooth_dataset):
        config = LinearConfig(K=6, lam=1e-4)
        table = kfold_cv(smooth_dataset, [config], 3, RngStream(1))
        assert table.selected == 0
        assert table.best == config

    def test_dominated_configuration_does_not_change_the_choice(self, smooth_dataset):
        grid = linear_grid(LinearConfig(K=6))
        before = kfold_cv(smooth_dataset, grid, 3, RngStream(1))
        # a huge ridge shrinks every curve towards zero
        after = kfold_cv(smooth_dataset, [*grid, LinearConfig(K=6, lam=1e6)], 3, RngStream(1))
        assert after.rows[-1].mean > max(r.mean for r in before.rows)
        assert after.best == before.best

    def test_empty_grid(self, smooth_dataset):
        with pytest.raises(ConfigurationError):
            kfold_cv(smooth_dataset, [], 3, RngStream(1))


class TestExperiments:
    def test_replicates(self, small_spec):
        report = replicate_experiment(small_spec, Method.LINEAR, LinearConfig(), 2, RngStream(3), tuning=Tuning.NONE)
        assert len(report.per_replicate) == 2
        assert report.label == small_spec.label
        assert report.n_params == 60
        assert report.per_replicate[0] != report.per_replicate[1]

    def test_replicates_are_reproducible(self, small_spec):
        a = replicate_experiment(small_spec, Method.LINEAR, LinearConfig(), 2, RngStream(3))
        b = replicate_experiment(small_spec, Method.LINEAR, LinearConfig(), 2, RngStream(3))
        assert a.to_dict() == b.to_dict()

    def test_parallel_matches_serial(self, small_spec):
        a = replicate_experiment(small_spec, Method.LINEAR, LinearConfig(), 3, RngStream(3))
        b = replicate_experiment(small_spec, Method.LINEAR, LinearConfig(), 3, RngStream(3), n_jobs=2)
        assert a.per_replicate == b.per_replicate

    @pytest.mark.parametrize("tuning", [Tuning.ONCE, Tuning.PER_REPLICATE])
    def test_tuning(self, small_spec, tuning):
        grid = linear_grid()
        report = replicate_experiment(small_spec, Method.LINEAR, None, 2, RngStream(3), grid, tuning)
        assert len(report.per_replicate) == 2
        if tuning == Tuning.ONCE:
            assert report.config["lam"] in [c.lam for c in grid]

    def test_method_and_config_must_agree(self, small_spec):
        with pytest.raises(ConfigurationError):
            replicate_experiment(small_spec, Method.FOSDNN, LinearConfig(), 1, RngStream(3))

    def test_split_experiment(self, small_spec):
        data, _, _ = generate_dataset(small_spec)
        report = split_experiment(data, Method.LINEAR, LinearConfig(), 3, RngStream(1), 0.8, "toy")
        assert len(report.per_replicate) == 3
        assert report.label == "toy"

    def test_split_fraction_bounds(self, smooth_dataset):
        with pytest.raises(ConfigurationError):
            split_experiment(smooth_dataset, Method.LINEAR, LinearConfig(K=6), 1, RngStream(1), 1.0)


class TestRate:
    def test_recovers_power_law(self):
        n = [100, 200, 400, 800]
        errors = [0.01 + 3.0 * m ** -0.5 for m in n]
        fitted = fit_rate(n, errors, noise_floor=0.01)
        assert fitted.slope == pytest.approx(-0.5, abs=1e-9)
        assert fitted.used == tuple(n)

    def test_drops_points_at_the_floor(self, caplog):
        with caplog.at_level(logging.WARNING):
            fitted = fit_rate([100, 200, 400], [0.5, 0.2, 0.005], noise_floor=0.01)
        assert fitted.used == (100, 200)
        assert "dropping n=400" in caplog.text

    def test_needs_two_points(self):
        with pytest.raises(NumericError):
            fit_rate([100, 200], [0.5, 0.001], noise_floor=0.01)
        with pytest.raises(ConfigurationError):
            fit_rate([200, 100], [0.5, 0.2])

    def test_noise_floor_sums_over_the_grid(self):
        assert noise_floor(ScenarioSpec("s1", 2, 1)) == pytest.approx(0.01)
        assert noise_floor(ScenarioSpec("s1", 2, 1, grid_size=50)) == pytest.approx(0.005)
        assert noise_floor(ScenarioSpec("s1", 2, 1, noise_sd=0.3)) == pytest.approx(0.09)

    @pytest.mark.parametrize("n_list", [[1000, 200], [200], [], [0, 100], [200, 200]])
    def test_sizes_checked_before_any_experiment(self, small_spec, monkeypatch, n_list):
        calls = []
        monkeypatch.setattr(evaluation, "replicate_experiment", lambda *args, **kwargs: calls.append(args))
        with pytest.raises(ConfigurationError):
            rate_probe(small_spec, n_list, Method.LINEAR, LinearConfig(K=6), 1, RngStream(0))
        assert calls == []


@pytest.mark.slow
class TestPublishedResults:
    def test_first_table_row(self):
        spec = ScenarioSpec("s1", 1, 1, n_train=200)
        report = replicate_experiment(spec, Method.FOSDNN, TrainConfig(width=32, depth=6, alpha=1e-3), 5, RngStream(7))
        assert 0.010 <= report.mean <= 0.035

    def test_linear_baseline_signature(self):
        spec = ScenarioSpec("s1", 2, 1, n_train=200)
        report = replicate_experiment(spec, Method.LINEAR, LinearConfig(), 3, RngStream(7))
        assert 0.8 <= report.mean <= 1.2

    def test_adaptivity_gap(self):
        spec = ScenarioSpec("s2", 1, 1, n_train=2000)
        network = replicate_experiment(spec, Method.FOSDNN, default_config(Scenario.S2), 3, RngStream(7))
        linear = replicate_experiment(spec, Method.LINEAR, LinearConfig(), 3, RngStream(7))
        assert network.mean < 0.2
        assert linear.mean > 0.8

    def test_more_data_helps(self):
        small = ScenarioSpec("s1", 2, 1, n_train=200)
        config = default_config(Scenario.S1)
        at_200 = replicate_experiment(small, Method.FOSDNN, config, 3, RngStream(7))
        at_1000 = replicate_experiment(small.replace(n_train=1000), Method.FOSDNN, config, 3, RngStream(7))
        assert at_1000.mean < at_200.mean


class TestReplicateErrors:
    def test_with_replicate_keeps_epoch(self):
        error = NumericError("objective is not finite", epoch=4).with_replicate(2)
        assert error.replicate == 2
        assert error.epoch == 4
        assert str(error).startswith("replicate 2:")
