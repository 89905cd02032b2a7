"""One function per subcommand. Each writes its artifacts under ``config.out``
and returns the JSON summary printed on stdout."""

from __future__ import annotations

import logging
from pathlib import Path

from core.baseline import LinearFosModel, fit_linear_fos, predict_linear_dataset
from core.dataset import FunctionalDataset
from core.errors import ConfigurationError
from core.evaluation import (
    Method,
    MispeReport,
    Tuning,
    candidate_grid,
    kfold_cv,
    linear_grid,
    mispe,
    mispe_quadrature,
    rate_probe,
    replicate_experiment,
    split_experiment,
)
from core.io import (
    CovariateScaling,
    DatasetFiles,
    fit_scaling,
    load_dataset,
    load_model,
    load_scaling,
    save_dataset,
    save_model,
    save_predictions,
    write_json,
    write_text,
)
from core.network import count_params
from core.reports import format_cv_table, format_rate, format_table
from core.rng import STREAM_FOLDS, RngStream
from core.scenarios import Scenario, ScenarioSpec, generate_dataset
from core.training import FittedModel, predict_dataset, train

from cli.config import RunConfig

logger = logging.getLogger(__name__)

DEFAULT_N_LIST = (200, 1000)


def _scenario(config: RunConfig) -> ScenarioSpec:
    if config.scenario is None:
        raise ConfigurationError(f"{config.command} needs a scenario (--scenario or 'scenario' in the config)")
    return config.scenario.replace(seed=config.seed)


def _training_data(config: RunConfig) -> tuple[FunctionalDataset, str, CovariateScaling | None]:
    """The dataset to fit on: ingested files, else the scenario's training set.

    Ingested covariates are z-scored and the statistics returned so they can
    be stored with the model.
    """
    if config.data is not None:
        raw = load_dataset(config.data, normalize=False)
        if not config.normalize:
            return raw, Path(config.data.responses).stem, None
        scaling = fit_scaling(raw)
        return scaling.apply(raw), Path(config.data.responses).stem, scaling
    spec = _scenario(config)
    train_data, _, _ = generate_dataset(spec)
    return train_data, spec.label, None


def _held_out_data(config: RunConfig) -> tuple[FunctionalDataset, str]:
    """The dataset to predict on: ingested files, else the scenario's test set.

    Ingested covariates are scaled with the statistics stored with the model.
    """
    if config.data is not None:
        scaling = load_scaling(config.model) if config.normalize else None
        if config.normalize and scaling is None:
            logger.warning(
                "%s stores no covariate scaling; normalizing with the statistics of %s",
                config.model,
                config.data.covariates,
            )
        return load_dataset(config.data, config.normalize, scaling), Path(config.data.responses).stem
    spec = _scenario(config)
    _, test_data, _ = generate_dataset(spec)
    return test_data, spec.label


def _predict(model: FittedModel | LinearFosModel, data: FunctionalDataset):
    if isinstance(model, LinearFosModel):
        return predict_linear_dataset(model, data)
    return predict_dataset(model, data)


def _model_summary(model: FittedModel | LinearFosModel) -> dict:
    if isinstance(model, LinearFosModel):
        return {"method": Method.LINEAR.value, "n_params": model.coefficients.size, "d": model.d}
    return {"method": Method.FOSDNN.value, "n_params": count_params(model.shape), "d": model.d}


def _grid(config: RunConfig):
    if config.grid:
        return list(config.grid)
    if config.method == Method.LINEAR:
        return linear_grid(config.linear)
    # ingested data get the grid of the higher-dimensional scenarios
    scenario = config.scenario.scenario if config.scenario is not None else Scenario.S3
    return candidate_grid(scenario, config.train)


def generate(config: RunConfig) -> dict:
    spec = _scenario(config)
    train_data, test_data, signal = generate_dataset(spec)
    out = Path(config.out)
    written = []
    for split, data, n in (("train", train_data, spec.n_train), ("test", test_data, spec.n_test)):
        files = DatasetFiles.in_directory(out, split)
        save_dataset(
            data,
            files,
            {"scenario": spec.to_dict(), "split": split, "c": signal.c, "integrated_variance": signal.integrated_variance},
        )
        written += [str(files.responses), str(files.covariates), str(files.metadata)]
        logger.info("wrote %d %s curves to %s", n, split, files.responses)
    return {"command": "generate", "label": spec.label, "c": signal.c, "files": written}


def train_model(config: RunConfig) -> dict:
    data, label, scaling = _training_data(config)
    path = Path(config.out) / "model.json"
    if config.method == Method.LINEAR:
        linear = config.linear
        model = fit_linear_fos(data, linear.K, linear.lam, linear.quadrature)
        save_model(path, model, scaling)
        return {"command": "train", "label": label, "model": str(path), **_model_summary(model)}
    fitted = train(data, config.training_config().replace(seed=config.seed))
    save_model(path, fitted, scaling)
    return {
        "command": "train",
        "label": label,
        "model": str(path),
        "final_objective": float(fitted.loss_trace[-1]),
        **_model_summary(fitted),
    }


def predict(config: RunConfig) -> dict:
    model = load_model(config.model)
    data, label = _held_out_data(config)
    path = Path(config.out) / "predictions.csv"
    save_predictions(path, data, _predict(model, data))
    return {"command": "predict", "label": label, "n": data.n, "predictions": str(path)}


def evaluate(config: RunConfig) -> dict:
    model = load_model(config.model)
    data, label = _held_out_data(config)
    predictions = _predict(model, data)
    dt = config.mispe_dt()
    value = mispe(predictions, data, dt) if dt is not None else mispe_quadrature(predictions, data)
    summary = _model_summary(model)
    report = MispeReport((value,), summary["method"], label, n_params=summary["n_params"])
    out = Path(config.out)
    write_json(out / "report.json", report.to_dict())
    write_text(out / "report.txt", format_table([report]))
    return {"command": "evaluate", "label": label, "mispe": value, "report": str(out / "report.json")}


def cross_validate(config: RunConfig) -> dict:
    data, label, _ = _training_data(config)
    table = kfold_cv(
        data,
        _grid(config),
        config.k,
        RngStream(config.seed).split(STREAM_FOLDS),
        config.mispe_dt(),
        config.jobs,
    )
    out = Path(config.out)
    write_json(out / "cv_table.json", {"label": label, **table.to_dict()})
    write_text(out / "cv_table.txt", format_cv_table(table))
    selected = table.rows[table.selected]
    return {
        "command": "cv",
        "label": label,
        "selected": table.selected,
        "config": selected.config.to_dict(),
        "mean": selected.mean,
        "table": str(out / "cv_table.json"),
    }


def experiment(config: RunConfig) -> dict:
    rng = RngStream(config.seed)
    if config.data is not None:
        data = load_dataset(config.data, config.normalize)
        report = split_experiment(
            data,
            config.method,
            config.model_config(),
            config.reps,
            rng,
            config.train_fraction,
            Path(config.data.responses).stem,
            config.jobs,
        )
    else:
        spec = _scenario(config)
        grid = _grid(config) if config.tuning != Tuning.NONE else None
        report = replicate_experiment(
            spec,
            config.method,
            config.model_config(),
            config.reps,
            rng,
            grid,
            config.tuning,
            config.k,
            config.jobs,
        )
    out = Path(config.out)
    write_json(out / "report.json", report.to_dict())
    write_text(out / "report.txt", format_table([report]))
    return {
        "command": "experiment",
        "label": report.label,
        "method": report.method,
        "mean": report.mean,
        "std": report.std,
        "n_params": report.n_params,
        "report": str(out / "report.json"),
    }


def rate(config: RunConfig) -> dict:
    spec = _scenario(config)
    n_list = config.n_list or DEFAULT_N_LIST
    result = rate_probe(spec, n_list, config.method, config.model_config(), config.reps, RngStream(config.seed), config.jobs)
    out = Path(config.out)
    write_json(out / "rate.json", {"label": spec.label, "method": config.method.value, **result.to_dict()})
    write_text(out / "rate.txt", format_rate(result))
    return {"command": "rate", "label": spec.label, "slope": result.slope, "rate": str(out / "rate.json")}


COMMANDS = {
    "generate": generate,
    "train": train_model,
    "predict": predict,
    "evaluate": evaluate,
    "cv": cross_validate,
    "experiment": experiment,
    "rate": rate,
}


def run(config: RunConfig) -> dict:
    config.check_paths()
    return COMMANDS[config.command](config)

