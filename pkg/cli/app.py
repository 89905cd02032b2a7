"""Command-line entry point: argument parsing, logging setup and exit codes."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from core.errors import ConfigurationError, FosError, NumericError
from core.evaluation import Method, Tuning
from core.io import DatasetFiles, dumps_json
from core.optimizers import Optimizer
from core.quadrature import MODE_ALIASES, QuadratureMode
from core.scenarios import Scenario, ScenarioSpec

from cli.commands import run
from cli.config import COMMANDS, RunConfig, load_run_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

_HELP = {
    "generate": "write the train and test datasets of a scenario",
    "train": "fit a model and save it as JSON",
    "predict": "write predicted curves of a saved model",
    "evaluate": "MISPE of a saved model on held-out curves",
    "cv": "k-fold cross-validation over a candidate grid",
    "experiment": "replicated fit-and-test runs with a MISPE report",
    "rate": "MISPE against training size and its log-log slope",
}

# flag destination -> field name
_SCENARIO_FLAGS = {
    "scenario": "scenario",
    "scenario_model": "model",
    "xtype": "xtype",
    "n_train": "n_train",
    "n_test": "n_test",
    "grid_size": "grid_size",
    "noise_sd": "noise_sd",
}
_TRAIN_FLAGS = {
    "width": "width",
    "depth": "depth",
    "alpha": "alpha",
    "learning_rate": "learning_rate",
    "batch_size": "batch_size",
    "epochs": "epochs",
    "optimizer": "optimizer",
    "quadrature": "quadrature",
    "clip": "clip",
}
_LINEAR_FLAGS = {"basis_size": "K", "lam": "lam", "quadrature": "quadrature"}
_RUN_FLAGS = ("seed", "out", "reps", "k", "dt", "train_fraction", "jobs")


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors surface as ConfigurationError so they share exit status 1."""

    def error(self, message):
        raise ConfigurationError(message)


def _common_options() -> argparse.ArgumentParser:
    parser = ArgumentParser(add_help=False)
    parser.add_argument("--config", type=Path, help="run configuration JSON; flags override its values")
    parser.add_argument("--seed", type=int, help="master seed (default 0)")
    parser.add_argument("--out", type=Path, help="output directory (default ./out)")
    parser.add_argument("--jobs", type=int, help="parallel workers; 1 is deterministic, -1 uses every core")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    return parser


def _scenario_options() -> argparse.ArgumentParser:
    parser = ArgumentParser(add_help=False)
    group = parser.add_argument_group("scenario")
    group.add_argument("--scenario", choices=[s.value for s in Scenario])
    group.add_argument("--model", dest="scenario_model", type=int, choices=(1, 2, 3), help="true function of the scenario")
    group.add_argument("--xtype", type=int, choices=(1, 2, 3), help="predictor distribution")
    group.add_argument("--n-train", type=int)
    group.add_argument("--n-test", type=int)
    group.add_argument("--grid-size", type=int)
    group.add_argument("--noise-sd", type=float)
    return parser


def _data_options() -> argparse.ArgumentParser:
    parser = ArgumentParser(add_help=False)
    group = parser.add_argument_group("ingested data")
    group.add_argument("--responses", type=Path, help="long CSV with columns sample_id,t,y")
    group.add_argument("--covariates", type=Path, help="wide CSV with columns sample_id,<covariates>")
    group.add_argument("--no-normalize", action="store_true", help="keep covariates unscaled")
    return parser


def _method_options() -> argparse.ArgumentParser:
    parser = ArgumentParser(add_help=False)
    parser.add_argument("--method", choices=[m.value for m in Method])
    group = parser.add_argument_group("network")
    group.add_argument("--width", type=int)
    group.add_argument("--depth", type=int)
    group.add_argument("--alpha", type=float, help="L2 penalty strength")
    group.add_argument("--lr", dest="learning_rate", type=float)
    group.add_argument("--batch-size", type=int, help="curves per minibatch")
    group.add_argument("--epochs", type=int)
    group.add_argument("--optimizer", choices=[o.value for o in Optimizer])
    group.add_argument("--quadrature", choices=[q.value for q in QuadratureMode] + list(MODE_ALIASES))
    group.add_argument("--clip", action="store_true", default=None, help="clip outputs to 1 + max|Y|")
    group = parser.add_argument_group("linear baseline")
    group.add_argument("--basis-size", type=int, help="number of cubic B-spline functions")
    group.add_argument("--lam", type=float, help="ridge strength")
    return parser


def build_parser() -> argparse.ArgumentParser:
    common, scenario, data, method = _common_options(), _scenario_options(), _data_options(), _method_options()
    parents = {
        "generate": [common, scenario],
        "train": [common, scenario, data, method],
        "predict": [common, scenario, data],
        "evaluate": [common, scenario, data],
        "cv": [common, scenario, data, method],
        "experiment": [common, scenario, data, method],
        "rate": [common, scenario, method],
    }
    parser = ArgumentParser(prog="fosdnn", description="Function-on-scalar regression with deep ReLU networks.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    commands = {}
    for name in COMMANDS:
        commands[name] = sub.add_parser(name, parents=parents[name], help=_HELP[name], description=_HELP[name])
    for name in ("predict", "evaluate"):
        commands[name].add_argument("--model-file", type=Path, help="model JSON written by train")
    commands["evaluate"].add_argument("--dt", type=float, help="constant MISPE step (default 0.01 for scenarios)")
    commands["cv"].add_argument("--k", type=int, help="number of folds (default 3)")
    commands["cv"].add_argument("--dt", type=float)
    experiment = commands["experiment"]
    experiment.add_argument("--reps", type=int)
    experiment.add_argument("--k", type=int)
    experiment.add_argument("--train-fraction", type=float, help="share of curves used for training on ingested data")
    experiment.add_argument(
        "--tune",
        nargs="?",
        const=Tuning.ONCE.value,
        choices=[t.value for t in Tuning],
        help="choose hyperparameters by cross-validation (default once per scenario)",
    )
    commands["rate"].add_argument("--reps", type=int)
    commands["rate"].add_argument("--n-list", type=lambda s: tuple(int(n) for n in s.split(",")), help="e.g. 200,1000")
    return parser


def _given(args, names) -> dict:
    return {field: getattr(args, flag) for flag, field in names.items() if getattr(args, flag, None) is not None}


def config_from_args(args) -> RunConfig:
    config = load_run_config(args.config, args.command) if args.config else RunConfig(args.command)
    changes = {name: getattr(args, name) for name in _RUN_FLAGS if getattr(args, name, None) is not None}

    scenario = _given(args, _SCENARIO_FLAGS)
    if scenario:
        if config.scenario is None and "scenario" not in scenario:
            raise ConfigurationError("scenario settings need --scenario")
        changes["scenario"] = (
            config.scenario.replace(**scenario) if config.scenario is not None else ScenarioSpec(**scenario)
        )
        if config.scenario is not None and "scenario" in scenario and "n_train" not in scenario:
            # a new scenario brings its own default training size
            changes["scenario"] = changes["scenario"].replace(n_train=None)

    if getattr(args, "responses", None) is not None or getattr(args, "covariates", None) is not None:
        if args.responses is None or args.covariates is None:
            raise ConfigurationError("--responses and --covariates go together")
        changes["data"] = DatasetFiles(args.responses, args.covariates)
    if getattr(args, "no_normalize", False):
        changes["normalize"] = False

    if getattr(args, "method", None) is not None:
        changes["method"] = Method(args.method)
    training = _given(args, _TRAIN_FLAGS)
    if training:
        base = config.train if config.train is not None else dataclasses.replace(config, **changes).training_config()
        changes["train"] = base.replace(**training)
    linear = _given(args, _LINEAR_FLAGS)
    if linear:
        changes["linear"] = dataclasses.replace(config.linear, **linear)
    if getattr(args, "model_file", None) is not None:
        changes["model"] = args.model_file
    if getattr(args, "tune", None) is not None:
        changes["tuning"] = Tuning(args.tune)
    if getattr(args, "n_list", None) is not None:
        changes["n_list"] = args.n_list
    return dataclasses.replace(config, **changes) if changes else config


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.verbose, args.quiet)
        config = config_from_args(args)
        summary = run(config)
    except NumericError as exc:
        logger.debug("numeric failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FosError, OSError) as exc:
        logger.debug("run failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(dumps_json(summary))
    return EXIT_OK
