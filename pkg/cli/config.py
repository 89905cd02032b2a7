"""Run configuration: a JSON document, optionally overridden by command-line flags."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from core.baseline import LinearConfig
from core.errors import ConfigurationError
from core.evaluation import MISPE_DT, Method, Tuning, default_config
from core.io import DatasetFiles, read_json
from core.scenarios import ScenarioSpec
from core.training import TrainConfig

COMMANDS = ("generate", "train", "predict", "evaluate", "cv", "experiment", "rate")

_SCENARIO_KEYS = {f.name for f in dataclasses.fields(ScenarioSpec)}
_DATA_KEYS = {"responses", "covariates", "metadata", "normalize"}


@dataclass(frozen=True)
class RunConfig:
    command: str
    seed: int = 0
    out: Path = Path("out")
    scenario: ScenarioSpec | None = None
    data: DatasetFiles | None = None
    normalize: bool = True
    method: Method = Method.FOSDNN
    train: TrainConfig | None = None
    linear: LinearConfig = field(default_factory=LinearConfig)
    grid: list | None = None
    tuning: Tuning = Tuning.NONE
    reps: int = 1
    k: int = 3
    n_list: tuple[int, ...] = ()
    model: Path | None = None
    dt: float | None = None
    train_fraction: float = 0.8
    jobs: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        if self.reps < 1:
            raise ConfigurationError(f"reps must be >= 1, got {self.reps}")
        if self.k < 2:
            raise ConfigurationError(f"k must be >= 2, got {self.k}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.jobs == 0:
            raise ConfigurationError("jobs must be non-zero (-1 uses every core)")

    @classmethod
    def from_json(cls, path, command: str | None = None) -> RunConfig:
        return load_run_config(path, command)

    def mispe_dt(self) -> float | None:
        """Constant dt for MISPE; None integrates each curve on its own grid.

        Scenario data default to dt = 0.01, ingested data to per-grid weights.
        """
        if self.dt is not None:
            return self.dt
        return MISPE_DT if self.data is None else None

    def training_config(self) -> TrainConfig:
        """Explicit network settings, else the published defaults of the scenario."""
        if self.train is not None:
            return self.train
        if self.scenario is not None:
            return default_config(self.scenario.scenario)
        return TrainConfig()

    def model_config(self):
        """The configuration of the chosen method."""
        if self.method == Method.LINEAR:
            return self.linear
        return self.training_config()

    def check_paths(self) -> None:
        """Every referenced input must exist before any work starts."""
        if self.data is not None:
            for path in (self.data.responses, self.data.covariates):
                if not Path(path).is_file():
                    raise ConfigurationError(f"input file not found: {path}")
        if self.command in ("predict", "evaluate"):
            if self.model is None:
                raise ConfigurationError(f"{self.command} needs a model path")
            if not Path(self.model).is_file():
                raise ConfigurationError(f"model file not found: {self.model}")


def _reject_unknown(section: str, document: dict, allowed) -> None:
    unknown = set(document) - set(allowed)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {section}: {sorted(unknown)}")


def _grid_entry(method: Method, entry: dict):
    if method == Method.LINEAR:
        return LinearConfig.from_dict(entry)
    return TrainConfig.from_dict(entry)


def run_config_from_dict(document: dict, base_dir: Path = Path(".")) -> RunConfig:
    allowed = {f.name for f in dataclasses.fields(RunConfig)}
    _reject_unknown("run configuration", document, allowed)
    values = dict(document)
    try:
        if "method" in values:
            values["method"] = Method(values["method"])
        if "tuning" in values:
            values["tuning"] = Tuning(values["tuning"])
        method = values.get("method", Method.FOSDNN)
        if "scenario" in values:
            _reject_unknown("scenario", values["scenario"], _SCENARIO_KEYS)
            values["scenario"] = ScenarioSpec(**values["scenario"])
        if "data" in values:
            data = values["data"]
            _reject_unknown("data", data, _DATA_KEYS)
            if "responses" not in data or "covariates" not in data:
                raise ConfigurationError("data needs both 'responses' and 'covariates'")
            values["data"] = DatasetFiles(
                base_dir / data["responses"],
                base_dir / data["covariates"],
                base_dir / data["metadata"] if data.get("metadata") else None,
            )
            if "normalize" in data:
                values["normalize"] = bool(data["normalize"])
        if "train" in values:
            values["train"] = TrainConfig.from_dict(values["train"])
        if "linear" in values:
            values["linear"] = LinearConfig.from_dict(values["linear"])
        if "grid" in values:
            values["grid"] = [_grid_entry(method, entry) for entry in values["grid"]]
        if "n_list" in values:
            values["n_list"] = tuple(int(n) for n in values["n_list"])
        for key in ("out", "model"):
            if values.get(key) is not None:
                values[key] = base_dir / values[key]
        return RunConfig(**values)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"invalid run configuration: {exc}") from exc


def load_run_config(path, command: str | None = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    document = read_json(path)
    if not isinstance(document, dict):
        raise ConfigurationError(f"{path}: the run configuration must be a JSON object")
    if command is not None:
        if document.get("command", command) != command:
            raise ConfigurationError(f"{path} is a {document['command']!r} configuration, not {command!r}")
        document = {**document, "command": command}
    return run_config_from_dict(document, path.parent)
