"""Reading and writing datasets, models and reports.

Datasets are two CSV files: a long-format response table ``sample_id,t,y``
and a wide covariate table ``sample_id,<covariate columns>``. Floats are
written with 17 significant digits and read back with the round-trip
parser, so save followed by load reproduces every value exactly.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from core.baseline import LinearFosModel
from core.dataset import FunctionalDataset, FunctionalSample
from core.errors import ConfigurationError, FosError, IngestionError, ShapeError
from core.network import ClipBound, NetworkParams
from core.quadrature import TimeGrid
from core.training import FittedModel, TrainConfig

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
RESPONSE_COLUMNS = ["sample_id", "t", "y"]


@dataclass(frozen=True)
class DatasetFiles:
    responses: Path
    covariates: Path
    metadata: Path | None = None

    @classmethod
    def in_directory(cls, directory, prefix: str) -> DatasetFiles:
        directory = Path(directory)
        return cls(
            directory / f"{prefix}_responses.csv",
            directory / f"{prefix}_covariates.csv",
            directory / f"{prefix}_metadata.json",
        )


# -- atomic writes -------------------------------------------------------------

def atomic_write(path, write: Callable[[Path], None]) -> None:
    """Call *write* on a temporary sibling of *path*, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    os.close(fd)
    tmp = Path(tmp_name)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def write_text(path, text: str) -> None:
    atomic_write(path, lambda tmp: tmp.write_text(text, encoding="utf-8"))


def dumps_json(document) -> str:
    return json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, document) -> None:
    write_text(path, dumps_json(document))


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from exc


def _write_csv(path, frame: pd.DataFrame) -> None:
    atomic_write(path, lambda tmp: frame.to_csv(tmp, index=False, float_format=FLOAT_FORMAT))


# -- datasets ------------------------------------------------------------------

def _line_numbers(path: Path, rows: int) -> np.ndarray:
    """File line number of each data row; the parser skips blank lines."""
    with open(path, encoding="utf-8") as f:
        lines = [number for number, line in enumerate(f, start=1) if line.strip()]
    if len(lines) - 1 != rows:
        # quoted newlines inside a field; count from the header instead
        return np.arange(rows) + 2
    return np.asarray(lines[1:], dtype=np.int64)


def _read_csv(path: Path, required: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype={"sample_id": str}, float_precision="round_trip", skipinitialspace=True)
        frame.attrs["lines"] = _line_numbers(path, len(frame))
    except FileNotFoundError:
        raise
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise IngestionError(f"{path}: cannot parse CSV: {exc}") from exc
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise IngestionError(f"{path}: missing column(s) {missing}; found {list(frame.columns)}")
    if frame["sample_id"].isna().any():
        row = int(frame.attrs["lines"][np.flatnonzero(frame["sample_id"].isna().to_numpy())[0]])
        raise IngestionError(f"{path}: empty sample_id on line {row}", row=row)
    return frame


def _numeric(frame: pd.DataFrame, column: str, path: Path) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        index = int(np.flatnonzero(bad)[0])
        row = int(frame.attrs["lines"][index])
        raise IngestionError(
            f"{path}: line {row}: column {column!r} value {frame[column].iloc[index]!r} is not a finite number",
            row=row,
        )
    return values


def load_dataset(
    files: DatasetFiles, normalize: bool = True, scaling: CovariateScaling | None = None
) -> FunctionalDataset:
    """Read and validate a dataset.

    With *normalize* the covariates are z-scored using *scaling* when given,
    typically the statistics stored with a fitted model, and the file's own
    column statistics otherwise.
    """
    responses = _read_csv(files.responses, RESPONSE_COLUMNS)
    covariates = _read_csv(files.covariates, ["sample_id"])
    names = tuple(c for c in covariates.columns if c != "sample_id")
    if not names:
        raise IngestionError(f"{files.covariates}: no covariate columns")
    duplicated = covariates["sample_id"][covariates["sample_id"].duplicated()]
    if len(duplicated):
        sample_id = str(duplicated.iloc[0])
        raise IngestionError(f"{files.covariates}: sample_id {sample_id!r} appears more than once", sample_id=sample_id)

    X = np.column_stack([_numeric(covariates, name, files.covariates) for name in names])
    t = _numeric(responses, "t", files.responses)
    y = _numeric(responses, "y", files.responses)

    covariate_ids = list(covariates["sample_id"])
    response_ids = set(responses["sample_id"])
    for sample_id in covariate_ids:
        if sample_id not in response_ids:
            raise IngestionError(f"sample_id {sample_id!r} has covariates but no responses", sample_id=sample_id)
    known = set(covariate_ids)
    for sample_id in responses["sample_id"]:
        if sample_id not in known:
            raise IngestionError(f"sample_id {sample_id!r} has responses but no covariates", sample_id=sample_id)

    positions = responses.groupby("sample_id", sort=False).indices
    samples = []
    for x, sample_id in zip(X, covariate_ids):
        idx = positions[sample_id]
        times = t[idx]
        if np.any(np.diff(times) <= 0):
            raise IngestionError(f"sample_id {sample_id!r}: t values are not strictly increasing", sample_id=sample_id)
        try:
            samples.append(FunctionalSample(x, TimeGrid(times), y[idx], sample_id))
        except FosError as exc:
            raise IngestionError(f"sample_id {sample_id!r}: {exc}", sample_id=sample_id) from exc
    data = FunctionalDataset(samples, len(names), names)
    logger.info("loaded %d curves with %d covariates from %s", data.n, data.d, files.responses)
    if not normalize:
        return data
    if scaling is None:
        scaling = fit_scaling(data)
    return scaling.apply(data)


@dataclass(frozen=True, eq=False)
class CovariateScaling:
    """Per-column mean and standard deviation; a zero std leaves that column unscaled."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        std = np.asarray(self.std, dtype=np.float64).reshape(-1)
        if mean.shape != std.shape:
            raise ShapeError(f"{mean.size} means for {std.size} standard deviations")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std)) and np.all(std >= 0)):
            raise ConfigurationError("covariate scaling needs finite means and non-negative deviations")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def d(self) -> int:
        return self.mean.size

    def apply(self, data: FunctionalDataset) -> FunctionalDataset:
        if data.d != self.d:
            raise ShapeError(f"scaling covers {self.d} covariates, data has {data.d}")
        if data.n == 0:
            return data
        X = data.predictors.copy()
        scaled = self.std > 0
        X[:, scaled] = (X[:, scaled] - self.mean[scaled]) / self.std[scaled]
        return data.with_predictors(X)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> CovariateScaling:
        try:
            return cls(data["mean"], data["std"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"invalid covariate scaling: {exc}") from exc


def fit_scaling(data: FunctionalDataset) -> CovariateScaling:
    """Column means and population standard deviations of the predictors."""
    if data.n == 0:
        return CovariateScaling(np.zeros(data.d), np.zeros(data.d))
    X = data.predictors
    std = X.std(axis=0)
    for j in np.flatnonzero(std == 0):
        name = data.names[j] if data.names else f"x{j + 1}"
        logger.warning("covariate %s has zero variance; left unnormalized", name)
    return CovariateScaling(X.mean(axis=0), std)


def normalize_covariates(data: FunctionalDataset) -> FunctionalDataset:
    """z-score every covariate column with its own statistics."""
    return fit_scaling(data).apply(data)


def _sample_ids(data: FunctionalDataset) -> list[str]:
    return [s.sample_id if s.sample_id is not None else str(i) for i, s in enumerate(data.samples)]


def save_dataset(data: FunctionalDataset, files: DatasetFiles, description: dict | None = None) -> None:
    ids = _sample_ids(data)
    names = list(data.names) if data.names else [f"x{j + 1}" for j in range(data.d)]
    covariates = pd.DataFrame(data.predictors, columns=names)
    covariates.insert(0, "sample_id", ids)
    responses = pd.DataFrame(
        {
            "sample_id": [sample_id for sample_id, s in zip(ids, data.samples) for _ in range(s.n_points)],
            "t": np.concatenate([s.grid.points for s in data.samples]) if data.n else np.zeros(0),
            "y": np.concatenate([s.y for s in data.samples]) if data.n else np.zeros(0),
        },
        columns=RESPONSE_COLUMNS,
    )
    _write_csv(files.covariates, covariates)
    _write_csv(files.responses, responses)
    if files.metadata is not None:
        grid = data.shared_grid()
        metadata = {"d": data.d, "n": data.n, "covariates": names}
        if grid is not None:
            metadata["grid"] = {"kind": "shared", "size": len(grid), "start": grid.points[0], "end": grid.points[-1]}
        else:
            metadata["grid"] = {"kind": "per-sample"}
        if description:
            metadata.update(description)
        write_json(files.metadata, metadata)


def save_predictions(path, data: FunctionalDataset, predictions: Sequence[np.ndarray]) -> None:
    """Predicted curves in long format ``sample_id,t,y_hat``."""
    ids = _sample_ids(data)
    frame = pd.DataFrame(
        {
            "sample_id": [sample_id for sample_id, s in zip(ids, data.samples) for _ in range(s.n_points)],
            "t": np.concatenate([s.grid.points for s in data.samples]) if data.n else np.zeros(0),
            "y_hat": np.concatenate([np.asarray(p) for p in predictions]) if data.n else np.zeros(0),
        },
        columns=["sample_id", "t", "y_hat"],
    )
    _write_csv(path, frame)


# -- models --------------------------------------------------------------------

def _sidecar(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def save_model(path, model: FittedModel | LinearFosModel, scaling: CovariateScaling | None = None) -> None:
    """Network models get a JSON document plus a ``.meta.json`` sidecar.

    The covariate *scaling* the model was trained under is stored with it,
    in the linear document or the network sidecar.
    """
    path = Path(path)
    stored = {"scaling": scaling.to_dict()} if scaling is not None else {}
    if isinstance(model, LinearFosModel):
        write_json(path, {"kind": "linear", **model.to_dict(), **stored})
        return
    write_json(path, model.params.to_dict())
    write_json(
        _sidecar(path),
        {
            "kind": "fosdnn",
            "config": model.config.to_dict(),
            "loss_trace": model.loss_trace.tolist(),
            "clip": model.clip_bound.F if model.clip_bound else None,
            **stored,
        },
    )


def _model_documents(path: Path) -> tuple[dict, dict | None]:
    document = read_json(path)
    if not isinstance(document, dict):
        raise ConfigurationError(f"{path}: model document is not a JSON object")
    if document.get("kind") == "linear":
        return document, None
    sidecar = _sidecar(path)
    if not sidecar.exists():
        raise ConfigurationError(f"{path}: network model without its sidecar {sidecar.name}")
    meta = read_json(sidecar)
    if not isinstance(meta, dict):
        raise ConfigurationError(f"{sidecar}: sidecar is not a JSON object")
    return document, meta


def load_model(path) -> FittedModel | LinearFosModel:
    path = Path(path)
    document, meta = _model_documents(path)
    if meta is None:
        document = {k: v for k, v in document.items() if k not in ("kind", "scaling")}
        return LinearFosModel.from_dict(document)
    params = NetworkParams.from_dict(document)
    try:
        config = TrainConfig.from_dict(meta["config"])
        clip = ClipBound(float(meta["clip"])) if meta.get("clip") is not None else None
        loss_trace = np.asarray(meta.get("loss_trace", []), dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{_sidecar(path)}: malformed sidecar: {exc!r}") from exc
    return FittedModel(config.shape(params.input_dim - 1), params, config, loss_trace, clip)


def load_scaling(path) -> CovariateScaling | None:
    """Covariate scaling stored with a model, or None for models saved without one."""
    path = Path(path)
    document, meta = _model_documents(path)
    stored = (meta if meta is not None else document).get("scaling")
    return CovariateScaling.from_dict(stored) if stored is not None else None
