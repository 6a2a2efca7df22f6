"""Model specs, trained models and a uniform predict / serialise surface.

A *spec* (``SeasonalNaiveSpec``, ``RidgeSpec``, ``GbtConfig``) knows how to
``fit(features, y, seed)``; the resulting model is treated as immutable.
"""

from __future__ import annotations

import json

import numpy as np

from ..datamodel import Dataset
from ..errors import ConfigError, ContractError
from ..features import FeatureMatrix
from .gbt import GbtConfig, GbtModel, train_gbt
from .naive import SeasonalNaiveModel, SeasonalNaiveSpec, train_seasonal_naive
from .ridge import RidgeModel, RidgeSpec, train_ridge

__all__ = [
    "GbtConfig", "GbtModel", "RidgeModel", "RidgeSpec", "SeasonalNaiveModel",
    "SeasonalNaiveSpec", "train_gbt", "train_ridge", "train_seasonal_naive",
    "predict", "spec_from_dict", "model_to_dict", "model_from_dict", "save_model",
    "load_model", "MODEL_FORMAT_VERSION",
]

MODEL_FORMAT_VERSION = 1

_MODELS = {cls.kind: cls for cls in (SeasonalNaiveModel, RidgeModel, GbtModel)}


def predict(model, rows) -> np.ndarray:
    """Predict for a FeatureMatrix (any model) or a Dataset (seasonal naive only)."""
    if isinstance(model, SeasonalNaiveModel):
        if isinstance(rows, Dataset):
            return model.predict_keys(rows.location_id, rows.subregion, rows.months)
        return model.predict_keys(rows.location_id, rows.subregion, rows.month)
    if isinstance(rows, FeatureMatrix):
        if model.columns and tuple(rows.columns) != tuple(model.columns):
            raise ContractError(
                f"feature contract mismatch: model expects {list(model.columns)}, got {list(rows.columns)}"
            )
        X = rows.values
    else:
        X = np.asarray(rows, dtype=float)
        if X.ndim != 2 or (model.columns and X.shape[1] != len(model.columns)):
            raise ContractError(f"expected a 2-D array with {len(model.columns)} columns")
    return model.predict(X)


def spec_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", None)
    try:
        if kind == "seasonal_naive":
            return SeasonalNaiveSpec(**d)
        if kind == "ridge":
            return RidgeSpec(**d)
        if kind == "gbt":
            return GbtConfig(**d)
    except (TypeError, ContractError) as exc:
        raise ConfigError(f"bad {kind} model spec: {exc}") from exc
    raise ConfigError(f"unknown model kind {kind!r}")


def model_to_dict(model) -> dict:
    return {
        "format": "geoconform-model",
        "version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "columns": list(model.columns),
        "n_train": model.n_train,
        "seed": model.seed,
        "params": model.params(),
    }


def model_from_dict(d: dict):
    if d.get("format") != "geoconform-model" or d.get("version") != MODEL_FORMAT_VERSION:
        raise ContractError("not a geoconform model document of a supported version")
    cls = _MODELS[d["kind"]]
    return cls.from_params(d["params"], columns=tuple(d["columns"]), n_train=int(d["n_train"]),
                           seed=int(d["seed"]))


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
