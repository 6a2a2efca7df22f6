"""Seasonal Naive baseline: month-wise mean PM2.5 per location.

Spatial CV holds out whole locations, so lookups fall back through
(location, month) -> (subregion, month) -> month -> global mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datamodel import Dataset
from ..errors import ContractError


@dataclass(frozen=True)
class SeasonalNaiveSpec:
    kind = "seasonal_naive"

    def fit(self, features, y, seed=None):
        return fit_keys(features.location_id, features.subregion, features.month, y)

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass
class SeasonalNaiveModel:
    by_location_month: dict[tuple[str, int], float]
    by_subregion_month: dict[tuple[int, int], float]
    by_month: dict[int, float]
    global_mean: float
    columns: tuple[str, ...] = ()
    n_train: int = 0
    seed: int = 0

    kind = "seasonal_naive"

    def predict_keys(self, location_id, subregion, month) -> np.ndarray:
        out = np.empty(len(month))
        for i, (loc, reg, m) in enumerate(zip(location_id, subregion, month)):
            m = int(m)
            reg = int(reg)
            if (loc, m) in self.by_location_month:
                out[i] = self.by_location_month[(loc, m)]
            elif (reg, m) in self.by_subregion_month:
                out[i] = self.by_subregion_month[(reg, m)]
            elif m in self.by_month:
                out[i] = self.by_month[m]
            else:
                out[i] = self.global_mean
        return out

    def params(self) -> dict:
        return {
            "by_location_month": [[k[0], k[1], v] for k, v in self.by_location_month.items()],
            "by_subregion_month": [[k[0], k[1], v] for k, v in self.by_subregion_month.items()],
            "by_month": [[k, v] for k, v in self.by_month.items()],
            "global_mean": self.global_mean,
        }

    @classmethod
    def from_params(cls, p: dict, **meta) -> "SeasonalNaiveModel":
        return cls(
            by_location_month={(a, int(b)): float(v) for a, b, v in p["by_location_month"]},
            by_subregion_month={(int(a), int(b)): float(v) for a, b, v in p["by_subregion_month"]},
            by_month={int(k): float(v) for k, v in p["by_month"]},
            global_mean=float(p["global_mean"]),
            **meta,
        )


def _group_means(keys, y) -> dict:
    sums: dict = {}
    counts: dict = {}
    for k, v in zip(keys, y):
        sums[k] = sums.get(k, 0.0) + v
        counts[k] = counts.get(k, 0) + 1
    return {k: sums[k] / counts[k] for k in sums}


def fit_keys(location_id, subregion, month, y) -> SeasonalNaiveModel:
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise ContractError("seasonal naive needs a non-empty training set")
    month = [int(m) for m in month]
    subregion = [int(r) for r in subregion]
    return SeasonalNaiveModel(
        by_location_month=_group_means(zip(location_id, month), y),
        by_subregion_month=_group_means(zip(subregion, month), y),
        by_month=_group_means(month, y),
        global_mean=float(y.mean()),
        n_train=len(y),
    )


def train_seasonal_naive(train: Dataset) -> SeasonalNaiveModel:
    return fit_keys(train.location_id, train.subregion, train.months, train.pm25)
