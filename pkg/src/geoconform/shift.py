"""Two-sample Kolmogorov-Smirnov covariate-shift diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from .datamodel import PREDICTORS, Dataset, Subregion
from .errors import ContractError

# Low < 0.10 <= Medium < 0.26 <= High. The upper cut sits at 0.26 so that a
# statistic of 0.2558 is still Medium.
LOW_MEDIUM = 0.10
MEDIUM_HIGH = 0.26

RAW_FEATURES = ("latitude", "longitude") + PREDICTORS


class Severity(IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2

    @property
    def label(self) -> str:
        return self.name.capitalize()


def ks_statistic(a, b) -> float:
    """Exact sup-distance between the empirical CDFs of ``a`` and ``b``.

    Both CDFs are evaluated at every distinct pooled value, so ties are handled
    exactly.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ContractError("ks_statistic needs two non-empty samples")
    if np.isnan(a).any() or np.isnan(b).any():
        raise ContractError("ks_statistic got NaN values")
    points = np.unique(np.concatenate([a, b]))
    ca = np.searchsorted(a, points, side="right")
    cb = np.searchsorted(b, points, side="right")
    # integer numerator keeps the difference exact before the single division
    return float(np.max(np.abs(ca * m - cb * n))) / (n * m)


def severity(ks: float) -> Severity:
    if not (0.0 <= ks <= 1.0) or math.isnan(ks):
        raise ContractError(f"KS statistic must lie in [0, 1], got {ks!r}")
    if ks < LOW_MEDIUM:
        return Severity.LOW
    if ks < MEDIUM_HIGH:
        return Severity.MEDIUM
    return Severity.HIGH


@dataclass(frozen=True)
class ShiftEntry:
    feature: str
    ks: float
    severity: Severity
    n_train: int
    n_test: int

    def to_dict(self) -> dict:
        return {"feature": self.feature, "ks": self.ks, "severity": self.severity.label,
                "n_train": self.n_train, "n_test": self.n_test}


@dataclass(frozen=True)
class ShiftReport:
    entries: tuple[ShiftEntry, ...]
    label: str = ""

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, feature: str) -> ShiftEntry:
        for e in self.entries:
            if e.feature == feature:
                return e
        raise KeyError(feature)

    def ranked(self) -> list[ShiftEntry]:
        return sorted(self.entries, key=lambda e: (-e.ks, e.feature))

    def to_dict(self) -> dict:
        return {"label": self.label, "features": [e.to_dict() for e in self.entries]}


def _raw_column(ds: Dataset, name: str) -> np.ndarray:
    if name == "latitude":
        return ds.latitude
    if name == "longitude":
        return ds.longitude
    return ds.predictor(name)


def shift_report(train: Dataset, test: Dataset, features: Sequence[str] = PREDICTORS,
                 label: str = "") -> ShiftReport:
    """KS statistic and severity per feature, on raw (unstandardised) values."""
    if len(train) == 0 or len(test) == 0:
        raise ContractError("shift_report needs non-empty train and test rows")
    unknown = [f for f in features if f not in RAW_FEATURES]
    if unknown:
        raise ContractError(f"unknown feature(s): {unknown}")
    entries = []
    for f in features:
        ks = ks_statistic(_raw_column(train, f), _raw_column(test, f))
        entries.append(ShiftEntry(f, ks, severity(ks), len(train), len(test)))
    return ShiftReport(tuple(entries), label)


def regional_shift(dataset: Dataset, region: Subregion | str,
                   features: Sequence[str] = PREDICTORS) -> ShiftReport:
    """Shift of one sub-region against all other rows."""
    if not isinstance(region, Subregion):
        region = Subregion.parse(str(region))
    code = list(Subregion).index(region)
    inside = dataset.subregion == code
    return shift_report(dataset.take(np.flatnonzero(~inside)), dataset.take(np.flatnonzero(inside)),
                        features, label=f"{region.value} vs rest")
