"""Model-ready feature matrix: month encoding, harmattan flag, coordinates and
per-(location, year) standardised predictors."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .datamodel import PREDICTORS, Dataset
from .errors import ContractError


class FeatureGroup(str, Enum):
    GEOGRAPHIC = "Geographic"
    TEMPORAL = "Temporal"
    ATMOSPHERIC = "Atmospheric"
    METEOROLOGICAL = "Meteorological"
    DEMOGRAPHIC = "Demographic"


FEATURE_GROUPS = tuple(FeatureGroup)

# public column contract, in order
COLUMNS = (
    ("latitude", FeatureGroup.GEOGRAPHIC),
    ("longitude", FeatureGroup.GEOGRAPHIC),
    ("month_sin", FeatureGroup.TEMPORAL),
    ("month_cos", FeatureGroup.TEMPORAL),
    ("harmattan_flag", FeatureGroup.TEMPORAL),
    ("sat_aot", FeatureGroup.ATMOSPHERIC),
    ("sat_no2", FeatureGroup.ATMOSPHERIC),
    ("sat_pblh", FeatureGroup.ATMOSPHERIC),
    ("temperature", FeatureGroup.METEOROLOGICAL),
    ("humidity", FeatureGroup.METEOROLOGICAL),
    ("pressure", FeatureGroup.METEOROLOGICAL),
    ("wind_speed", FeatureGroup.METEOROLOGICAL),
    ("precipitation", FeatureGroup.METEOROLOGICAL),
    ("clouds", FeatureGroup.METEOROLOGICAL),
    ("population_density", FeatureGroup.DEMOGRAPHIC),
)
COLUMN_NAMES = tuple(c for c, _ in COLUMNS)
STANDARDISED = frozenset(PREDICTORS)

HARMATTAN_MONTHS = frozenset({11, 12, 1, 2, 3})


def _check_month(month) -> np.ndarray:
    m = np.asarray(month)
    if not np.issubdtype(m.dtype, np.integer) and not np.all(m == np.floor(m)):
        raise ContractError(f"month must be an integer, got {month!r}")
    if np.any((m < 1) | (m > 12)):
        raise ContractError(f"month must be in 1..12, got {month!r}")
    return m


def encode_month(month):
    """(sin, cos) of the month angle 2*pi*month/12; works on scalars and arrays."""
    m = _check_month(month)
    angle = 2.0 * np.pi * m / 12.0
    s, c = np.sin(angle), np.cos(angle)
    # snap the exact quarter points so e.g. month 3 gives (1.0, 0.0) rather than 6e-17
    s = np.where(np.abs(s) < 1e-12, 0.0, s)
    c = np.where(np.abs(c) < 1e-12, 0.0, c)
    if np.ndim(month) == 0:
        return float(s), float(c)
    return s, c


def harmattan_flag(month):
    """1 for the Nov-Mar dry season, else 0 (all latitudes)."""
    m = _check_month(month)
    flag = np.isin(m, list(HARMATTAN_MONTHS)).astype(np.int64)
    return int(flag) if np.ndim(month) == 0 else flag


def standardize_by_group(values, location_ids, years) -> np.ndarray:
    """Z-score each column within every (location, year) group.

    Uses the population standard deviation. Single-row and constant groups map
    to 0. ``values`` may be 1-D or 2-D (rows x columns).
    """
    x = np.asarray(values, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    n = x.shape[0]
    if len(location_ids) != n or len(years) != n:
        raise ContractError("grouping keys must align with rows")
    if n == 0:
        return x[:, 0] if squeeze else x.copy()

    keys = np.array([f"{loc}\x1f{yr}" for loc, yr in zip(location_ids, years)], dtype=object)
    _, group = np.unique(keys, return_inverse=True)
    group = group.ravel()
    n_groups = group.max() + 1
    counts = np.bincount(group, minlength=n_groups).astype(float)

    out = np.empty_like(x)
    for j in range(x.shape[1]):
        col = x[:, j]
        mean = np.bincount(group, weights=col, minlength=n_groups) / counts
        centred = col - mean[group]
        var = np.bincount(group, weights=centred * centred, minlength=n_groups) / counts
        gmax = np.full(n_groups, -np.inf)
        gmin = np.full(n_groups, np.inf)
        np.maximum.at(gmax, group, col)
        np.minimum.at(gmin, group, col)
        sd = np.sqrt(var)
        # sd can underflow to 0 for distinct subnormal values
        degenerate = (gmax == gmin) | (counts < 2) | (sd == 0.0)
        sd[degenerate] = 1.0
        z = centred / sd[group]
        z[degenerate[group]] = 0.0
        out[:, j] = z
    return out[:, 0] if squeeze else out


@dataclass(frozen=True)
class FeatureMatrix:
    """Feature rows aligned to source observations.

    ``rows`` holds the source row index of every matrix row; ``location_id``,
    ``subregion`` and ``month`` are carried along for models keyed on them.
    """

    values: np.ndarray
    columns: tuple[str, ...]
    groups: tuple[FeatureGroup, ...]
    rows: np.ndarray
    location_id: np.ndarray
    subregion: np.ndarray
    month: np.ndarray

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def group_columns(self, group: FeatureGroup) -> list[str]:
        return [c for c, g in zip(self.columns, self.groups) if g == group]

    def active_groups(self) -> list[FeatureGroup]:
        return [g for g in FEATURE_GROUPS if g in self.groups]

    def drop_group(self, group: FeatureGroup) -> "FeatureMatrix":
        keep = [i for i, g in enumerate(self.groups) if g != group]
        return FeatureMatrix(
            values=self.values[:, keep],
            columns=tuple(self.columns[i] for i in keep),
            groups=tuple(self.groups[i] for i in keep),
            rows=self.rows,
            location_id=self.location_id,
            subregion=self.subregion,
            month=self.month,
        )

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        return FeatureMatrix(
            values=self.values[idx],
            columns=self.columns,
            groups=self.groups,
            rows=self.rows[idx],
            location_id=self.location_id[idx],
            subregion=self.subregion[idx],
            month=self.month[idx],
        )


def build_features(dataset: Dataset, rows=None, drop: tuple[FeatureGroup, ...] = ()) -> FeatureMatrix:
    """Build the feature matrix for ``dataset`` (or the subset ``rows`` of it).

    Standardisation statistics come only from the selected rows, so building
    train and test rows separately never mixes their statistics.
    """
    idx = np.arange(len(dataset)) if rows is None else np.asarray(rows, dtype=np.int64)
    month = dataset.months[idx]
    year = dataset.years[idx]
    loc = dataset.location_id[idx]
    msin, mcos = encode_month(month) if len(idx) else (np.empty(0), np.empty(0))

    values = np.empty((len(idx), len(COLUMNS)))
    values[:, 0] = dataset.latitude[idx]
    values[:, 1] = dataset.longitude[idx]
    values[:, 2] = msin
    values[:, 3] = mcos
    values[:, 4] = harmattan_flag(month) if len(idx) else 0.0
    values[:, 5:] = standardize_by_group(dataset.predictors[idx], loc, year)

    fm = FeatureMatrix(
        values=values,
        columns=COLUMN_NAMES,
        groups=tuple(g for _, g in COLUMNS),
        rows=idx,
        location_id=loc,
        subregion=dataset.subregion[idx],
        month=month,
    )
    for group in drop:
        fm = fm.drop_group(group)
    return fm
