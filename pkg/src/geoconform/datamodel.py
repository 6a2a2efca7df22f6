"""Observation records, sub-region taxonomy, AQI bins, the data audit and CSV I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import ContractError, DataError

PREDICTORS = (
    "sat_aot",
    "sat_no2",
    "sat_pblh",
    "temperature",
    "humidity",
    "pressure",
    "wind_speed",
    "precipitation",
    "clouds",
    "population_density",
)

CSV_HEADER = (
    "location_id",
    "country",
    "subregion",
    "latitude",
    "longitude",
    "timestamp",
    "pm25",
) + PREDICTORS

PM25_MIN = 0.0
PM25_MAX = 1000.0


class Subregion(str, Enum):
    NORTH = "north"
    WEST = "west"
    CENTRAL = "central"
    EAST = "east"
    SOUTHERN = "southern"

    @classmethod
    def parse(cls, text: str) -> "Subregion":
        return cls(text.strip().lower())

    @property
    def label(self) -> str:
        return self.value.capitalize()


SUBREGIONS = tuple(Subregion)


class AqiBin(IntEnum):
    GOOD = 0
    MODERATE = 1
    USG = 2
    UNHEALTHY = 3
    VERY_UNHEALTHY = 4
    HAZARDOUS = 5


# upper-inclusive edges: (0,12] (12,35] (35,55] (55,150] (150,250] (250,inf)
AQI_EDGES = np.array([12.0, 35.0, 55.0, 150.0, 250.0])


def aqi_bin(pm25: float) -> AqiBin:
    if not (math.isfinite(pm25) and pm25 > 0):
        raise ContractError(f"aqi_bin needs a finite positive concentration, got {pm25!r}")
    return AqiBin(int(np.searchsorted(AQI_EDGES, pm25, side="left")))


def aqi_bins(values, clip_nonpositive: bool = False) -> np.ndarray:
    """Vectorised :func:`aqi_bin` returning integer codes.

    Model predictions can fall at or below zero; with ``clip_nonpositive`` those
    are binned as Good instead of raising.
    """
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ContractError("aqi_bins got non-finite values")
    if not clip_nonpositive and np.any(v <= 0):
        raise ContractError("aqi_bins got non-positive values")
    return np.searchsorted(AQI_EDGES, v, side="left").astype(np.int64)


class RejectReason(str, Enum):
    MISSING_FIELD = "MissingField"
    OUT_OF_RANGE = "OutOfRange"
    UNPARSEABLE = "Unparseable"


@dataclass(frozen=True)
class Rejection:
    reason: RejectReason
    field: str
    detail: str = ""


@dataclass(frozen=True)
class Observation:
    location_id: str
    country: str
    subregion: Subregion
    latitude: float
    longitude: float
    timestamp: datetime
    pm25: float
    predictors: Mapping[str, float] = field(default_factory=dict)

    @property
    def year(self) -> int:
        return self.timestamp.year

    @property
    def month(self) -> int:
        return self.timestamp.month

    def to_row(self) -> dict[str, str]:
        row = {
            "location_id": self.location_id,
            "country": self.country,
            "subregion": self.subregion.value,
            "latitude": repr(float(self.latitude)),
            "longitude": repr(float(self.longitude)),
            "timestamp": format_timestamp(self.timestamp),
            "pm25": repr(float(self.pm25)),
        }
        for name in PREDICTORS:
            row[name] = repr(float(self.predictors[name]))
        return row


def format_timestamp(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return ts.isoformat() + "Z"


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _blank(value) -> bool:
    return value is None or (isinstance(value, str) and value.strip() == "")


def audit_record(raw: Mapping[str, object]) -> Observation | Rejection:
    """Accept or reject one candidate record.

    Rejections are returned, never raised. Every field of the CSV schema except
    ``country`` is critical; a NaN in a numeric field counts as missing.
    """
    for name in CSV_HEADER:
        if name == "country":
            continue
        if _blank(raw.get(name)):
            return Rejection(RejectReason.MISSING_FIELD, name)

    try:
        subregion = raw["subregion"]
        if not isinstance(subregion, Subregion):
            subregion = Subregion.parse(str(subregion))
    except ValueError:
        return Rejection(RejectReason.UNPARSEABLE, "subregion", str(raw["subregion"]))

    try:
        ts = raw["timestamp"]
        ts = parse_timestamp(ts) if isinstance(ts, str) else ts
        if not isinstance(ts, datetime):
            raise TypeError(type(ts).__name__)
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
        ts = ts.astimezone(timezone.utc)
    except (TypeError, ValueError) as exc:
        return Rejection(RejectReason.UNPARSEABLE, "timestamp", str(exc))

    numeric = {}
    for name in ("latitude", "longitude", "pm25") + PREDICTORS:
        try:
            value = float(raw[name])
        except (TypeError, ValueError):
            return Rejection(RejectReason.UNPARSEABLE, name, str(raw[name]))
        if math.isnan(value):
            return Rejection(RejectReason.MISSING_FIELD, name, "nan")
        if math.isinf(value):
            return Rejection(RejectReason.OUT_OF_RANGE, name, "infinite")
        numeric[name] = value

    pm25 = numeric["pm25"]
    if not (PM25_MIN < pm25 < PM25_MAX):
        return Rejection(RejectReason.OUT_OF_RANGE, "pm25", repr(pm25))
    if not -90.0 <= numeric["latitude"] <= 90.0:
        return Rejection(RejectReason.OUT_OF_RANGE, "latitude", repr(numeric["latitude"]))
    if not -180.0 <= numeric["longitude"] <= 180.0:
        return Rejection(RejectReason.OUT_OF_RANGE, "longitude", repr(numeric["longitude"]))

    country = raw.get("country")
    return Observation(
        location_id=str(raw["location_id"]).strip(),
        country="" if country is None else str(country).strip(),
        subregion=subregion,
        latitude=numeric["latitude"],
        longitude=numeric["longitude"],
        timestamp=ts,
        pm25=pm25,
        predictors={name: numeric[name] for name in PREDICTORS},
    )


class Dataset:
    """Immutable, column-oriented collection of audited observations.

    Row ``i`` of every column belongs to the same observation; ``dataset[i]``
    materialises it as an :class:`Observation`.
    """

    def __init__(self, location_id, country, subregion, latitude, longitude,
                 timestamp, pm25, predictors):
        n = len(pm25)
        self.location_id = np.asarray(location_id, dtype=object).reshape(n)
        self.country = np.asarray(country, dtype=object).reshape(n)
        self.subregion = np.asarray(subregion, dtype=np.int8).reshape(n)
        self.latitude = np.asarray(latitude, dtype=float).reshape(n)
        self.longitude = np.asarray(longitude, dtype=float).reshape(n)
        self.timestamp = np.asarray(timestamp, dtype="datetime64[us]").reshape(n)
        self.pm25 = np.asarray(pm25, dtype=float).reshape(n)
        self.predictors = np.asarray(predictors, dtype=float).reshape(n, len(PREDICTORS))
        for arr in (self.location_id, self.country, self.subregion, self.latitude,
                    self.longitude, self.timestamp, self.pm25, self.predictors):
            arr.flags.writeable = False
        self._by_location = None
        self._by_subregion = None

    @classmethod
    def from_observations(cls, observations: Iterable[Observation]) -> "Dataset":
        obs = list(observations)
        codes = {r: i for i, r in enumerate(SUBREGIONS)}
        return cls(
            location_id=[o.location_id for o in obs],
            country=[o.country for o in obs],
            subregion=[codes[o.subregion] for o in obs],
            latitude=[o.latitude for o in obs],
            longitude=[o.longitude for o in obs],
            timestamp=[np.datetime64(o.timestamp.astimezone(timezone.utc).replace(tzinfo=None), "us")
                       for o in obs],
            pm25=[o.pm25 for o in obs],
            predictors=np.array([[o.predictors[p] for p in PREDICTORS] for o in obs],
                                dtype=float).reshape(len(obs), len(PREDICTORS)),
        )

    def __len__(self) -> int:
        return len(self.pm25)

    def __getitem__(self, i: int) -> Observation:
        ts = self.timestamp[i].item().replace(tzinfo=timezone.utc)
        return Observation(
            location_id=self.location_id[i],
            country=self.country[i],
            subregion=SUBREGIONS[self.subregion[i]],
            latitude=float(self.latitude[i]),
            longitude=float(self.longitude[i]),
            timestamp=ts,
            pm25=float(self.pm25[i]),
            predictors=dict(zip(PREDICTORS, map(float, self.predictors[i]))),
        )

    def __iter__(self) -> Iterator[Observation]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset) or len(self) != len(other):
            return False
        return (
            np.array_equal(self.location_id, other.location_id)
            and np.array_equal(self.country, other.country)
            and np.array_equal(self.subregion, other.subregion)
            and np.array_equal(self.latitude, other.latitude)
            and np.array_equal(self.longitude, other.longitude)
            and np.array_equal(self.timestamp, other.timestamp)
            and np.array_equal(self.pm25, other.pm25)
            and np.array_equal(self.predictors, other.predictors)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Dataset(rows={len(self)}, locations={len(self.by_location)})"

    @property
    def years(self) -> np.ndarray:
        return self.timestamp.astype("datetime64[Y]").astype(np.int64) + 1970

    @property
    def months(self) -> np.ndarray:
        return self.timestamp.astype("datetime64[M]").astype(np.int64) % 12 + 1

    @property
    def subregions(self) -> list[Subregion]:
        return [SUBREGIONS[c] for c in self.subregion]

    def predictor(self, name: str) -> np.ndarray:
        return self.predictors[:, PREDICTORS.index(name)]

    @property
    def by_location(self) -> dict[str, np.ndarray]:
        """location_id -> ascending row indices, keys in first-appearance order."""
        if self._by_location is None:
            index: dict[str, list[int]] = {}
            for i, loc in enumerate(self.location_id):
                index.setdefault(loc, []).append(i)
            self._by_location = {k: np.array(v, dtype=np.int64) for k, v in index.items()}
        return self._by_location

    @property
    def by_subregion(self) -> dict[Subregion, np.ndarray]:
        if self._by_subregion is None:
            self._by_subregion = {
                r: np.flatnonzero(self.subregion == i)
                for i, r in enumerate(SUBREGIONS)
                if np.any(self.subregion == i)
            }
        return self._by_subregion

    def location_subregion(self) -> dict[str, Subregion]:
        return {loc: SUBREGIONS[self.subregion[rows[0]]] for loc, rows in self.by_location.items()}

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        if rows.size == 0:
            rows = rows.astype(np.intp)  # [] arrives as float64
        return Dataset(
            self.location_id[rows], self.country[rows], self.subregion[rows],
            self.latitude[rows], self.longitude[rows], self.timestamp[rows],
            self.pm25[rows], self.predictors[rows],
        )


@dataclass
class AuditSummary:
    accepted: int = 0
    rejected: dict[str, int] = field(
        default_factory=lambda: {r.value: 0 for r in RejectReason}
    )

    @property
    def total_rejected(self) -> int:
        return sum(self.rejected.values())

    def to_dict(self) -> dict:
        return {"accepted": self.accepted, "rejected": dict(self.rejected)}


def load_csv(path) -> tuple[Dataset, AuditSummary]:
    """Read and audit a CSV file in the documented schema.

    Bad rows are counted by reason and skipped; a wrong header raises
    :class:`DataError`, I/O problems propagate as ``OSError``.
    """
    summary = AuditSummary()
    accepted: list[Observation] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise DataError(f"{path}: header does not match schema {','.join(CSV_HEADER)}")
        for values in reader:
            if not values:
                continue
            if len(values) != len(CSV_HEADER):
                summary.rejected[RejectReason.UNPARSEABLE.value] += 1
                continue
            result = audit_record(dict(zip(CSV_HEADER, values)))
            if isinstance(result, Rejection):
                summary.rejected[result.reason.value] += 1
            else:
                accepted.append(result)
    summary.accepted = len(accepted)
    return Dataset.from_observations(accepted), summary


def save_csv(dataset: Dataset, path) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_HEADER, lineterminator="\n")
        writer.writeheader()
        for obs in dataset:
            writer.writerow(obs.to_row())
