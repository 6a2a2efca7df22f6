"""Regional reliability flags and monitor prioritisation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable

import numpy as np

from .datamodel import Dataset
from .errors import ContractError

MIN_LOCATION_ROWS = 10


class ReliabilityFlag(IntEnum):
    UNRELIABLE = 0
    LOW = 1
    MEDIUM = 2
    HIGH = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()


# (flag, r2 must exceed, half-width must stay below), first match wins
FLAG_RULES = (
    (ReliabilityFlag.HIGH, 0.1, 40.0),
    (ReliabilityFlag.MEDIUM, 0.0, 80.0),
    (ReliabilityFlag.LOW, -0.5, 100.0),
)


def reliability_flag(r2: float, half_width: float) -> ReliabilityFlag:
    """Flag from a regression score and a mean interval half-width (strict bounds)."""
    if half_width < 0:
        raise ContractError("half_width must be >= 0")
    if math.isnan(r2) or math.isnan(half_width):
        return ReliabilityFlag.UNRELIABLE
    for flag, r2_min, w_max in FLAG_RULES:
        if r2 > r2_min and half_width < w_max:
            return flag
    return ReliabilityFlag.UNRELIABLE


@dataclass(frozen=True)
class PriorityScore:
    score: float
    half_width: float
    pop_density: float


def priority_score(half_width: float, pop_density: float) -> PriorityScore:
    """``half_width * ln(1 + pop_density)``."""
    if not (half_width >= 0 and pop_density >= 0):
        raise ContractError("half_width and pop_density must be non-negative")
    return PriorityScore(half_width * math.log1p(pop_density), half_width, pop_density)


@dataclass(frozen=True)
class RankedSite:
    rank: int
    site_id: str
    half_width: float
    pop_density: float
    score: float

    def to_dict(self) -> dict:
        return {"rank": self.rank, "site_id": self.site_id, "half_width": self.half_width,
                "pop_density": self.pop_density, "score": self.score}


def rank_sites(sites: Iterable[tuple[str, float, float]]) -> list[RankedSite]:
    """Sort candidate sites by priority, descending; ties by id ascending."""
    scored = [(str(sid), float(w), float(rho), priority_score(float(w), float(rho)).score)
              for sid, w, rho in sites]
    scored.sort(key=lambda s: (-s[3], s[0]))
    return [RankedSite(i + 1, sid, w, rho, sc) for i, (sid, w, rho, sc) in enumerate(scored)]


@dataclass(frozen=True)
class RegionFlags:
    flag: ReliabilityFlag
    r2: float
    half_width: float
    n_locations: int
    histogram: dict[ReliabilityFlag, float]
    location_flags: dict[str, ReliabilityFlag]

    def to_dict(self) -> dict:
        return {
            "flag": self.flag.label,
            "r2": _num(self.r2),
            "half_width": _num(self.half_width),
            "n_locations": self.n_locations,
            "histogram": {f.label: self.histogram[f] for f in
                          sorted(ReliabilityFlag, reverse=True)},
        }


def _num(x):
    return x if math.isfinite(x) else None


def _r2_or_nan(y, yhat) -> float:
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return math.nan
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def _half_width(widths) -> float:
    finite = widths[np.isfinite(widths)]
    return math.inf if finite.size == 0 else float(np.mean(finite)) / 2.0


def flag_regions(dataset: Dataset, oof, widths) -> dict[str, RegionFlags]:
    """Region-level flag plus a per-location flag histogram.

    ``oof`` are out-of-fold point predictions and ``widths`` the matching
    interval widths (``upper - lower``), both aligned to dataset rows. Each
    location is flagged from its own R2 and mean half-width; locations with
    fewer than ``MIN_LOCATION_ROWS`` rows are Unreliable.
    """
    oof = np.asarray(oof, dtype=float)
    widths = np.asarray(widths, dtype=float)
    if len(oof) != len(dataset) or len(widths) != len(dataset):
        raise ContractError("predictions and widths must align with dataset rows")
    y = dataset.pm25
    by_loc = dataset.by_location
    region_of = dataset.location_subregion()
    out = {}
    for region, rows in dataset.by_subregion.items():
        r2 = _r2_or_nan(y[rows], oof[rows])
        w = _half_width(widths[rows])
        loc_flags = {}
        for loc in sorted(l for l in by_loc if region_of[l] == region):
            lrows = by_loc[loc]
            if len(lrows) < MIN_LOCATION_ROWS:
                loc_flags[loc] = ReliabilityFlag.UNRELIABLE
            else:
                loc_flags[loc] = reliability_flag(_r2_or_nan(y[lrows], oof[lrows]),
                                                  _half_width(widths[lrows]))
        n_loc = len(loc_flags)
        hist = {f: sum(v == f for v in loc_flags.values()) / n_loc for f in ReliabilityFlag}
        out[region.value] = RegionFlags(reliability_flag(r2, w), r2, w, n_loc, hist, loc_flags)
    return out
