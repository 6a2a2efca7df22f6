"""Split conformal intervals with pooled or per-region (Mondrian) calibration,
plus PICP / MPIW coverage diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .datamodel import SUBREGIONS, Dataset, Subregion
from .errors import ContractError, DataError, MissingPoolError
from .evaluation import _annotate, map_folds
from .features import FeatureMatrix, build_features
from .models import predict

POOLED = "pooled"
PER_REGION = "per-region"
MODES = (POOLED, PER_REGION)


def quantile_rank(n: int, alpha: float) -> int:
    """``ceil((n + 1)(1 - alpha))`` in exact arithmetic.

    ``alpha`` is read as the decimal it prints as, so 0.1 means 1/10 and not
    its binary neighbour.
    """
    a = Fraction(repr(float(alpha)))
    return math.ceil((n + 1) * (1 - a))


@dataclass(frozen=True)
class Pool:
    scores: np.ndarray  # ascending
    alpha: float

    @property
    def n(self) -> int:
        return len(self.scores)

    @property
    def rank(self) -> int:
        return quantile_rank(self.n, self.alpha)

    @property
    def insufficient(self) -> bool:
        return self.rank > self.n

    @property
    def qhat(self) -> float:
        return math.inf if self.insufficient else float(self.scores[self.rank - 1])


@dataclass(frozen=True)
class Calibrator:
    alpha: float
    mode: str
    pools: dict[str, Pool]

    def pool_for(self, subregion=None) -> tuple[str, Pool]:
        if self.mode == POOLED:
            return POOLED, self.pools[POOLED]
        key = _region_key(subregion)
        if key not in self.pools:
            raise MissingPoolError(f"no calibration pool for region {key!r}")
        return key, self.pools[key]

    @property
    def qhat(self) -> dict[str, float]:
        return {k: p.qhat for k, p in self.pools.items()}

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "mode": self.mode,
            "pools": {k: {"n": p.n, "rank": p.rank, "qhat": _num(p.qhat),
                          "insufficient": p.insufficient} for k, p in self.pools.items()},
        }


def _num(x: float):
    return x if math.isfinite(x) else None


def _region_key(region) -> str:
    if isinstance(region, Subregion):
        return region.value
    if isinstance(region, (int, np.integer)):
        return SUBREGIONS[int(region)].value
    return Subregion.parse(str(region)).value


def calibrate(residuals, alpha: float = 0.1, mode: str = POOLED, regions=None) -> Calibrator:
    """Build a calibrator from absolute calibration residuals ``|y - yhat|``.

    ``qhat`` is the k-th smallest score with ``k = ceil((n+1)(1-alpha))``; when
    ``k > n`` the pool is flagged insufficient and its width is infinite.
    """
    r = np.asarray(residuals, dtype=float).ravel()
    if not 0.0 < alpha < 1.0:
        raise ContractError(f"alpha must lie in (0, 1), got {alpha}")
    if r.size == 0:
        raise ContractError("no calibration residuals")
    if np.any(~np.isfinite(r)) or np.any(r < 0):
        raise ContractError("calibration residuals must be finite and non-negative")
    if mode == POOLED:
        return Calibrator(alpha, mode, {POOLED: Pool(np.sort(r), alpha)})
    if mode != PER_REGION:
        raise ContractError(f"mode must be one of {MODES}, got {mode!r}")
    if regions is None or len(regions) != r.size:
        raise ContractError("per-region calibration needs one region per residual")
    keys = np.array([_region_key(g) for g in regions])
    pools = {k: Pool(np.sort(r[keys == k]), alpha)
             for k in (reg.value for reg in SUBREGIONS) if np.any(keys == k)}
    return Calibrator(alpha, mode, pools)


@dataclass(frozen=True)
class IntervalPrediction:
    point: float
    lower: float
    upper: float
    qhat: float
    pool: str

    @property
    def insufficient(self) -> bool:
        return not math.isfinite(self.qhat)


def predict_interval(calibrator: Calibrator, yhat: float, subregion=None) -> IntervalPrediction:
    """Symmetric ``[yhat - qhat, yhat + qhat]``; bounds are never clamped."""
    key, pool = calibrator.pool_for(subregion)
    q = pool.qhat
    return IntervalPrediction(point=float(yhat), lower=float(yhat) - q, upper=float(yhat) + q,
                              qhat=q, pool=key)


@dataclass
class Intervals:
    """Column-wise batch of interval predictions."""

    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    qhat: np.ndarray
    pool: np.ndarray

    def __len__(self) -> int:
        return len(self.point)

    def __getitem__(self, i: int) -> IntervalPrediction:
        return IntervalPrediction(float(self.point[i]), float(self.lower[i]), float(self.upper[i]),
                                  float(self.qhat[i]), str(self.pool[i]))

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @classmethod
    def from_list(cls, items: Sequence[IntervalPrediction]) -> "Intervals":
        return cls(
            point=np.array([i.point for i in items], dtype=float),
            lower=np.array([i.lower for i in items], dtype=float),
            upper=np.array([i.upper for i in items], dtype=float),
            qhat=np.array([i.qhat for i in items], dtype=float),
            pool=np.array([i.pool for i in items], dtype=object),
        )

    @classmethod
    def empty(cls, n: int) -> "Intervals":
        nan = np.full(n, np.nan)
        return cls(nan.copy(), nan.copy(), nan.copy(), nan.copy(), np.full(n, "", dtype=object))

    def take(self, idx) -> "Intervals":
        return Intervals(self.point[idx], self.lower[idx], self.upper[idx], self.qhat[idx],
                         self.pool[idx])

    def put(self, idx, other: "Intervals") -> None:
        for name in ("point", "lower", "upper", "qhat", "pool"):
            getattr(self, name)[idx] = getattr(other, name)


def predict_intervals(calibrator: Calibrator, yhat, regions=None) -> Intervals:
    yhat = np.asarray(yhat, dtype=float).ravel()
    n = len(yhat)
    if calibrator.mode == POOLED:
        keys = np.full(n, POOLED, dtype=object)
        q = np.full(n, calibrator.pools[POOLED].qhat)
    else:
        if regions is None or len(regions) != n:
            raise ContractError("per-region intervals need one region per prediction")
        keys = np.array([_region_key(g) for g in regions], dtype=object)
        q = np.empty(n)
        for key in set(keys):
            q[keys == key] = calibrator.pool_for(key)[1].qhat
    return Intervals(point=yhat, lower=yhat - q, upper=yhat + q, qhat=q, pool=keys)


def _as_intervals(intervals) -> Intervals:
    return intervals if isinstance(intervals, Intervals) else Intervals.from_list(list(intervals))


def picp(intervals, y_true) -> float:
    """Fraction of truths inside their closed interval."""
    iv = _as_intervals(intervals)
    y = np.asarray(y_true, dtype=float).ravel()
    if len(iv) != len(y):
        raise ContractError(f"length mismatch: {len(iv)} intervals vs {len(y)} truths")
    if len(y) == 0:
        raise ContractError("picp needs at least one interval")
    return float(np.mean((iv.lower <= y) & (y <= iv.upper)))


def n_infinite(intervals) -> int:
    return int(np.sum(~np.isfinite(_as_intervals(intervals).width)))


def mpiw(intervals) -> float:
    """Mean width over finite intervals (count infinite ones with :func:`n_infinite`)."""
    w = _as_intervals(intervals).width
    if len(w) == 0:
        raise ContractError("mpiw needs at least one interval")
    finite = np.isfinite(w)
    if not finite.any():
        raise ContractError("all intervals have infinite width")
    return float(np.mean(w[finite]))


@dataclass(frozen=True)
class Coverage:
    picp: float
    mpiw: float  # inf when every interval in the group is infinite
    n: int
    n_infinite: int

    @property
    def half_width(self) -> float:
        return self.mpiw / 2.0

    def to_dict(self) -> dict:
        return {"picp": self.picp, "mpiw": _num(self.mpiw), "n": self.n,
                "n_infinite": self.n_infinite}


def _coverage(iv: Intervals, y) -> Coverage:
    k = n_infinite(iv)
    return Coverage(picp=picp(iv, y), mpiw=mpiw(iv) if k < len(iv) else math.inf,
                    n=len(iv), n_infinite=k)


def regional_coverage(dataset: Dataset, intervals) -> dict[str, Coverage]:
    """Per-subregion PICP / MPIW / counts, plus an ``overall`` entry."""
    iv = _as_intervals(intervals)
    if len(iv) != len(dataset):
        raise ContractError("intervals must align with dataset rows")
    out = {}
    for region, rows in dataset.by_subregion.items():
        out[region.value] = _coverage(iv.take(rows), dataset.pm25[rows])
    out["overall"] = _coverage(iv, dataset.pm25)
    return out


# -- cross-validated conformal ---------------------------------------------------

def calibration_split(dataset: Dataset, train_rows, fraction: float = 0.2, seed: int = 0):
    """Location-grouped split of ``train_rows`` into (proper, calibration) rows.

    Within each region a seeded ``round(fraction * n_locations)`` of the training
    locations (at least one when the region has two or more) go to calibration.
    """
    train_rows = np.asarray(train_rows, dtype=np.int64)
    rng = np.random.default_rng(seed)
    locs_by_region: dict[int, list[str]] = {}
    seen = set()
    for r in train_rows:
        loc = dataset.location_id[r]
        if loc not in seen:
            seen.add(loc)
            locs_by_region.setdefault(int(dataset.subregion[r]), []).append(loc)
    cal_locs = set()
    for region in sorted(locs_by_region):
        locs = sorted(locs_by_region[region])
        n_cal = int(round(fraction * len(locs)))
        if len(locs) >= 2:
            n_cal = min(max(n_cal, 1), len(locs) - 1)
        else:
            n_cal = 0
        picked = rng.permutation(len(locs))[:n_cal]
        cal_locs.update(locs[i] for i in picked)
    is_cal = np.array([dataset.location_id[r] in cal_locs for r in train_rows], dtype=bool)
    return train_rows[~is_cal], train_rows[is_cal]


@dataclass
class ConformalResult:
    intervals: Intervals
    calibrators: list[Calibrator]
    coverage: dict[str, Coverage] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "alpha": self.calibrators[0].alpha if self.calibrators else None,
            "mode": self.calibrators[0].mode if self.calibrators else None,
            "folds": [c.to_dict() for c in self.calibrators],
            "coverage": {k: v.to_dict() for k, v in self.coverage.items()},
        }


def conformal_cv(dataset: Dataset, spec, plan, alpha: float = 0.1, mode: str = POOLED,
                 cal_fraction: float = 0.2, seed: int = 0,
                 features: FeatureMatrix | None = None) -> ConformalResult:
    """Out-of-fold conformal intervals.

    For every fold the training locations are split into a proper training set
    and a calibration set; the model is fitted on the former, residuals on the
    latter set ``qhat``, and the fold's test rows get intervals.
    """
    fold_of_row = plan.row_folds(dataset)
    y = dataset.pm25
    fm = build_features(dataset) if features is None else features

    def one(i):
        try:
            test = np.flatnonzero(fold_of_row == i)
            proper, cal = calibration_split(dataset, np.flatnonzero(fold_of_row != i),
                                            cal_fraction, seed=seed * 1000 + i)
            if len(cal) == 0 or len(proper) == 0:
                raise DataError("calibration split left an empty proper-training or calibration set")
            model = spec.fit(fm.take(proper), y[proper], seed=seed)
            resid = np.abs(y[cal] - predict(model, fm.take(cal)))
            cal_regions = dataset.subregion[cal] if mode == PER_REGION else None
            calibrator = calibrate(resid, alpha, mode, cal_regions)
            yhat = predict(model, fm.take(test))
            regions = dataset.subregion[test] if mode == PER_REGION else None
            return test, calibrator, predict_intervals(calibrator, yhat, regions)
        except Exception as exc:
            raise _annotate(exc, i) from exc

    intervals = Intervals.empty(len(dataset))
    calibrators = []
    for test, calibrator, iv in map_folds(one, plan.k):
        intervals.put(test, iv)
        calibrators.append(calibrator)
    return ConformalResult(intervals, calibrators, regional_coverage(dataset, intervals))
