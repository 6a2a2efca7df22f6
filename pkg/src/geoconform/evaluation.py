"""Fold construction, cross-validation runner, metrics and feature-group ablation."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .datamodel import SUBREGIONS, Dataset, aqi_bins
from .errors import ContractError, DataError, GeoconformError
from .features import FEATURE_GROUPS, FeatureGroup, FeatureMatrix, build_features
from .models import predict

log = logging.getLogger(__name__)

METRICS = ("rmse", "mae", "r2", "accuracy", "macro_f1")


# -- metrics -----------------------------------------------------------------

def _pair(y, yhat):
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.shape != yhat.shape:
        raise ContractError(f"length mismatch: {y.shape[0]} vs {yhat.shape[0]}")
    if y.size == 0:
        raise ContractError("metrics need at least one value")
    return y, yhat


def rmse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def mae(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def r2(y, yhat) -> float:
    """1 - SS_res / SS_tot, with the mean taken over the evaluated truth."""
    y, yhat = _pair(y, yhat)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ContractError("r2 is undefined for constant truth")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def _labels(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ContractError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.size == 0:
        raise ContractError("classification metrics need at least one label")
    return a, b


def accuracy(y_bins, yhat_bins) -> float:
    a, b = _labels(y_bins, yhat_bins)
    return float(np.mean(a == b))


def macro_f1(y_bins, yhat_bins) -> float:
    """Unweighted mean F1 over classes present in truth or prediction."""
    a, b = _labels(y_bins, yhat_bins)
    scores = []
    for cls in np.union1d(a, b):
        tp = int(np.sum((a == cls) & (b == cls)))
        fp = int(np.sum((a != cls) & (b == cls)))
        fn = int(np.sum((a == cls) & (b != cls)))
        denom = 2 * tp + fp + fn
        # integer counts, so rational arithmetic keeps the mean exact
        scores.append(Fraction(0) if denom == 0 else Fraction(2 * tp, denom))
    return float(sum(scores) / len(scores))


def score_all(y, yhat) -> dict[str, float]:
    truth_bins = aqi_bins(y, clip_nonpositive=True)
    pred_bins = aqi_bins(yhat, clip_nonpositive=True)
    return {
        "rmse": rmse(y, yhat),
        "mae": mae(y, yhat),
        "r2": r2(y, yhat),
        "accuracy": accuracy(truth_bins, pred_bins),
        "macro_f1": macro_f1(truth_bins, pred_bins),
    }


# -- folds -------------------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    """Location-grouped fold assignment, stratified by sub-region."""

    k: int
    fold_of: dict[str, int]
    seed: int = 0
    stratify: str = "subregion"

    def row_folds(self, dataset: Dataset) -> np.ndarray:
        try:
            return np.array([self.fold_of[loc] for loc in dataset.location_id], dtype=np.int64)
        except KeyError as exc:
            raise ContractError(f"location {exc.args[0]!r} is not in the fold plan") from None

    def test_locations(self, fold: int) -> list[str]:
        return sorted(loc for loc, f in self.fold_of.items() if f == fold)

    def to_dict(self) -> dict:
        return {"kind": "spatial", "k": self.k, "seed": self.seed, "stratify": self.stratify,
                "fold_of": dict(sorted(self.fold_of.items()))}


@dataclass(frozen=True)
class RandomFolds:
    """Row-level k-fold split; kept to expose spatial leakage, not for reporting."""

    k: int
    fold_of_row: np.ndarray
    seed: int = 0

    def row_folds(self, dataset: Dataset) -> np.ndarray:
        if len(dataset) != len(self.fold_of_row):
            raise ContractError("random fold plan was built for a different dataset")
        return self.fold_of_row

    def to_dict(self) -> dict:
        return {"kind": "random", "k": self.k, "seed": self.seed}


def make_spatial_folds(dataset: Dataset, k: int = 5, seed: int = 0) -> FoldPlan:
    """Assign every location to one of ``k`` test folds.

    Regions are processed in taxonomy order. Inside a region, locations go in
    order of record count (descending) then id, each to the fold holding the
    fewest locations of that region, then the fewest records overall, then the
    lowest index. The rule is fully deterministic, so ``seed`` is only recorded.
    """
    if k < 2:
        raise ContractError("need at least 2 folds")
    by_loc = dataset.by_location
    if len(by_loc) < k:
        raise DataError(f"fewer locations than folds ({len(by_loc)} < {k})")

    region_of = dataset.location_subregion()
    fold_records = [0] * k
    fold_of: dict[str, int] = {}
    for region in SUBREGIONS:
        locs = [loc for loc in by_loc if region_of[loc] == region]
        locs.sort(key=lambda loc: (-len(by_loc[loc]), loc))
        region_count = [0] * k
        for loc in locs:
            f = min(range(k), key=lambda j: (region_count[j], fold_records[j], j))
            fold_of[loc] = f
            region_count[f] += 1
            fold_records[f] += len(by_loc[loc])
    return FoldPlan(k=k, fold_of=fold_of, seed=seed)


def make_random_folds(dataset: Dataset, k: int = 5, seed: int = 0) -> RandomFolds:
    n = len(dataset)
    if k < 2:
        raise ContractError("need at least 2 folds")
    if k > n:
        raise DataError(f"more folds than rows ({k} > {n})")
    perm = np.random.default_rng(seed).permutation(n)
    fold_of_row = np.empty(n, dtype=np.int64)
    fold_of_row[perm] = np.arange(n) % k
    return RandomFolds(k=k, fold_of_row=fold_of_row, seed=seed)


# -- cross-validation --------------------------------------------------------

@dataclass
class CvResult:
    model: str
    per_fold: list[dict[str, float]]
    oof: np.ndarray
    fold_of_row: np.ndarray
    pooled: dict[str, float] = field(default_factory=dict)

    @property
    def summary(self) -> dict[str, tuple[float, float]]:
        """metric -> (mean, sample std) over folds."""
        out = {}
        for m in METRICS:
            vals = np.array([f[m] for f in self.per_fold])
            std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            out[m] = (float(np.mean(vals)), std)
        return out

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "per_fold": self.per_fold,
            "summary": {m: {"mean": mu, "std": sd} for m, (mu, sd) in self.summary.items()},
            "pooled_oof": self.pooled,
        }


def n_threads() -> int:
    raw = os.environ.get("GEOCONFORM_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer GEOCONFORM_THREADS=%r", raw)
    return os.cpu_count() or 1


def map_folds(fn, k: int):
    """Run ``fn(fold)`` for every fold; results come back in fold order."""
    workers = min(k, n_threads())
    if workers <= 1:
        return [fn(i) for i in range(k)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(k)))


def _annotate(exc: Exception, fold: int) -> Exception:
    if isinstance(exc, GeoconformError) and not isinstance(exc, KeyError):
        new = type(exc)(f"fold {fold}: {exc}")
        new.__cause__ = exc
        return new
    return exc


def fit_predict(features: FeatureMatrix, y, spec, train_rows, test_rows, seed: int = 0):
    """Fit on ``train_rows`` of a prebuilt feature matrix and predict ``test_rows``."""
    model = spec.fit(features.take(train_rows), y[train_rows], seed=seed)
    return model, predict(model, features.take(test_rows))


def run_cv(dataset: Dataset, spec, plan, seed: int = 0,
           drop: tuple[FeatureGroup, ...] = (), features: FeatureMatrix | None = None) -> CvResult:
    """Fit on each fold's training rows, predict its test rows, score per fold.

    Features are built once over the whole dataset: standardisation uses only
    predictor values of a (location, year) group, never the target, and under
    spatial folds a group never straddles train and test.
    """
    fold_of_row = plan.row_folds(dataset)
    y = dataset.pm25
    fm = build_features(dataset, drop=drop) if features is None else features

    def one(i):
        test = np.flatnonzero(fold_of_row == i)
        train = np.flatnonzero(fold_of_row != i)
        if len(test) == 0 or len(train) == 0:
            raise DataError(f"fold {i} has an empty train or test split")
        try:
            _, pred = fit_predict(fm, y, spec, train, test, seed=seed)
            return test, pred, score_all(y[test], pred)
        except Exception as exc:
            raise _annotate(exc, i) from exc

    oof = np.full(len(dataset), np.nan)
    per_fold = []
    for test, pred, scores in map_folds(one, plan.k):
        oof[test] = pred
        per_fold.append(scores)
    return CvResult(model=spec.kind, per_fold=per_fold, oof=oof, fold_of_row=fold_of_row,
                    pooled=score_all(y, oof))


def ablate_groups(dataset: Dataset, spec, plan, seed: int = 0,
                  groups=FEATURE_GROUPS) -> dict[FeatureGroup, float]:
    """RMSE increase (fold-mean RMSE) when each feature group is withheld."""
    groups = tuple(groups)
    if len(groups) < 2:
        raise ContractError("ablation needs at least two feature groups")
    fm = build_features(dataset)
    for g in FEATURE_GROUPS:
        if g not in groups:
            fm = fm.drop_group(g)
    full = run_cv(dataset, spec, plan, seed=seed, features=fm).summary["rmse"][0]
    out = {}
    for g in groups:
        res = run_cv(dataset, spec, plan, seed=seed, features=fm.drop_group(g))
        out[g] = res.summary["rmse"][0] - full
    return out


def leakage_gap(dataset: Dataset, spec, k: int = 5, seed: int = 0) -> dict[str, float]:
    """Fold-mean RMSE and R2 under spatial versus random CV on the same data."""
    fm = build_features(dataset)
    spatial = run_cv(dataset, spec, make_spatial_folds(dataset, k, seed), seed=seed, features=fm)
    random = run_cv(dataset, spec, make_random_folds(dataset, k, seed), seed=seed, features=fm)
    s, r = spatial.summary, random.summary
    return {
        "spatial_rmse": s["rmse"][0],
        "random_rmse": r["rmse"][0],
        "spatial_r2": s["r2"][0],
        "random_r2": r["r2"][0],
        "rmse_ratio": s["rmse"][0] / r["rmse"][0] if r["rmse"][0] > 0 else math.inf,
    }
