"""Least-squares gradient boosting over exact-greedy regression trees."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ContractError, DataError
from . import _tree


@dataclass(frozen=True)
class GbtConfig:
    n_estimators: int = 200
    max_depth: int = 8
    learning_rate: float = 0.1
    feature_fraction: float = 0.9
    min_samples_leaf: int = 20
    seed: int = 0

    kind = "gbt"

    def __post_init__(self):
        if self.n_estimators < 0 or self.max_depth < 0:
            raise ContractError("n_estimators and max_depth must be >= 0")
        if not 0.0 < self.feature_fraction <= 1.0:
            raise ContractError("feature_fraction must lie in (0, 1]")
        if self.min_samples_leaf < 1:
            raise ContractError("min_samples_leaf must be >= 1")
        if not self.learning_rate > 0:
            raise ContractError("learning_rate must be > 0")

    def fit(self, features, y, seed=None):
        cfg = self if seed is None else GbtConfig(**{**asdict(self), "seed": int(seed)})
        model = train_gbt(features.values, y, cfg)
        model.columns = tuple(features.columns)
        return model

    def to_dict(self) -> dict:
        return {"kind": self.kind, **asdict(self)}


@dataclass
class GbtModel:
    base: float
    learning_rate: float
    offsets: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    columns: tuple[str, ...] = ()
    n_train: int = 0
    seed: int = 0
    train_rmse: np.ndarray = field(default_factory=lambda: np.empty(0))

    kind = "gbt"

    @property
    def n_trees(self) -> int:
        return len(self.offsets) - 1

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        if self.n_trees == 0:
            return np.full(X.shape[0], self.base)
        return _tree.predict_ensemble(X, self.offsets, self.feature, self.threshold,
                                      self.left, self.right, self.value,
                                      float(self.base), float(self.learning_rate))

    def params(self) -> dict:
        return {
            "base": self.base,
            "learning_rate": self.learning_rate,
            "offsets": self.offsets.tolist(),
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_params(cls, p: dict, **meta) -> "GbtModel":
        return cls(
            base=float(p["base"]),
            learning_rate=float(p["learning_rate"]),
            offsets=np.asarray(p["offsets"], dtype=np.int64),
            feature=np.asarray(p["feature"], dtype=np.int64),
            threshold=np.asarray(p["threshold"], dtype=float),
            left=np.asarray(p["left"], dtype=np.int64),
            right=np.asarray(p["right"], dtype=np.int64),
            value=np.asarray(p["value"], dtype=float),
            **meta,
        )


def n_subsampled(feature_fraction: float, n_features: int) -> int:
    # guard against 0.9 * 10 == 9.000000000000002 rounding up to 10
    return max(1, min(n_features, math.ceil(feature_fraction * n_features - 1e-9)))


def train_gbt(X, y, config: GbtConfig = GbtConfig()) -> GbtModel:
    """Fit ``F_m = F_{m-1} + learning_rate * tree_m`` on least-squares residuals.

    Each tree sees a seeded random subset of ``ceil(feature_fraction * p)``
    columns. Deterministic for a given seed.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ContractError(f"X has shape {X.shape} but y has {y.shape[0]} rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("non-finite values in gradient boosting inputs")
    n, p = X.shape
    if n < 2 * config.min_samples_leaf or n == 0:
        raise DataError(f"need at least {2 * config.min_samples_leaf} rows, got {n}")

    base = float(np.mean(y))
    F = np.full(n, base)
    rng = np.random.default_rng(config.seed)
    k = n_subsampled(config.feature_fraction, p) if p else 0
    XT = np.ascontiguousarray(X.T)
    order = np.ascontiguousarray(np.argsort(XT, axis=1, kind="stable").astype(np.int64))
    sorted_vals = np.ascontiguousarray(np.take_along_axis(XT, order, axis=1))
    node_of = np.zeros(n, dtype=np.int64)

    trees = []
    rmse = [math.sqrt(float(np.mean((y - F) ** 2)))]
    for _ in range(config.n_estimators):
        feats = np.sort(rng.choice(p, size=k, replace=False)).astype(np.int64)
        resid = y - F
        tree = _tree.build_tree(XT, order, sorted_vals, resid, feats, config.max_depth,
                                config.min_samples_leaf, node_of)
        F += config.learning_rate * tree[4][node_of]
        trees.append(tree)
        rmse.append(math.sqrt(float(np.mean((y - F) ** 2))))

    sizes = [len(t[0]) for t in trees]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)

    def cat(i, dtype):
        return np.concatenate([t[i] for t in trees]).astype(dtype) if trees else np.empty(0, dtype)

    return GbtModel(
        base=base,
        learning_rate=config.learning_rate,
        offsets=offsets,
        feature=cat(0, np.int64),
        threshold=cat(1, float),
        left=cat(2, np.int64),
        right=cat(3, np.int64),
        value=cat(4, float),
        n_train=n,
        seed=config.seed,
        train_rmse=np.array(rmse),
    )
