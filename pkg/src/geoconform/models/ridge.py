from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError


@dataclass(frozen=True)
class RidgeSpec:
    alpha: float = 1.0

    kind = "ridge"

    def fit(self, features, y, seed=None):
        model = train_ridge(features.values, y, self.alpha)
        model.columns = tuple(features.columns)
        return model

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha}


@dataclass
class RidgeModel:
    coef: np.ndarray
    intercept: float
    alpha: float
    columns: tuple[str, ...] = ()
    n_train: int = 0
    seed: int = 0

    kind = "ridge"

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X @ self.coef + self.intercept

    def params(self) -> dict:
        return {"coef": self.coef.tolist(), "intercept": self.intercept, "alpha": self.alpha}

    @classmethod
    def from_params(cls, p: dict, **meta) -> "RidgeModel":
        return cls(coef=np.asarray(p["coef"], dtype=float), intercept=float(p["intercept"]),
                   alpha=float(p["alpha"]), **meta)


def train_ridge(X, y, alpha: float = 1.0) -> RidgeModel:
    """Ridge regression with an unpenalised intercept.

    Solves ``(Xc'Xc + alpha I) b = Xc'(y - ybar)`` on column-centred ``Xc``;
    the intercept is ``ybar - xbar'b``. With ``alpha == 0`` the minimum-norm
    least-squares solution is returned.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ContractError(f"X has shape {X.shape} but y has {y.shape[0]} rows")
    if X.shape[0] < 1:
        raise ContractError("ridge needs at least one row")
    if alpha < 0:
        raise ContractError("alpha must be >= 0")

    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    yc = y - y_mean
    if alpha > 0:
        A = Xc.T @ Xc + alpha * np.eye(X.shape[1])
        coef = np.linalg.solve(A, Xc.T @ yc)
    else:
        coef = np.linalg.lstsq(Xc, yc, rcond=None)[0]
    intercept = y_mean - float(x_mean @ coef)
    return RidgeModel(coef=coef, intercept=intercept, alpha=float(alpha), n_train=len(y))
