"""K-fold grid search for GBRT hyperparameters and the pooled baseline."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..tabular import Dataset, encode
from .gbrt import GbrtModel, Hyperparams, _boost, _canonical, _Prepared, default_grid, fit_gbrt


def kfold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Shuffle ``range(n)`` with ``seed`` and cut it into ``folds`` near-equal parts."""
    if not 1 < folds <= n:
        raise ValueError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def cv_scores(X, y, grid: Sequence[Hyperparams], folds: int = 5, seed: int = 0) -> np.ndarray:
    """Mean out-of-fold RMSE of every grid entry."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    parts = kfold_indices(len(y), folds, seed)
    scores = np.zeros((len(grid), folds))
    for f, held in enumerate(parts):
        mask = np.ones(len(y), bool)
        mask[held] = False
        Xc, yc = _canonical(X[mask], y[mask])
        prep = _Prepared.from_matrix(Xc)
        for g, hp in enumerate(grid):
            model = _boost(Xc, yc, prep, hp)
            scores[g, f] = np.sqrt(np.mean((model.predict(X[held]) - y[held]) ** 2))
    return scores.mean(axis=1)


def tune_gbrt(X, y, grid: Sequence[Hyperparams] | None = None, folds: int = 5, seed: int = 0) -> Hyperparams:
    """Grid entry with the lowest mean out-of-fold RMSE; ties go to the earlier entry."""
    grid = list(grid) if grid is not None else default_grid()
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    if len(grid) == 1:
        return grid[0]
    return grid[int(np.argmin(cv_scores(X, y, grid, folds, seed)))]


def fit_tuned(X, y, grid=None, folds: int = 5, seed: int = 0) -> tuple[GbrtModel, Hyperparams]:
    hp = tune_gbrt(X, y, grid, folds, seed)
    return fit_gbrt(X, y, hp, seed), hp


def regressor_matrix(dataset: Dataset) -> np.ndarray:
    """Tree-model design matrix: one-hot categoricals, raw continuous values.

    Trees are invariant to per-column affine rescaling, so regressors skip
    standardisation and their inputs do not depend on which records the
    scaling statistics were fitted on.
    """
    return encode(dataset, standardize=False).values


def fit_baseline(train: Dataset, metric: str, grid=None, folds: int = 5, seed: int = 0) -> GbrtModel:
    """One tuned GBRT over all known-class records pooled; the class label is not a feature."""
    if metric not in train.schema.target_metrics:
        raise ValueError(f"unknown metric {metric!r}; schema has {list(train.schema.target_metrics)}")
    if len(set(train.labels.tolist())) < 2:
        raise ValueError("baseline training data must cover at least two classes")
    model, _ = fit_tuned(regressor_matrix(train), train.targets[metric], grid, folds, seed)
    return model
