"""K-fold cross validation and grid search."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InsufficientDataError
from .forest import ForestRegressor, HyperParams


def kfold_indices(n: int, k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Seeded disjoint folds covering range(n), sizes differing by at most one."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise InsufficientDataError(f"need at least k={k} rows, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


@dataclass
class CvResult:
    mean_rmse: float
    fold_rmse: list[float]


def cross_validate(matrix, hp: HyperParams, k: int = 5, seed: int = 0, learner=None, workers: int | None = None) -> CvResult:
    """Mean held-out RMSE over seeded folds. ``learner`` maps hp to an
    unfitted regressor (default: the forest)."""
    x = matrix.values
    y = matrix.target
    folds = kfold_indices(len(y), k, seed)
    make = learner or (lambda h: ForestRegressor(h, workers))
    out = []
    for i, test in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        model = make(hp).fit(x[train], y[train])
        err = model.predict(x[test]) - y[test]
        out.append(float(math.sqrt(np.mean(err * err))))
    return CvResult(float(np.mean(out)), out)


def grid_search(matrix, grid, k: int = 5, seed: int = 0, learner=None, workers: int | None = None):
    """Best grid point by mean CV RMSE (first wins ties) and the full table."""
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be non-empty")
    table = []
    best_i = 0
    for i, hp in enumerate(grid):
        res = cross_validate(matrix, hp, k, seed, learner, workers)
        table.append({**hp.to_dict(), "mean_cv_rmse": res.mean_rmse})
        if res.mean_rmse < table[best_i]["mean_cv_rmse"]:
            best_i = i
    return grid[best_i], table


def expand_grid(base: HyperParams, **axes) -> list[HyperParams]:
    """Cartesian product of ``axes`` over ``base``, in row-major order."""
    points = [base.to_dict()]
    for name, values in axes.items():
        points = [{**p, name: v} for p in points for v in values]
    return [HyperParams(**p) for p in points]


def write_grid_csv(path, table: list[dict]) -> None:
    if not table:
        return
    keys = list(table[0].keys())
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for row in table:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
