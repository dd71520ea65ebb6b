"""Classifier two-sample test for whether missing cards are missing at random."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InsufficientDataError, SchemaError
from ..model.forest import PRESETS, HyperParams, fit_forest

MIN_GROUP = 20


@dataclass(frozen=True)
class C2stResult:
    test_accuracy: float
    n_test: int
    p_value: float
    method: str = "normal"

    def to_dict(self) -> dict:
        return asdict(self)


def normal_p_value(accuracy: float, n_test: int) -> float:
    """One-sided P(acc >= observed) under chance accuracy 0.5."""
    z = (accuracy - 0.5) / math.sqrt(0.25 / n_test)
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _values(m) -> np.ndarray:
    return np.asarray(getattr(m, "values", m), dtype=np.float64)


def _stratified_halves(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    perm = rng.permutation(n)
    h = n // 2
    return perm[:h], perm[h:]


def _accuracy(x_tr, y_tr, x_te, y_te, hp: HyperParams, workers) -> float:
    forest = fit_forest(x_tr, hp, y_tr, workers)
    pred = (forest.predict(x_te) > 0.5).astype(np.float64)
    return float(np.mean(pred == y_te))


def c2st_mar_test(present, missing, seed: int = 0, hp: HyperParams | None = None, method: str = "normal",
                  n_permutations: int = 100, workers: int | None = None) -> C2stResult:
    """Label present rows 0 and missing rows 1, split each group 50/50, fit a
    forest regressor on the labels and threshold its output at 0.5.

    The larger group is subsampled (seeded) to the size of the smaller one
    first.
    """
    a, b = _values(present), _values(missing)
    if len(a) < MIN_GROUP or len(b) < MIN_GROUP:
        raise InsufficientDataError(f"each group needs at least {MIN_GROUP} rows, got {len(a)} and {len(b)}")
    if a.shape[1] != b.shape[1]:
        raise SchemaError("groups have different column counts")
    if hasattr(present, "columns") and hasattr(missing, "columns") and tuple(present.columns) != tuple(missing.columns):
        raise SchemaError("groups have different columns")
    hp = HyperParams(**{**(hp or PRESETS["desk"]).to_dict(), "seed": seed})
    rng = np.random.default_rng([seed, 0xC257])
    # Equal group sizes keep chance accuracy at exactly 0.5.
    m = min(len(a), len(b))
    if len(a) > m:
        a = a[np.sort(rng.choice(len(a), m, replace=False))]
    if len(b) > m:
        b = b[np.sort(rng.choice(len(b), m, replace=False))]
    a_tr, a_te = _stratified_halves(len(a), rng)
    b_tr, b_te = _stratified_halves(len(b), rng)
    x_tr = np.vstack([a[a_tr], b[b_tr]])
    y_tr = np.concatenate([np.zeros(len(a_tr)), np.ones(len(b_tr))])
    x_te = np.vstack([a[a_te], b[b_te]])
    y_te = np.concatenate([np.zeros(len(a_te)), np.ones(len(b_te))])
    acc = _accuracy(x_tr, y_tr, x_te, y_te, hp, workers)
    n_test = len(y_te)
    if method == "normal":
        return C2stResult(acc, n_test, normal_p_value(acc, n_test), "normal")
    if method != "permutation":
        raise ValueError("method must be 'normal' or 'permutation'")
    hits = 0
    for _ in range(n_permutations):
        if _accuracy(x_tr, rng.permutation(y_tr), x_te, y_te, hp, workers) >= acc:
            hits += 1
    return C2stResult(acc, n_test, (hits + 1) / (n_permutations + 1), "permutation")
