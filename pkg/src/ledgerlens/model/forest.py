"""Bagged regression forests, a single-tree learner and a least-squares baseline."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InsufficientDataError, SchemaError
from ..ingest.design import DesignMatrix
from .tree import Tree, build_tree, n_candidate_features, pack_trees, predict_trees

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class HyperParams:
    n_estimators: int = 2500
    max_depth: int = 200
    min_samples_split: int = 4
    max_features: str | float = "sqrt"
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_features not in ("sqrt", "all"):
            n_candidate_features(self.max_features, 1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        mf = d.get("max_features", "sqrt")
        if mf not in ("sqrt", "all"):
            mf = float(mf)
        return cls(int(d.get("n_estimators", 2500)), int(d.get("max_depth", 200)),
                   int(d.get("min_samples_split", 4)), mf, int(d.get("seed", 0)), bool(d.get("bootstrap", True)))


PRESETS = {
    "table4": HyperParams(n_estimators=2500, max_depth=200, min_samples_split=4, max_features="sqrt"),
    "desk": HyperParams(n_estimators=200, max_depth=200, min_samples_split=4, max_features="sqrt"),
}


def preset(name: str, **overrides) -> HyperParams:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return HyperParams(**{**base.to_dict(), **overrides})


def tree_stream(seed: int, tree_index: int) -> np.random.Generator:
    """Independent PRNG stream for one tree, fixed by (seed, tree index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tree_index)]))


def default_workers() -> int:
    env = os.environ.get("LEDGERLENS_WORKERS", "").strip()
    if env.isdigit() and int(env) > 0:
        return int(env)
    return os.cpu_count() or 1


def _values(m) -> np.ndarray:
    return m.values if isinstance(m, DesignMatrix) else np.asarray(m, dtype=np.float64)


@dataclass
class RandomForest:
    hyperparams: HyperParams
    columns: tuple[str, ...]
    trees: list[Tree]
    medians: dict = field(default_factory=dict)
    groups: tuple[str, ...] = ()
    n_train: int = 0
    _packed: tuple | None = field(default=None, repr=False, compare=False)

    def packed(self):
        if self._packed is None:
            self._packed = pack_trees(self.trees)
        return self._packed

    def _check(self, rows) -> np.ndarray:
        if isinstance(rows, DesignMatrix):
            if tuple(rows.columns) != tuple(self.columns):
                raise SchemaError("design-matrix columns do not match the trained forest")
            return rows.values
        x = np.asarray(rows, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != len(self.columns):
            raise SchemaError(f"expected {len(self.columns)} columns, got shape {x.shape}")
        return x

    def predict(self, rows) -> np.ndarray:
        return predict_trees(self.packed(), self._check(rows))

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "forest",
            "hyperparams": self.hyperparams.to_dict(),
            "columns": list(self.columns),
            "groups": list(self.groups),
            "medians": {k: float(v) for k, v in self.medians.items()},
            "n_train": self.n_train,
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(f"unsupported model schema_version {d.get('schema_version')!r}")
        return cls(HyperParams.from_dict(d["hyperparams"]), tuple(d["columns"]),
                   [Tree.from_dict(t) for t in d["trees"]], dict(d.get("medians", {})),
                   tuple(d.get("groups", ())), int(d.get("n_train", 0)))

    @classmethod
    def load(cls, path) -> "RandomForest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _fit_one(x, y, hp: HyperParams, t: int) -> Tree:
    rng = tree_stream(hp.seed, t)
    n = len(y)
    sample = rng.integers(0, n, size=n) if hp.bootstrap else np.arange(n)
    split_seed = int(rng.integers(0, 2**63 - 1))
    return build_tree(x, y, sample, max_depth=hp.max_depth, min_samples_split=hp.min_samples_split,
                      max_features=hp.max_features, seed=split_seed)


def fit_forest(matrix, hp: HyperParams | None = None, target=None, workers: int | None = None) -> RandomForest:
    """Fit ``hp.n_estimators`` trees; tree t depends only on (seed, t), so the
    result is the same for any worker count."""
    hp = hp or PRESETS["desk"]
    x = np.ascontiguousarray(_values(matrix))
    y = target if target is not None else getattr(matrix, "target", None)
    if y is None:
        raise ValueError("no target vector to fit")
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.shape[0] == 0:
        raise InsufficientDataError("cannot fit on an empty matrix")
    if len(y) != x.shape[0]:
        raise ValueError("target length does not match rows")
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or hp.n_estimators == 1:
        trees = [_fit_one(x, y, hp, t) for t in range(hp.n_estimators)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(lambda t: _fit_one(x, y, hp, t), range(hp.n_estimators)))
    if isinstance(matrix, DesignMatrix):
        cols, groups = tuple(matrix.columns), tuple(matrix.groups)
    else:
        cols = tuple(f"x{j}" for j in range(x.shape[1]))
        groups = cols
    return RandomForest(hp, cols, trees, {}, groups, int(x.shape[0]))


def fit_tree(matrix, hp: HyperParams | None = None, rng=None, target=None) -> Tree:
    """One tree on all rows (no bootstrap)."""
    hp = hp or HyperParams(n_estimators=1, max_features="all")
    x = _values(matrix)
    y = target if target is not None else matrix.target
    if x.shape[0] == 0:
        raise InsufficientDataError("cannot fit on an empty matrix")
    seed = int(rng.integers(0, 2**63 - 1)) if rng is not None else hp.seed
    return build_tree(x, y, None, max_depth=hp.max_depth, min_samples_split=hp.min_samples_split,
                      max_features=hp.max_features, seed=seed)


def predict(forest: RandomForest, rows) -> np.ndarray:
    return forest.predict(rows)


def feature_importances(forest: RandomForest, by: str = "feature") -> dict:
    """Mean impurity decrease per source feature (or per column with
    ``by="column"``), normalized to sum to 1. All zeros when no tree splits."""
    n_cols = len(forest.columns)
    total = np.zeros(n_cols)
    for t in forest.trees:
        root_n = t.n_samples[0]
        internal = np.flatnonzero(t.feature >= 0)
        for i in internal:
            l, r = t.left[i], t.right[i]
            n = t.n_samples[i]
            child = (t.n_samples[l] * t.impurity[l] + t.n_samples[r] * t.impurity[r]) / n
            total[t.feature[i]] += (n / root_n) * (t.impurity[i] - child)
    total /= max(len(forest.trees), 1)
    s = total.sum()
    if s > 0:
        total = total / s
    if by == "column":
        return dict(zip(forest.columns, total.tolist()))
    groups = forest.groups or forest.columns
    out: dict[str, float] = {}
    for g, v in zip(groups, total):
        out[g] = out.get(g, 0.0) + float(v)
    return out


class LinearBaseline:
    """Ordinary least squares with an intercept."""

    def __init__(self):
        self.coef = None
        self.columns = ()

    def fit(self, matrix, target=None):
        x = _values(matrix)
        y = target if target is not None else matrix.target
        a = np.hstack([np.ones((x.shape[0], 1)), x])
        self.coef = np.linalg.lstsq(a, y, rcond=None)[0]
        self.columns = tuple(getattr(matrix, "columns", ()))
        return self

    def predict(self, rows) -> np.ndarray:
        x = _values(rows)
        return self.coef[0] + x @ self.coef[1:]


class ForestRegressor:
    def __init__(self, hp: HyperParams | None = None, workers: int | None = None):
        self.hp = hp or PRESETS["desk"]
        self.workers = workers
        self.forest = None

    def fit(self, matrix, target=None):
        self.forest = fit_forest(matrix, self.hp, target, self.workers)
        return self

    def predict(self, rows) -> np.ndarray:
        return self.forest.predict(rows)


class TreeRegressor(ForestRegressor):
    def __init__(self, hp: HyperParams | None = None, workers: int | None = None):
        base = hp or HyperParams(n_estimators=1, max_features="all")
        super().__init__(HyperParams(**{**base.to_dict(), "n_estimators": 1, "bootstrap": False}), 1)


def make_regressor(kind: str, hp: HyperParams | None = None, workers: int | None = None):
    if kind == "forest":
        return ForestRegressor(hp, workers)
    if kind == "tree":
        return TreeRegressor(hp)
    if kind == "linear":
        return LinearBaseline()
    raise ValueError(f"unknown regressor {kind!r}")
