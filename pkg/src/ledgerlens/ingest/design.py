"""One-hot design matrices and the train/test split."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import InsufficientDataError, SchemaError
from .clean import ParcelRecord
from .schema import CATEGORICAL, MISSING, FeatureSchema


@dataclass(frozen=True)
class DesignMatrix:
    """Dense numeric encoding of parcels. ``groups[j]`` is the source feature
    of column j, which lets one-hot columns roll back up."""

    row_ids: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray
    target: np.ndarray | None = None
    groups: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape != (len(self.row_ids), len(self.columns)):
            raise SchemaError(f"values shape {v.shape} does not match {len(self.row_ids)} rows x {len(self.columns)} columns")
        if np.isnan(v).any():
            raise SchemaError("design matrix contains missing entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.target is not None:
            t = np.array(self.target, dtype=np.float64)
            if t.shape != (len(self.row_ids),):
                raise SchemaError("target length does not match rows")
            t.setflags(write=False)
            object.__setattr__(self, "target", t)
        if not self.groups:
            object.__setattr__(self, "groups", tuple(c.split("=", 1)[0] for c in self.columns))

    @property
    def n(self) -> int:
        return len(self.row_ids)

    def take(self, idx) -> "DesignMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        return DesignMatrix(tuple(self.row_ids[i] for i in idx), self.columns, self.values[idx],
                            None if self.target is None else self.target[idx], self.groups)

    def with_target(self, target) -> "DesignMatrix":
        return DesignMatrix(self.row_ids, self.columns, self.values, target, self.groups)

    def save_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["parcel_id", *self.columns] + (["target"] if self.target is not None else []))
            for i, pid in enumerate(self.row_ids):
                row = [pid] + [repr(float(x)) for x in self.values[i]]
                if self.target is not None:
                    row.append(repr(float(self.target[i])))
                w.writerow(row)

    @classmethod
    def load_csv(cls, path, sidecar: dict | None = None) -> "DesignMatrix":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][0] != "parcel_id":
            raise SchemaError(f"{path}: not a design-matrix CSV")
        header = rows[0][1:]
        has_t = header and header[-1] == "target"
        cols = header[:-1] if has_t else header
        body = rows[1:]
        vals = np.array([[float(x) for x in r[1 : 1 + len(cols)]] for r in body]).reshape(len(body), len(cols))
        tgt = np.array([float(r[-1]) for r in body]) if has_t else None
        groups = tuple(sidecar["groups"]) if sidecar and "groups" in sidecar else ()
        return cls(tuple(r[0] for r in body), tuple(cols), vals, tgt, groups)


@dataclass(frozen=True)
class Encoder:
    """Fitted encoding: schema order, category domains and numeric medians."""

    schema: FeatureSchema
    medians: dict

    @property
    def columns(self) -> tuple[str, ...]:
        cols = []
        for f in self.schema.features:
            if f.kind == CATEGORICAL:
                cols.extend(f"{f.name}={c}" for c in f.domain)
            else:
                cols.append(f.name)
        return tuple(cols)

    @property
    def groups(self) -> tuple[str, ...]:
        g = []
        for f in self.schema.features:
            g.extend([f.name] * (len(f.domain) if f.kind == CATEGORICAL else 1))
        return tuple(g)

    def transform(self, records: Iterable[ParcelRecord], with_target: bool = True) -> DesignMatrix:
        records = list(records)
        cols = self.columns
        x = np.zeros((len(records), len(cols)))
        for i, r in enumerate(records):
            j = 0
            for f in self.schema.features:
                v = r.features.get(f.name)
                if f.kind == CATEGORICAL:
                    pos = f.domain.index(v) if v in f.domain else f.domain.index(MISSING)
                    x[i, j + pos] = 1.0
                    j += len(f.domain)
                else:
                    x[i, j] = self.medians[f.name] if v is None or (isinstance(v, float) and math.isnan(v)) else float(v)
                    j += 1
        target = None
        if with_target and records and all(r.label is not None for r in records):
            target = np.array([r.label.value_dollars for r in records], dtype=np.float64)
        return DesignMatrix(tuple(r.parcel_id for r in records), cols, x, target, self.groups)

    def sidecar(self) -> dict:
        return {"columns": list(self.columns), "groups": list(self.groups),
                "medians": {k: float(v) for k, v in self.medians.items()},
                "schema": self.schema.to_dict()}

    def save_sidecar(self, path) -> None:
        Path(path).write_text(json.dumps(self.sidecar(), indent=2) + "\n")

    @classmethod
    def from_sidecar(cls, d: dict) -> "Encoder":
        return cls(FeatureSchema.from_dict(d["schema"]), dict(d["medians"]))


def fit_encoder(train_records: Iterable[ParcelRecord], schema: FeatureSchema) -> Encoder:
    """Training medians for numeric features (0 when a feature is never observed)."""
    train_records = list(train_records)
    medians = {}
    for f in schema.features:
        if f.kind == CATEGORICAL:
            continue
        vals = [r.features.get(f.name) for r in train_records]
        vals = [float(v) for v in vals if v is not None and not (isinstance(v, float) and math.isnan(v))]
        medians[f.name] = float(np.median(vals)) if vals else 0.0
    return Encoder(schema, medians)


def one_hot_encode(records, schema: FeatureSchema, encoder: Encoder | None = None) -> tuple[DesignMatrix, Encoder]:
    """Encode ``records``; fits the encoder on them when none is supplied."""
    records = list(records)
    enc = encoder or fit_encoder(records, schema)
    return enc.transform(records), enc


def split_indices(n: int, test_fraction: float = 0.20, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    if n < 5:
        raise InsufficientDataError(f"need at least 5 rows to split, got {n}")
    n_train = int(math.floor(n * (1.0 - test_fraction) + 1e-9))
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def train_test_split(matrix, test_fraction: float = 0.20, seed: int = 0):
    """Seeded shuffle split of a DesignMatrix or a list of records."""
    tr, te = split_indices(len(matrix.row_ids) if isinstance(matrix, DesignMatrix) else len(matrix), test_fraction, seed)
    if isinstance(matrix, DesignMatrix):
        return matrix.take(tr), matrix.take(te)
    items = list(matrix)
    return [items[i] for i in tr], [items[i] for i in te]
