"""Correlation of absolute percentage error with tract-level variables."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DomainError, JoinError, SchemaError
from ..ingest.clean import normalize_parcel_id


@dataclass(frozen=True)
class BiasAuditReport:
    correlations: dict[str, float | None]
    n: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"correlations": dict(self.correlations), "n": dict(self.n)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        rows = sorted(self.correlations.items(), key=lambda kv: (kv[1] is None, kv[1] if kv[1] is not None else 0))
        w = max([len("Variable")] + [len(k) for k, _ in rows])
        lines = [f"{'Variable'.ljust(w)}  Correlation       n", f"{'-' * w}  -----------  ------"]
        for k, v in rows:
            val = "missing" if v is None else f"{v:+.3f}"
            lines.append(f"{k.ljust(w)}  {val.rjust(11)}  {self.n.get(k, 0):6d}")
        return "\n".join(lines)


def pearson(x, y) -> float | None:
    """Pearson r, or None if either side has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        return None
    return float(np.clip(np.sum(dx * dy) / (sx * sy), -1.0, 1.0))


def bias_audit(parcel_ids, predictions, truths, parcel_tract: dict, tracts: dict) -> BiasAuditReport:
    """``parcel_tract`` maps parcel id → tract id; ``tracts`` maps tract id →
    {variable: value}. Unmapped parcels raise JoinError."""
    ids = [normalize_parcel_id(p) for p in parcel_ids]
    pt = {normalize_parcel_id(k): v for k, v in parcel_tract.items()}
    missing = [i for i in ids if i not in pt or pt[i] not in tracts]
    if missing:
        raise JoinError(missing)
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    if np.any(t <= 0):
        raise DomainError("true values must be positive")
    ape = np.abs(p - t) / t
    variables = []
    for row in tracts.values():
        for k in row:
            if k not in variables:
                variables.append(k)
    corr, counts = {}, {}
    for v in variables:
        xs = np.array([tracts[pt[i]].get(v, np.nan) for i in ids], dtype=np.float64)
        ok = np.isfinite(xs)
        counts[v] = int(ok.sum())
        corr[v] = pearson(xs[ok], ape[ok]) if ok.sum() >= 2 else None
    return BiasAuditReport(corr, counts)


def load_tracts_csv(path) -> dict[str, dict[str, float]]:
    out = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or reader.fieldnames[0] != "tract_id":
            raise SchemaError(f"{path}: first column must be tract_id")
        for row in reader:
            tid = row.pop("tract_id")
            out[tid] = {k: (float(v) if v not in ("", None) else float("nan")) for k, v in row.items()}
    return out


def load_parcel_tracts_csv(path) -> dict[str, str]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if set(reader.fieldnames or []) < {"parcel_id", "tract_id"}:
            raise SchemaError(f"{path}: expected columns parcel_id,tract_id")
        return {normalize_parcel_id(r["parcel_id"]): r["tract_id"] for r in reader}
