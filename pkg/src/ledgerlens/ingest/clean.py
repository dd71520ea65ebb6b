"""Record cleaning and cross-source harmonization."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Iterable

from ..errors import InvalidIdentifierError, SchemaError
from .schema import CATEGORICAL, NUMERIC, FeatureSchema

_NON_ALNUM = re.compile(r"[^0-9A-Za-z]")
_TRUE = {"1", "true", "yes", "y", "t"}


@dataclass(frozen=True)
class Label:
    value_dollars: int
    year: int = 1933
    handwritten: bool = False
    source: str = "hand"
    confidence: float | None = None


@dataclass(frozen=True)
class ParcelRecord:
    """One parcel. Feature values are floats, category strings or None (missing)."""

    parcel_id: str
    county: str
    features: dict = field(default_factory=dict)
    label: Label | None = None

    def __post_init__(self):
        if not self.parcel_id or not self.parcel_id.isalnum() or self.parcel_id != self.parcel_id.upper():
            raise InvalidIdentifierError(f"parcel id {self.parcel_id!r} is not normalized")
        if self.label is not None and self.label.value_dollars <= 0:
            raise ValueError("label value must be positive")


def normalize_parcel_id(*components) -> str:
    """Concatenate identifier parts, drop non-alphanumerics, uppercase."""
    if len(components) == 1 and not isinstance(components[0], str):
        components = tuple(components[0])
    joined = "".join("" if c is None else str(c) for c in components)
    out = _NON_ALNUM.sub("", joined).upper()
    if not out:
        raise InvalidIdentifierError(f"identifier {components!r} is empty after normalization")
    return out


def standardize_nulls(fields: dict, null_tokens=("  ", "New", "")) -> dict:
    tokens = set(null_tokens)
    return {k: (None if isinstance(v, str) and v in tokens else v) for k, v in fields.items()}


def _to_number(v):
    if v is None:
        return None
    if isinstance(v, bool):
        return float(v)
    if isinstance(v, (int, float)):
        return float(v) if math.isfinite(v) else None
    try:
        x = float(str(v).replace(",", "").strip())
    except ValueError:
        return None
    return x if math.isfinite(x) else None


def coerce_types(fields: dict, schema: FeatureSchema) -> dict:
    out = dict(fields)
    for f in schema.features:
        if f.name not in out:
            continue
        v = out[f.name]
        if f.kind == NUMERIC:
            out[f.name] = _to_number(v)
        elif v is not None:
            s = str(v).strip()
            if s.endswith(".0") and s[:-2].isdigit():
                s = s[:-2]
            out[f.name] = s if s else None
    return out


def impute_total_sqft(fields: dict, components, total: str = "sqft_total"):
    """Fill a zero total from its parts; None when every sqft field is zero."""
    if total not in fields:
        return fields
    parts = [fields.get(c) or 0.0 for c in components if c in fields]
    t = fields[total]
    if t == 0:
        s = float(sum(parts))
        if s > 0:
            return {**fields, total: s}
        return None
    return fields


def group_categories(fields: dict, grouping: dict) -> dict:
    out = dict(fields)
    for name, table in grouping.items():
        v = out.get(name)
        if isinstance(v, str) and v in table:
            out[name] = table[v]
    return out


def attic_category(sqft, full_flag) -> str | None:
    if sqft is None:
        return None
    if sqft <= 0:
        return "No attic"
    if full_flag is not None and str(full_flag).strip().lower() in _TRUE:
        return "Full attic"
    return "Partial attic"


def derive_features(fields: dict, schema: FeatureSchema) -> dict:
    """Attic category from attic sqft, numeric grade from grade label."""
    out = dict(fields)
    if "sqft_attic" in out:
        cat = attic_category(out["sqft_attic"], out.get("attic_full"))
        if cat is not None or "attic_category" not in out:
            out["attic_category"] = cat
    if "grade" in out and schema.grade_scale:
        g = out["grade"]
        out["grade_numeric"] = float(schema.grade_scale[g]) if g in schema.grade_scale else None
    return out


def clean_record(rec: ParcelRecord, schema: FeatureSchema) -> ParcelRecord | None:
    """Null tokens, types, sqft imputation, recodes and derived features.

    Returns None for records dropped by the sqft rule. Idempotent.
    """
    f = standardize_nulls(rec.features, schema.null_tokens)
    f = coerce_types(f, schema)
    f = impute_total_sqft(f, schema.sqft_components, schema.sqft_total)
    if f is None:
        return None
    f = group_categories(f, schema.recode.get(rec.county.lower(), {}))
    f = group_categories(f, schema.grouping)
    f = derive_features(f, schema)
    return replace(rec, features=f)


def clean_records(records: Iterable[ParcelRecord], schema: FeatureSchema) -> list[ParcelRecord]:
    out = []
    for r in records:
        c = clean_record(r, schema)
        if c is not None and (c.label is None or c.label.value_dollars > 0):
            out.append(c)
    return out


def harmonize(records: Iterable[ParcelRecord], schema: FeatureSchema, tier: str = "shared") -> list[ParcelRecord]:
    """Restrict every record to ``tier`` after recoding to the common granularity."""
    sub = schema.tier(tier)
    keep = sub.names
    out = []
    for r in records:
        f = group_categories(r.features, schema.recode.get(r.county.lower(), {}))
        f = group_categories(f, schema.grouping)
        if "attic_category" in keep and f.get("attic_category") is None and "sqft_attic" in f:
            f = {**f, "attic_category": attic_category(f["sqft_attic"], f.get("attic_full"))}
        absent = [n for n in keep if n not in f]
        if absent:
            raise SchemaError(f"parcel {r.parcel_id} lacks shared-tier fields {absent}")
        f = coerce_types({n: f[n] for n in keep}, sub)
        out.append(replace(r, features=f))
    return out
