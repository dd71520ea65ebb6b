"""Feature schema: definitions, tiers, grouping and recode tables."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import SchemaError

MISSING = "missing"
NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class FeatureDef:
    name: str
    kind: str
    domain: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            dom = tuple(str(v) for v in self.domain)
            if not dom or MISSING not in dom:
                raise SchemaError(f"categorical feature {self.name!r} needs a domain containing {MISSING!r}")
            if len(set(dom)) != len(dom):
                raise SchemaError(f"categorical feature {self.name!r} has duplicate categories")
            object.__setattr__(self, "domain", dom)


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature definitions plus the cleaning tables that feed them.

    ``tiers`` maps a tier name to the feature names it keeps; "full" is
    implicit (every feature). ``grouping`` collapses related raw categories,
    ``recode`` maps another source's codes (per county) onto this schema's
    categories, and ``grade_scale`` gives the numeric reading of grade.
    """

    features: tuple[FeatureDef, ...]
    tiers: dict = field(default_factory=dict)
    grouping: dict = field(default_factory=dict)
    recode: dict = field(default_factory=dict)
    grade_scale: dict = field(default_factory=dict)
    null_tokens: tuple[str, ...] = ("  ", "New", "")
    sqft_components: tuple[str, ...] = ()
    sqft_total: str = "sqft_total"

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        for tier, members in self.tiers.items():
            unknown = set(members) - set(names)
            if unknown:
                raise SchemaError(f"tier {tier!r} names unknown features {sorted(unknown)}")

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def feature(self, name: str) -> FeatureDef:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def tier(self, name: str) -> "FeatureSchema":
        """The schema restricted to one tier, order preserved."""
        if name == "full":
            return self
        if name not in self.tiers:
            raise SchemaError(f"unknown tier {name!r}")
        keep = set(self.tiers[name])
        return FeatureSchema(tuple(f for f in self.features if f.name in keep), {}, self.grouping, self.recode,
                             self.grade_scale, self.null_tokens, self.sqft_components, self.sqft_total)

    def to_dict(self) -> dict:
        return {
            "features": [{"name": f.name, "kind": f.kind, **({"domain": list(f.domain)} if f.domain else {})}
                         for f in self.features],
            "tiers": {k: list(v) for k, v in self.tiers.items()},
            "grouping": self.grouping,
            "recode": self.recode,
            "grade_scale": self.grade_scale,
            "null_tokens": list(self.null_tokens),
            "sqft_components": list(self.sqft_components),
            "sqft_total": self.sqft_total,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        try:
            feats = tuple(FeatureDef(f["name"], f["kind"], tuple(f.get("domain", ()))) for f in d["features"])
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema: {exc}") from exc
        return cls(feats, dict(d.get("tiers", {})), dict(d.get("grouping", {})), dict(d.get("recode", {})),
                   dict(d.get("grade_scale", {})), tuple(d.get("null_tokens", ("  ", "New", ""))),
                   tuple(d.get("sqft_components", ())), d.get("sqft_total", "sqft_total"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "FeatureSchema":
        return cls.from_dict(json.loads(Path(path).read_text()))


GRADES = ("Poor", "Fair", "Below Average", "Average", "Above Average", "Good", "Very Good", "Excellent", "Exceptional")
STYLES = ("Conventional", "Cape Cod", "Bungalow", "Colonial", "Victorian", "Tudor", "Old Style", "Other")
WALLS = ("Frame", "Brick", "Stone", "Stucco", "Aluminum/Vinyl", "Masonry/Frame", "Other")
BASEMENTS = ("None", "Crawl", "Partial", "Full")
HEATING = ("Forced Air", "Hot Water", "Steam", "Heat Pump", "None", "Other")
AIR = ("None", "Central", "Partial")
GARAGES = ("None", "Attached", "Detached", "Basement", "Carport")
LAND_USE = ("510", "520", "530", "550")
NEIGHBORHOODS = tuple(f"N{i:02d}" for i in range(1, 13))
ATTIC = ("No attic", "Partial attic", "Full attic")

SQFT_COMPONENTS = ("sqft_attic", "sqft_basement", "sqft_floor1", "sqft_floor2", "sqft_half_floor")

SHARED_FEATURES = (
    "attic_category", "sqft_total", "sqft_floor1", "stories", "year_built", "land_use", "n_subparcels",
    "grade", "exterior_wall", "basement_type", "heating", "air_conditioning", "total_rooms", "full_baths",
    "half_baths", "fireplaces", "garage_capacity",
)


def _cat(name, values):
    return FeatureDef(name, CATEGORICAL, tuple(values) + (MISSING,))


def default_schema() -> FeatureSchema:
    feats = (
        FeatureDef("sqft_attic", NUMERIC),
        FeatureDef("sqft_basement", NUMERIC),
        FeatureDef("sqft_floor1", NUMERIC),
        FeatureDef("sqft_floor2", NUMERIC),
        FeatureDef("sqft_half_floor", NUMERIC),
        FeatureDef("sqft_total", NUMERIC),
        FeatureDef("stories", NUMERIC),
        _cat("style", STYLES),
        _cat("grade", GRADES),
        FeatureDef("grade_numeric", NUMERIC),
        _cat("exterior_wall", WALLS),
        _cat("basement_type", BASEMENTS),
        _cat("heating", HEATING),
        _cat("air_conditioning", AIR),
        FeatureDef("total_rooms", NUMERIC),
        FeatureDef("full_baths", NUMERIC),
        FeatureDef("half_baths", NUMERIC),
        FeatureDef("fireplaces", NUMERIC),
        _cat("garage_type", GARAGES),
        FeatureDef("garage_capacity", NUMERIC),
        _cat("land_use", LAND_USE),
        _cat("neighborhood", NEIGHBORHOODS),
        FeatureDef("n_subparcels", NUMERIC),
        FeatureDef("year_built", NUMERIC),
        _cat("attic_category", ATTIC),
    )
    grouping = {"grade": {"Exceptional+": "Exceptional", "Outstanding": "Exceptional", "Extraordinary": "Exceptional"}}
    recode = {
        "franklin": {
            "grade": {
                "E": "Poor", "D": "Fair", "C-": "Below Average", "C": "Average", "C+": "Above Average",
                "B": "Good", "B+": "Very Good", "A": "Excellent", "A+": "Exceptional", "A+2": "Exceptional",
                "AA-": "Exceptional", "AA": "Exceptional", "AA+": "Exceptional",
            },
            "attic_category": {"No Attic": "No attic", "Partial Attic": "Partial attic", "Full Attic": "Full attic"},
        }
    }
    scale = {g: i + 1 for i, g in enumerate(GRADES)}
    return FeatureSchema(feats, {"shared": list(SHARED_FEATURES)}, grouping, recode, scale,
                         ("  ", "New", ""), SQFT_COMPONENTS, "sqft_total")
