"""Synthetic parcel datasets priced by a cost-manual-style valuation function.

Building value = grade rate ($/sqft) x living area, scaled by wall type and
age, plus fixed adders for rooms, baths, fireplaces, garage and basement.
Gaussian noise with sigma = ``noise_frac`` x mean value is added to labels.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..ingest.clean import Label
from ..ingest.records import write_labels_csv
from ..ingest.schema import AIR, BASEMENTS, GARAGES, GRADES, HEATING, LAND_USE, NEIGHBORHOODS, STYLES, WALLS

DEFAULT_RATES = {
    "Poor": 1.2, "Fair": 1.5, "Below Average": 1.8, "Average": 2.1, "Above Average": 2.4,
    "Good": 2.8, "Very Good": 3.3, "Excellent": 3.9, "Exceptional": 4.6,
}
DEFAULT_ADDERS = {"room": 60.0, "full_bath": 150.0, "half_bath": 70.0, "fireplace": 120.0,
                  "garage_space": 180.0, "basement_sqft": 0.6}
WALL_FACTOR = {"Frame": 1.0, "Brick": 1.08, "Stone": 1.12, "Stucco": 1.03, "Aluminum/Vinyl": 0.97,
               "Masonry/Frame": 1.05, "Other": 1.0}
GRADE_WEIGHTS = (0.03, 0.08, 0.14, 0.27, 0.18, 0.14, 0.09, 0.05, 0.02)
EXCEPTIONAL_RAW = ("Exceptional", "Exceptional+", "Outstanding", "Extraordinary")
FRANKLIN_GRADE = {
    "Poor": ("E",), "Fair": ("D",), "Below Average": ("C-",), "Average": ("C",), "Above Average": ("C+",),
    "Good": ("B",), "Very Good": ("B+",), "Excellent": ("A",), "Exceptional": ("A+", "A+2", "AA-", "AA"),
}
TRACT_VARIABLES = ("median_income", "pct_white", "poverty_rate", "owner_occupied", "single_family")

HAMILTON_COLUMNS = (
    "sqft_attic", "attic_full", "sqft_basement", "sqft_floor1", "sqft_floor2", "sqft_half_floor", "sqft_total",
    "stories", "style", "grade", "exterior_wall", "basement_type", "heating", "air_conditioning", "total_rooms",
    "full_baths", "half_baths", "fireplaces", "garage_type", "garage_capacity", "land_use", "neighborhood",
    "n_subparcels", "year_built",
)
FRANKLIN_COLUMNS = (
    "attic_category", "sqft_floor1", "sqft_total", "stories", "grade", "exterior_wall", "basement_type",
    "heating", "air_conditioning", "total_rooms", "full_baths", "half_baths", "fireplaces", "garage_capacity",
    "land_use", "n_subparcels", "year_built",
)


@dataclass(frozen=True)
class SynthParcelSpec:
    seed: int = 0
    n: int = 1000
    county: str = "hamilton"
    base_rates: dict = field(default_factory=lambda: dict(DEFAULT_RATES))
    adders: dict = field(default_factory=lambda: dict(DEFAULT_ADDERS))
    noise_frac: float = 0.10
    value_scale: float = 1.0
    mechanism: str = "MAR"
    missing_fraction: float = 0.25
    shift_feature: str = "sqft_total"
    shift_strength: float = 1.5
    dirty_fraction: float = 0.02
    n_tracts: int = 40

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if any(v <= 0 for v in self.base_rates.values()) or set(self.base_rates) != set(GRADES):
            raise ValueError("base_rates needs a positive rate for every grade")
        if self.mechanism not in ("MAR", "shifted"):
            raise ValueError("mechanism must be 'MAR' or 'shifted'")
        if self.county not in ("hamilton", "franklin"):
            raise ValueError("county must be 'hamilton' or 'franklin'")
        if not 0.0 <= self.missing_fraction < 1.0 or self.noise_frac < 0:
            raise ValueError("missing_fraction must lie in [0, 1) and noise_frac be >= 0")


@dataclass
class SynthParcels:
    spec: SynthParcelSpec
    columns: tuple[str, ...]
    rows: list[dict]
    parcel_ids: list[str]
    true_value: np.ndarray
    noiseless_value: np.ndarray
    has_card: np.ndarray
    labels: dict
    parcel_tract: dict
    tracts: list[dict]

    def write(self, directory) -> dict[str, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {k: d / f"{k}.csv" for k in ("features", "labels", "tracts", "parcel_tracts")}
        with paths["features"].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["parcel_id", *self.columns])
            for pid, row in zip(self.parcel_ids, self.rows):
                w.writerow([pid] + [row[c] for c in self.columns])
        write_labels_csv(paths["labels"], self.labels)
        with paths["tracts"].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tract_id", *TRACT_VARIABLES])
            for t in self.tracts:
                w.writerow([t["tract_id"]] + [f"{t[v]:.6g}" for v in TRACT_VARIABLES])
        with paths["parcel_tracts"].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["parcel_id", "tract_id"])
            for pid in self.parcel_ids:
                w.writerow([pid, self.parcel_tract[pid]])
        return paths


def _fmt(v) -> str:
    if isinstance(v, float):
        return str(int(v)) if v == int(v) else f"{v:g}"
    return str(v)


def valuation(grade, total_sqft, wall, year_built, rooms, full_baths, half_baths, fireplaces, garage_cap,
              basement_sqft, rates=DEFAULT_RATES, adders=DEFAULT_ADDERS, scale: float = 1.0) -> np.ndarray:
    """Noiseless 1933 building value for arrays of parcel attributes."""
    rate = np.array([rates[g] for g in grade])
    wf = np.array([WALL_FACTOR.get(w, 1.0) for w in wall])
    age = np.clip(1933 - np.asarray(year_built, dtype=np.float64), 0, None)
    depreciation = 1.0 - np.minimum(age, 80.0) * 0.002
    core = rate * np.asarray(total_sqft) * wf * depreciation
    extra = (adders["room"] * np.asarray(rooms) + adders["full_bath"] * np.asarray(full_baths)
             + adders["half_bath"] * np.asarray(half_baths) + adders["fireplace"] * np.asarray(fireplaces)
             + adders["garage_space"] * np.asarray(garage_cap) + adders["basement_sqft"] * np.asarray(basement_sqft))
    return scale * (core + extra)


def _parcel_id(county: str, i: int, rng) -> str:
    if county == "hamilton":
        return f"{int(rng.integers(1, 300)):03d}-{int(rng.integers(1, 20)):04d}-{i:04d}-00"
    return f"010-{100000 + i:06d}-00"


def generate_parcels(spec: SynthParcelSpec) -> SynthParcels:
    rng = np.random.default_rng([spec.seed, 0x9A7C])
    n = spec.n
    choice = lambda vals, p=None: rng.choice(np.array(vals, dtype=object), size=n, p=p)

    floor1 = np.round(np.exp(rng.normal(math.log(820), 0.15, n)))
    stories = choice([1.0, 1.5, 2.0, 2.5], [0.25, 0.3, 0.35, 0.1]).astype(float)
    floor2 = np.where(stories >= 2.0, np.round(floor1 * rng.uniform(0.8, 1.0, n)), 0.0)
    half = np.where(np.isin(stories, [1.5, 2.5]), np.round(floor1 * rng.uniform(0.4, 0.6, n)), 0.0)
    total = floor1 + floor2 + half
    has_attic = rng.random(n) < 0.6
    attic = np.where(has_attic, np.round(rng.uniform(100, 400, n)), 0.0)
    attic_full = has_attic & (rng.random(n) < 0.4)
    basement_type = choice(BASEMENTS, [0.1, 0.15, 0.3, 0.45])
    bfrac = np.select([basement_type == "Crawl", basement_type == "Partial", basement_type == "Full"], [0.0, 0.5, 0.9], 0.0)
    basement = np.round(floor1 * bfrac)
    grade = choice(GRADES, GRADE_WEIGHTS)
    wall = choice(WALLS, [0.35, 0.3, 0.05, 0.08, 0.12, 0.07, 0.03])
    rooms = np.clip(np.round(total / 230 + rng.normal(0, 0.7, n)), 3, 14)
    full_baths = np.clip(np.round(total / 900 + rng.normal(0, 0.4, n)), 1, 4)
    half_baths = rng.integers(0, 3, n).astype(float)
    fireplaces = choice([0.0, 1.0, 2.0, 3.0], [0.45, 0.35, 0.15, 0.05]).astype(float)
    garage_type = choice(GARAGES, [0.3, 0.15, 0.4, 0.1, 0.05])
    garage_cap = np.where(garage_type == "None", 0.0, rng.integers(1, 3, n).astype(float))
    year_built = rng.integers(1860, 1930, n).astype(float)
    style = choice(STYLES)
    heating = choice(HEATING, [0.5, 0.2, 0.1, 0.05, 0.05, 0.1])
    air = choice(AIR, [0.4, 0.45, 0.15])
    land_use = choice(LAND_USE, [0.8, 0.12, 0.05, 0.03])
    subparcels = choice([1.0, 2.0, 3.0], [0.85, 0.12, 0.03]).astype(float)

    tract_ids = [f"T{j + 1:03d}" for j in range(spec.n_tracts)]
    tract_hood = {t: NEIGHBORHOODS[j % len(NEIGHBORHOODS)] for j, t in enumerate(tract_ids)}
    tract_of = rng.integers(0, spec.n_tracts, n)
    hood = np.array([tract_hood[tract_ids[j]] for j in tract_of], dtype=object)

    noiseless = valuation(grade, total, wall, year_built, rooms, full_baths, half_baths, fireplaces, garage_cap,
                          basement, spec.base_rates, spec.adders, spec.value_scale)
    sigma = spec.noise_frac * float(noiseless.mean())
    true_value = np.maximum(np.round(noiseless + rng.normal(0.0, 1.0, n) * sigma), 50.0) if sigma > 0 \
        else np.round(noiseless)

    if spec.mechanism == "MAR":
        p_missing = np.full(n, spec.missing_fraction)
    else:
        base = {"sqft_total": total, "sqft_floor1": floor1, "year_built": year_built}[spec.shift_feature]
        z = (base - base.mean()) / (base.std() or 1.0)
        logit = math.log(spec.missing_fraction / (1 - spec.missing_fraction)) if spec.missing_fraction > 0 else -30.0
        p_missing = 1.0 / (1.0 + np.exp(-(logit + spec.shift_strength * z)))
    has_card = rng.random(n) >= p_missing

    dirty = rng.random(n) < spec.dirty_fraction
    dirty_kind = rng.integers(0, 3, n)
    blank_year = rng.random(n) < 0.5

    ids, rows, labels = [], [], {}
    parcel_tract = {}
    seen = set()
    for i in range(n):
        pid_raw = _parcel_id(spec.county, i, rng)
        while pid_raw in seen:
            pid_raw = _parcel_id(spec.county, i, rng)
        seen.add(pid_raw)
        g = str(grade[i])
        if spec.county == "hamilton":
            raw_grade = str(rng.choice(EXCEPTIONAL_RAW)) if g == "Exceptional" else g
            row = {
                "sqft_attic": attic[i], "attic_full": "Y" if attic_full[i] else "N", "sqft_basement": basement[i],
                "sqft_floor1": floor1[i], "sqft_floor2": floor2[i], "sqft_half_floor": half[i],
                "sqft_total": total[i], "stories": stories[i], "style": style[i], "grade": raw_grade,
                "exterior_wall": wall[i], "basement_type": basement_type[i], "heating": heating[i],
                "air_conditioning": air[i], "total_rooms": rooms[i], "full_baths": full_baths[i],
                "half_baths": half_baths[i], "fireplaces": fireplaces[i], "garage_type": garage_type[i],
                "garage_capacity": garage_cap[i], "land_use": land_use[i], "neighborhood": hood[i],
                "n_subparcels": subparcels[i], "year_built": year_built[i],
            }
            columns = HAMILTON_COLUMNS
        else:
            fr = FRANKLIN_GRADE[g]
            attic_cat = "No Attic" if attic[i] == 0 else ("Full Attic" if attic_full[i] else "Partial Attic")
            row = {
                "attic_category": attic_cat, "sqft_floor1": floor1[i], "sqft_total": total[i], "stories": stories[i],
                "grade": fr[int(rng.integers(0, len(fr)))], "exterior_wall": wall[i],
                "basement_type": basement_type[i], "heating": heating[i], "air_conditioning": air[i],
                "total_rooms": rooms[i], "full_baths": full_baths[i], "half_baths": half_baths[i],
                "fireplaces": fireplaces[i], "garage_capacity": garage_cap[i], "land_use": land_use[i],
                "n_subparcels": subparcels[i], "year_built": year_built[i],
            }
            columns = FRANKLIN_COLUMNS
        row = {k: _fmt(v) for k, v in row.items()}
        if dirty[i]:
            if dirty_kind[i] == 0:
                row["grade"] = "  "
            elif dirty_kind[i] == 1:
                row["sqft_total"] = "0"
            else:
                row["heating"] = "  "
        ids.append(pid_raw)
        rows.append(row)
        pid = "".join(ch for ch in pid_raw if ch.isalnum()).upper()
        parcel_tract[pid_raw] = tract_ids[tract_of[i]]
        if has_card[i]:
            labels[pid] = Label(int(true_value[i]), 1933, bool(rng.random() < 0.9), "hand", None)

    trng = np.random.default_rng([spec.seed, 0x7AC7])
    tracts = [{
        "tract_id": t,
        "median_income": float(np.round(trng.uniform(11831, 161964))),
        "pct_white": float(np.round(trng.uniform(0.06, 0.98), 4)),
        "poverty_rate": float(np.round(trng.uniform(0.02, 0.5), 4)),
        "owner_occupied": float(np.round(trng.uniform(0.2, 0.9), 4)),
        "single_family": float(np.round(trng.uniform(0.3, 0.95), 4)),
    } for t in tract_ids]

    return SynthParcels(spec, columns, rows, ids, true_value, noiseless, has_card, labels,
                        parcel_tract, tracts)
