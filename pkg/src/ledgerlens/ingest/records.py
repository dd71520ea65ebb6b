"""CSV loaders for parcel features and labels."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Iterable

from ..errors import InvalidIdentifierError, SchemaError
from .clean import Label, ParcelRecord, normalize_parcel_id

log = logging.getLogger(__name__)

BLANK_YEAR = 1933
LABEL_FIELDS = ["parcel_id", "value_dollars", "year", "handwritten", "source", "confidence"]


def load_features_csv(path, county: str = "hamilton") -> list[ParcelRecord]:
    """Raw feature rows; ``parcel_id`` must be the first column.

    Values stay as strings so cleaning sees the source's own null tokens.
    Rows whose identifier normalizes to nothing are skipped with a warning.
    """
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty features file") from None
        if not header or header[0].strip() != "parcel_id":
            raise SchemaError(f"{path}: first column must be parcel_id")
        names = [h.strip() for h in header[1:]]
        out = []
        seen = set()
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                pid = normalize_parcel_id(row[0])
            except InvalidIdentifierError:
                log.warning("%s:%d: unusable parcel id %r", path, line_no, row[0])
                continue
            if pid in seen:
                log.warning("%s:%d: duplicate parcel %s skipped", path, line_no, pid)
                continue
            seen.add(pid)
            vals = row[1:] + [""] * (len(names) - len(row) + 1)
            out.append(ParcelRecord(pid, county, dict(zip(names, vals))))
    return out


def _parse_bool(v: str) -> bool:
    return str(v).strip().lower() in {"1", "true", "yes", "y", "t"}


def load_labels_csv(path, target_year: int | None = BLANK_YEAR, null_tokens=("  ", "New", "")) -> dict[str, Label]:
    """Labels keyed by parcel id. A blank year means the 1933 assessment.

    Rows with a null or non-positive value are dropped; with ``target_year``
    set, only labels for that year are kept.
    """
    tokens = set(null_tokens)
    out: dict[str, Label] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(LABEL_FIELDS[:2]) - set(reader.fieldnames or [])
        if missing:
            raise SchemaError(f"{path}: labels file lacks columns {sorted(missing)}")
        for row in reader:
            raw_v = row.get("value_dollars", "")
            if raw_v in tokens or raw_v is None:
                continue
            try:
                value = int(float(raw_v.replace(",", "")))
            except ValueError:
                continue
            if value <= 0:
                continue
            y = (row.get("year") or "").strip()
            year = BLANK_YEAR if not y else int(float(y))
            if target_year is not None and year != target_year:
                continue
            conf = (row.get("confidence") or "").strip()
            pid = normalize_parcel_id(row["parcel_id"])
            out[pid] = Label(value, year, _parse_bool(row.get("handwritten", "")),
                             (row.get("source") or "hand").strip() or "hand", float(conf) if conf else None)
    return out


def write_labels_csv(path, labels: dict[str, Label]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_FIELDS)
        for pid, lab in labels.items():
            w.writerow([pid, lab.value_dollars, lab.year, int(lab.handwritten), lab.source,
                        "" if lab.confidence is None else f"{lab.confidence:.6f}"])


def attach_labels(records: Iterable[ParcelRecord], labels: dict[str, Label]) -> list[ParcelRecord]:
    from dataclasses import replace

    return [replace(r, label=labels.get(r.parcel_id)) for r in records]


def write_features_csv(path, records: Iterable[ParcelRecord], columns: list[str] | None = None) -> None:
    records = list(records)
    if columns is None:
        columns = []
        for r in records:
            for k in r.features:
                if k not in columns:
                    columns.append(k)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parcel_id"] + columns)
        for r in records:
            w.writerow([r.parcel_id] + ["" if r.features.get(c) is None else r.features[c] for c in columns])
