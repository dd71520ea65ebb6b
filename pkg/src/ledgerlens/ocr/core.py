"""Prediction records, blank-to-zero normalization and confidence filtering."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from ..errors import InvalidCharactersError, ProtocolError

ALLOWED_CHARS = frozenset("0123456789,.$ ")
SEPARATORS = ",.$ "


@dataclass(frozen=True)
class OcrPrediction:
    doc_id: str
    column_name: str
    row_index: int
    text: str
    confidence: float

    def __post_init__(self):
        if not isinstance(self.text, str):
            raise ProtocolError("prediction text must be a string")
        bad = set(self.text) - ALLOWED_CHARS
        if bad:
            raise ProtocolError(f"backend emitted characters outside the digit alphabet: {sorted(bad)}")
        c = float(self.confidence)
        if not math.isfinite(c) or not 0.0 <= c <= 1.0:
            raise ProtocolError(f"confidence {self.confidence!r} is not a finite value in [0, 1]")
        object.__setattr__(self, "confidence", c)

    @property
    def sort_key(self) -> tuple:
        return (self.doc_id, self.column_name, self.row_index)


@dataclass(frozen=True)
class OcrFailure:
    """A cell the backend could not recognize; kept so batches never lose inputs."""

    doc_id: str
    column_name: str
    row_index: int
    error: str


class OcrBackend(Protocol):
    capabilities: dict

    def recognize_cell(self, cell: np.ndarray, key: str) -> tuple[str, float]: ...


def normalize_text(text: str) -> int:
    """Dollar value of a recognized string: separators stripped, blank means 0."""
    stripped = "".join(ch for ch in text if ch not in SEPARATORS)
    if not stripped:
        return 0
    if not stripped.isascii() or not stripped.isdigit():
        raise InvalidCharactersError(f"non-digit characters in {text!r}")
    return int(stripped, 10)


def normalize_prediction(pred) -> int:
    return normalize_text(pred.text if isinstance(pred, OcrPrediction) else str(pred))


def retained_count(n: int, retain_fraction: float) -> int:
    """ceil(retain_fraction * n), robust to binary rounding of the product."""
    if not 0.0 < retain_fraction <= 1.0:
        raise ValueError("retain_fraction must lie in (0, 1]")
    return min(n, int(math.ceil(retain_fraction * n - 1e-9)))


def confidence_filter(preds: Iterable[OcrPrediction], retain_fraction: float):
    """Split into (kept, dropped): the top ceil(f * n) by confidence.

    Ties in confidence fall back to (doc_id, column_name, row_index) order.
    """
    preds = list(preds)
    k = retained_count(len(preds), retain_fraction)
    ordered = sorted(preds, key=lambda p: (-p.confidence, p.sort_key))
    return ordered[:k], ordered[k:]


PREDICTION_FIELDS = ["doc_id", "column", "row", "text", "confidence", "value_dollars"]


def write_predictions_csv(path, preds: Iterable[OcrPrediction]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_FIELDS)
        for p in preds:
            w.writerow([p.doc_id, p.column_name, p.row_index, p.text, f"{p.confidence:.6f}", normalize_prediction(p)])


def read_predictions_csv(path) -> list[OcrPrediction]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [OcrPrediction(r["doc_id"], r["column"], int(r["row"]), r["text"], float(r["confidence"])) for r in rows]
