"""Label augmentation from OCR output and the cross-county moment adjustment."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ..errors import InsufficientDataError, ParameterError
from ..ingest.clean import normalize_parcel_id
from ..ocr.core import OcrPrediction, normalize_prediction, retained_count


@dataclass(frozen=True)
class OcrLabel:
    parcel_id: str
    value_dollars: int
    confidence: float


@dataclass(frozen=True)
class TrainingLabel:
    parcel_id: str
    value_dollars: int
    source: str
    confidence: float | None = None


def ocr_labels_from_predictions(preds: Iterable[OcrPrediction]) -> list[OcrLabel]:
    """One label per prediction, parcel id taken from the document id."""
    return [OcrLabel(normalize_parcel_id(p.doc_id), normalize_prediction(p), p.confidence) for p in preds]


def augment_training(hand: Mapping[str, int], ocr: Iterable[OcrLabel], confidence_retain: float = 1.0) -> list[TrainingLabel]:
    """Hand labels plus the most confident OCR labels.

    OCR labels are ranked by confidence (ties by parcel id) and the top
    ceil(f * n) kept; zero values are then excluded. Hand labels win any
    parcel collision.
    """
    ocr = list(ocr)
    k = retained_count(len(ocr), confidence_retain)
    ranked = sorted(ocr, key=lambda o: (-o.confidence, o.parcel_id))[:k]
    out = [TrainingLabel(pid, int(v), "hand") for pid, v in hand.items() if v > 0]
    seen = set(hand)
    for o in ranked:
        if o.value_dollars <= 0 or o.parcel_id in seen:
            continue
        seen.add(o.parcel_id)
        out.append(TrainingLabel(o.parcel_id, int(o.value_dollars), "ocr", o.confidence))
    return out


@dataclass(frozen=True)
class AdjustmentParams:
    mu_source: float
    sigma_source: float
    mu_target: float
    sigma_target: float
    target_sample_n: int = 100

    def __post_init__(self):
        if not self.sigma_source > 0:
            raise ParameterError("sigma_source must be positive")
        if not self.sigma_target > 0:
            raise ParameterError("sigma_target must be positive")

    def inverse(self) -> "AdjustmentParams":
        return AdjustmentParams(self.mu_target, self.sigma_target, self.mu_source, self.sigma_source,
                                self.target_sample_n)


def adjust_distribution(predictions, p: AdjustmentParams) -> np.ndarray:
    """Standardize against the source moments, rescale to the target moments."""
    y = np.asarray(predictions, dtype=np.float64)
    if p.mu_source == p.mu_target and p.sigma_source == p.sigma_target:
        return y.copy()
    return (y - p.mu_source) / p.sigma_source * p.sigma_target + p.mu_target


def estimate_moments(sample) -> tuple[float, float]:
    """Mean and n-1 standard deviation."""
    s = np.asarray(sample, dtype=np.float64).ravel()
    if len(s) < 2:
        raise InsufficientDataError("need at least two values for a standard deviation")
    return float(s.mean()), float(s.std(ddof=1))


def sample_target_moments(values, n: int = 100, seed: int = 0) -> tuple[float, float]:
    """Moments of a seeded random sample of ``n`` target-county values."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) < n:
        raise InsufficientDataError(f"need {n} values to sample, got {len(v)}")
    pick = np.random.default_rng(seed).choice(len(v), size=n, replace=False)
    return estimate_moments(v[pick])
