from .backends import MockBackend, RateLimiter, RemoteBackend, RemoteOcrConfig, shared_limiter
from .batch import batch_recognize, recognize, split_results
from .builtin import GlyphCorrelationBackend
from .core import (
    OcrBackend,
    OcrFailure,
    OcrPrediction,
    confidence_filter,
    normalize_prediction,
    normalize_text,
    read_predictions_csv,
    retained_count,
    write_predictions_csv,
)

__all__ = [
    "MockBackend", "RateLimiter", "RemoteBackend", "RemoteOcrConfig", "shared_limiter",
    "batch_recognize", "recognize", "split_results", "GlyphCorrelationBackend",
    "OcrBackend", "OcrFailure", "OcrPrediction", "confidence_filter", "normalize_prediction",
    "normalize_text", "read_predictions_csv", "retained_count", "write_predictions_csv",
]
