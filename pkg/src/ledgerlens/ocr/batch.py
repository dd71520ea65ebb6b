"""Recognition of single cells and ordered batches."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Iterable

import numpy as np

from ..errors import BackendUnavailableError, LedgerLensError, ProtocolError
from ..segment.layout import cell_key
from .core import OcrFailure, OcrPrediction


def recognize(backend, cell, doc_id: str = "", column_name: str = "", row_index: int = 0,
              key: str | None = None) -> OcrPrediction:
    """Run ``backend`` on one cell. ``key`` defaults to the cell's file stem."""
    cell = np.asarray(cell)
    if cell.size == 0:
        raise ValueError("cell image is empty")
    k = cell_key(doc_id, column_name, row_index) if key is None else key
    text, conf = backend.recognize_cell(cell, k)
    return OcrPrediction(doc_id, column_name, int(row_index), text, conf)


def _one(backend, item):
    (doc_id, column, row), img = item
    try:
        return recognize(backend, img, doc_id, column, row)
    except (LedgerLensError, KeyError, ValueError) as exc:
        return OcrFailure(doc_id, column, int(row), f"{type(exc).__name__}: {exc}")


def batch_recognize(backend, cells: Iterable, workers: int = 1) -> list:
    """Recognize ``((doc_id, column, row), image)`` items, preserving input order.

    Failures become OcrFailure entries in place; the batch never aborts.
    Threads are only used when the backend declares itself concurrent.
    """
    items = list(cells)
    concurrent = getattr(backend, "capabilities", {}).get("concurrent", False)
    if workers <= 1 or not concurrent or len(items) < 2:
        return [_one(backend, it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda it: _one(backend, it), items))


def split_results(results) -> tuple[list[OcrPrediction], list[OcrFailure]]:
    preds = [r for r in results if isinstance(r, OcrPrediction)]
    fails = [r for r in results if isinstance(r, OcrFailure)]
    return preds, fails


__all__ = ["recognize", "batch_recognize", "split_results", "BackendUnavailableError", "ProtocolError"]
