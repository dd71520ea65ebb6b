"""Regression metrics on (prediction, truth) pairs and middle-90% trimming."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import DomainError, InsufficientDataError


@dataclass(frozen=True)
class MetricsReport:
    n: int
    r2: float | None
    mae: float
    mape: float
    rmspe: float
    mpe: float
    median_pe: float
    within_5: float
    within_10: float
    within_20: float
    trim_bounds: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trim_bounds"] = list(self.trim_bounds) if self.trim_bounds is not None else None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _split(pairs) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(pairs, dtype=np.float64)
    if a.size == 0:
        return np.empty(0), np.empty(0)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError("pairs must be a sequence of (prediction, truth)")
    return a[:, 0], a[:, 1]


def compute_metrics(pairs, trim_bounds=None) -> MetricsReport:
    """Percent-scaled error summaries of (prediction, truth) pairs.

    ``mpe`` is the mean signed percentage error and ``median_pe`` its
    median counterpart. R² is None when the truth has zero variance.
    """
    p, t = _split(pairs)
    if len(t) == 0:
        raise InsufficientDataError("no pairs to score")
    if np.any(t <= 0):
        raise DomainError("true values must be positive")
    rel = (p - t) / t
    arel = np.abs(rel)
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    r2 = None if ss_tot == 0.0 else 1.0 - float(np.sum((p - t) ** 2)) / ss_tot
    return MetricsReport(
        n=len(t),
        r2=r2,
        mae=float(np.mean(np.abs(p - t))),
        mape=float(np.mean(arel) * 100),
        rmspe=float(math.sqrt(np.mean(rel * rel)) * 100),
        mpe=float(np.mean(rel) * 100),
        median_pe=float(np.median(rel) * 100),
        within_5=float(np.mean(arel <= 0.05)),
        within_10=float(np.mean(arel <= 0.10)),
        within_20=float(np.mean(arel <= 0.20)),
        trim_bounds=None if trim_bounds is None else (float(trim_bounds[0]), float(trim_bounds[1])),
    )


def trim_middle_90(pairs, bounds=None):
    """Keep pairs whose truth lies in [P5, P95] of the truths (closed).

    Passing ``bounds`` skips the percentile step and reuses them.
    Returns (kept pairs array, (low, high)).
    """
    a = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
    if bounds is None:
        if len(a) < 20:
            raise InsufficientDataError(f"need at least 20 pairs to trim, got {len(a)}")
        lo, hi = np.percentile(a[:, 1], [5, 95])
        bounds = (float(lo), float(hi))
    keep = (a[:, 1] >= bounds[0]) & (a[:, 1] <= bounds[1])
    return a[keep], (float(bounds[0]), float(bounds[1]))


def metrics_full_and_trimmed(pairs) -> dict[str, MetricsReport]:
    """Both the full-set and the middle-90% report, labelled."""
    out = {"full": compute_metrics(pairs)}
    if len(pairs) >= 20:
        kept, b = trim_middle_90(pairs)
        out["middle_90"] = compute_metrics(kept, b)
    return out


_ROWS = (
    ("R2", "r2", "higher", lambda v: "n/a" if v is None else f"{v:.2f}"),
    ("MAE", "mae", "lower", lambda v: f"${v:,.2f}"),
    ("MAPE", "mape", "lower", lambda v: f"{v:.2f}%"),
    ("RMSPE", "rmspe", "lower", lambda v: f"{v:.2f}%"),
    ("MPE", "mpe", "lower", lambda v: f"{v:.2f}%"),
    ("Median PE", "median_pe", "lower", lambda v: f"{v:.2f}%"),
    ("Within 5%", "within_5", "higher", lambda v: f"{100 * v:.2f}%"),
    ("Within 10%", "within_10", "higher", lambda v: f"{100 * v:.2f}%"),
    ("Within 20%", "within_20", "higher", lambda v: f"{100 * v:.2f}%"),
    ("N", "n", "", lambda v: str(v)),
)


def format_metrics_table(reports: dict[str, MetricsReport]) -> str:
    """Metrics as rows, one column per named report."""
    names = list(reports)
    cells = [["Metric", *names]]
    for label, attr, better, fmt in _ROWS:
        head = f"{label} ({better} is better)" if better else label
        cells.append([head, *(fmt(getattr(reports[k], attr)) for k in names)])
    widths = [max(len(r[i]) for r in cells) for i in range(len(cells[0]))]
    lines = []
    for j, r in enumerate(cells):
        lines.append("  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(r)))
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
