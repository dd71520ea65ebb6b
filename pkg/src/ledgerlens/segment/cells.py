"""Cell extraction: header-anchored single-cell crops and layout projection."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Protocol

import numpy as np
from scipy.signal import fftconvolve

from .. import glyphs
from ..errors import DegenerateQuadError, DimensionError, HeaderNotFoundError, SegmentationFailure
from ..imagecore import (
    apply_homography,
    as_gray,
    invert_homography,
    rectify_quad,
    validate_quad,
    write_png,
)
from .hough import HoughParams, hough_lines, line_intersections
from .layout import CellRegion, TemplateLayout, cell_key

DEFAULT_CELL_SIZE = (200, 64)
NCC_MIN_SCORE = 0.7


class Rect(NamedTuple):
    x: float
    y: float
    w: float
    h: float

    def translated(self, dx: float, dy: float) -> "Rect":
        return Rect(self.x + dx, self.y + dy, self.w, self.h)


class HeaderLocator(Protocol):
    def locate(self, img: np.ndarray, header_word: str) -> Rect: ...


def ncc_map(img: np.ndarray, patch: np.ndarray) -> np.ndarray:
    """Zero-mean normalized cross-correlation of ``patch`` at every valid offset.

    Flat windows score 0.
    """
    f = img.astype(np.float64)
    t = patch.astype(np.float64)
    t = t - t.mean()
    t_norm = math.sqrt((t * t).sum())
    ph, pw = t.shape
    if t_norm == 0 or f.shape[0] < ph or f.shape[1] < pw:
        return np.zeros((max(f.shape[0] - ph + 1, 0), max(f.shape[1] - pw + 1, 0)))
    num = fftconvolve(f, t[::-1, ::-1], mode="valid")
    ones = np.ones_like(t)
    s1 = fftconvolve(f, ones, mode="valid")
    s2 = fftconvolve(f * f, ones, mode="valid")
    var = np.maximum(s2 - s1 * s1 / t.size, 0.0)
    denom = np.sqrt(var) * t_norm
    flat = denom <= 1e-6 * t_norm * math.sqrt(t.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(flat, 0.0, num / denom)
    return np.clip(score, -1.0, 1.0)


@dataclass
class NccHeaderLocator:
    """Matches a rendered header word against the image by NCC.

    The patch is the word in the card font with ``margin`` pixels of paper
    around it; the reported rectangle excludes the margin.
    """

    scale: int = 3
    margin: int = 4
    min_score: float = NCC_MIN_SCORE
    ink: int = 20
    paper: int = 250

    def patch(self, header_word: str) -> np.ndarray:
        mask = glyphs.text_mask(header_word, self.scale)
        m = self.margin
        out = np.full((mask.shape[0] + 2 * m, mask.shape[1] + 2 * m), self.paper, dtype=np.uint8)
        out[m : m + mask.shape[0], m : m + mask.shape[1]][mask] = self.ink
        return out

    def locate(self, img, header_word: str) -> Rect:
        img = as_gray(img)
        patch = self.patch(header_word)
        score = ncc_map(img, patch)
        if score.size == 0:
            raise HeaderNotFoundError(f"image smaller than the {header_word!r} patch")
        k = int(np.argmax(score))
        y, x = divmod(k, score.shape[1])
        if score[y, x] < self.min_score:
            raise HeaderNotFoundError(f"best {header_word!r} match scored {score[y, x]:.3f} < {self.min_score}")
        m = self.margin
        return Rect(float(x + m), float(y + m), float(patch.shape[1] - 2 * m), float(patch.shape[0] - 2 * m))


@dataclass
class OcrHeaderLocator:
    """Delegates to a backend exposing ``word_boxes(img) -> [(text, (x, y, w, h)), ...]``."""

    backend: object

    def locate(self, img, header_word: str) -> Rect:
        if not getattr(self.backend, "capabilities", {}).get("word_boxes", False):
            raise HeaderNotFoundError("backend does not report word boxes")
        target = header_word.strip().upper()
        for text, box in self.backend.word_boxes(as_gray(img)):
            if str(text).strip().upper() == target:
                return Rect(*map(float, box))
        raise HeaderNotFoundError(f"backend reported no {header_word!r} box")


def locate_header(img, header_word: str, locator: HeaderLocator | None = None) -> Rect:
    if not header_word or not header_word.strip():
        raise ValueError("header_word must be non-empty")
    return (locator or NccHeaderLocator()).locate(img, header_word)


@dataclass
class FirstCell:
    region: CellRegion
    image: np.ndarray
    header: Rect


def first_cell_window(header: Rect, img_shape) -> tuple[int, int, int, int]:
    """Working window (x0, y0, x1, y1): 1.5x the header width centred on it,
    from the header top down to 6 header heights below its baseline."""
    rows, cols = img_shape
    cx = header.x + header.w / 2
    x0 = int(math.floor(cx - 0.75 * header.w))
    x1 = int(math.ceil(cx + 0.75 * header.w))
    y0 = int(math.floor(header.y))
    y1 = int(math.ceil(header.y + header.h + 6 * header.h))
    return max(0, x0), max(0, y0), min(cols, x1), min(rows, y1)


def extract_first_cell(img, header_word: str = "BUILDINGS", locator: HeaderLocator | None = None,
                       out_size: tuple[int, int] = DEFAULT_CELL_SIZE, doc_id: str = "",
                       hough_params: HoughParams | None = None) -> FirstCell:
    """Crop and rectify the first table cell under ``header_word``.

    The cell is bounded by the first two horizontal rules below the header
    baseline and the nearest vertical rules on either side of the header.
    """
    img = as_gray(img)
    header = locate_header(img, header_word, locator)
    x0, y0, x1, y1 = first_cell_window(header, img.shape)
    if x1 - x0 < 3 or y1 - y0 < 3:
        raise SegmentationFailure("working window is empty")
    lines = hough_lines(img[y0:y1, x0:x1], hough_params)
    hx0, hx1 = header.x - x0, header.x + header.w - x0
    base = header.y + header.h - y0
    cx, cy = (hx0 + hx1) / 2, header.y + header.h / 2 - y0

    def y_at(line, x):
        return (line.rho - x * math.cos(line.theta)) / math.sin(line.theta)

    def x_at(line, y):
        return (line.rho - y * math.sin(line.theta)) / math.cos(line.theta)

    below = sorted((l for l in lines if l.horizontal and y_at(l, cx) > base), key=lambda l: y_at(l, cx))
    left = [l for l in lines if not l.horizontal and x_at(l, cy) < hx0]
    right = [l for l in lines if not l.horizontal and x_at(l, cy) > hx1]
    if len(below) < 2 or not left or not right:
        raise SegmentationFailure(
            f"need 2 horizontal and 2 vertical rules around the header, found "
            f"{len(below)} below, {len(left)} left, {len(right)} right")
    left_line = max(left, key=lambda l: x_at(l, cy))
    right_line = min(right, key=lambda l: x_at(l, cy))
    grid = line_intersections(below[:2], [left_line, right_line])
    if np.isnan(grid).any():
        raise SegmentationFailure("rules do not intersect cleanly")
    quad = np.array([grid[0, 0], grid[0, 1], grid[1, 1], grid[1, 0]]) + [x0, y0]
    try:
        quad = validate_quad(quad)
        cell = rectify_quad(img, quad, out_size[0], out_size[1])
    except (DegenerateQuadError, DimensionError) as exc:
        raise SegmentationFailure(f"bad cell quad: {exc}") from exc
    region = CellRegion(doc_id, quad, header_word, 0)
    return FirstCell(region, cell, header)


def project_layout(layout: TemplateLayout, h, doc_id: str = "") -> list[CellRegion]:
    """Map every template cell into scan coordinates through the inverse of
    ``h`` (a scan-to-template homography)."""
    hinv = invert_homography(h)
    return [CellRegion(doc_id, apply_homography(hinv, c.quad()), c.column, c.row) for c in layout.cells]


def inset_quad(quad, px: float) -> np.ndarray:
    """Pull each corner ``px`` pixels towards the quad's centroid along both
    of its edges, trimming printed rules off a line-to-line cell."""
    q = np.asarray(quad, dtype=np.float64)
    out = q.copy()
    for i in range(4):
        for j in ((i + 1) % 4, (i + 3) % 4):
            d = q[j] - q[i]
            n = np.linalg.norm(d)
            if n > 0:
                out[i] += d / n * px
    return out


def rectify_regions(img, regions: Iterable[CellRegion], out_size=DEFAULT_CELL_SIZE,
                    inset: float = 0.0) -> dict[str, np.ndarray]:
    img = as_gray(img)
    out = {}
    for r in regions:
        q = inset_quad(r.quad, inset) if inset else r.quad
        out[r.key] = rectify_quad(img, q, out_size[0], out_size[1])
    return out


def write_cells(directory, cells: dict[str, np.ndarray]) -> list[Path]:
    directory = Path(directory)
    paths = []
    for key, cell in cells.items():
        p = directory / f"{key}.png"
        write_png(p, cell)
        paths.append(p)
    return paths


@dataclass
class SegmentationSummary:
    attempted: int = 0
    segmented: int = 0
    failed: int = 0
    failure_ids: list[str] | None = None

    def __post_init__(self):
        if self.failure_ids is None:
            self.failure_ids = []

    def record(self, doc_id: str, ok: bool) -> None:
        self.attempted += 1
        if ok:
            self.segmented += 1
        else:
            self.failed += 1
            self.failure_ids.append(doc_id)

    @property
    def success_rate(self) -> float:
        """Percent, rounded to one decimal."""
        return round(100.0 * self.segmented / self.attempted, 1) if self.attempted else 0.0

    def to_dict(self) -> dict:
        return {"attempted": self.attempted, "segmented": self.segmented,
                "failed": self.failed, "failure_ids": list(self.failure_ids)}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def segment_first_cells(docs: Iterable[tuple[str, np.ndarray]], header_word: str = "BUILDINGS",
                        locator: HeaderLocator | None = None, out_size=DEFAULT_CELL_SIZE):
    """Single-cell extraction over a batch. Returns ({doc_id: FirstCell}, summary)."""
    results = {}
    summary = SegmentationSummary()
    for doc_id, img in docs:
        try:
            results[doc_id] = extract_first_cell(img, header_word, locator, out_size, doc_id=doc_id)
            summary.record(doc_id, True)
        except (HeaderNotFoundError, SegmentationFailure):
            summary.record(doc_id, False)
    return results, summary


__all__ = [
    "Rect", "HeaderLocator", "NccHeaderLocator", "OcrHeaderLocator", "locate_header", "ncc_map",
    "FirstCell", "first_cell_window", "extract_first_cell", "project_layout", "inset_quad",
    "rectify_regions", "write_cells", "SegmentationSummary", "segment_first_cells", "cell_key",
]
