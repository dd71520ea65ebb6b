"""Glyph-bank recognizer for the card font.

Each connected ink component of a cell is size-normalized and compared to a
bank of rendered digits by zero-mean normalized cross-correlation. It reads
the synthetic fixtures reliably; it is not a handwriting model.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .. import glyphs
from ..imagecore import as_gray

NORM_W = 16
NORM_H = 24
_EIGHT = np.ones((3, 3), dtype=bool)


def ink_mask(cell: np.ndarray, min_contrast: float = 50.0) -> np.ndarray:
    """Thresholded ink; all-False when the cell has no real contrast.

    Contrast and threshold come from a median-filtered copy so isolated
    impulse noise neither fakes ink nor shifts the cut, while the mask itself
    is taken from the raw pixels to keep thin diagonal joints intact.
    """
    f = ndimage.median_filter(cell, size=3, mode="nearest").astype(np.float64)
    paper = float(np.median(f))
    dark = float(np.percentile(f, 0.5))
    if paper - dark < min_contrast:
        return np.zeros(cell.shape, dtype=bool)
    return cell < (paper + dark) / 2.0


def _normalize(mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    z = ndimage.zoom(mask.astype(np.float64), (NORM_H / h, NORM_W / w), order=1, mode="nearest", grid_mode=True)
    z = z[:NORM_H, :NORM_W]
    if z.shape != (NORM_H, NORM_W):
        z = np.pad(z, ((0, NORM_H - z.shape[0]), (0, NORM_W - z.shape[1])), mode="edge")
    z = z - z.mean()
    n = np.sqrt((z * z).sum())
    return z / n if n > 0 else z


def _shear(mask: np.ndarray, s: float) -> np.ndarray:
    h, w = mask.shape
    pad = int(np.ceil(abs(s) * h)) + 1
    out = np.zeros((h, w + 2 * pad), dtype=bool)
    for r in range(h):
        off = pad + int(round(s * (h / 2 - r)))
        out[r, off : off + w] = mask[r]
    cols = np.flatnonzero(out.any(axis=0))
    return out[:, cols[0] : cols[-1] + 1]


def components(mask: np.ndarray, min_area: int = 12, min_height_ratio: float = 0.45):
    """Character-like ink groups left to right, as (bounding slices, mask) pairs.

    Specks, anything touching the cell border (rule remnants) and long thin
    strokes are dropped. Pieces that overlap horizontally are merged into one
    character, then groups shorter than ``min_height_ratio`` of the tallest
    are discarded.
    """
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        return []
    rows, cols = mask.shape
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    pieces = []
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None or areas[i] < min_area:
            continue
        y0, y1, x0, x1 = sl[0].start, sl[0].stop, sl[1].start, sl[1].stop
        h, w = y1 - y0, x1 - x0
        if y0 == 0 or x0 == 0 or y1 == rows or x1 == cols:
            continue
        if w > 0.5 * cols or h > 0.9 * rows or (max(h, w) > 8 * min(h, w) and h < 0.25 * rows):
            continue
        pieces.append([x0, x1, y0, y1, [i]])
    pieces.sort(key=lambda p: (p[0], p[1]))
    groups = []
    for p in pieces:
        if groups:
            g = groups[-1]
            overlap = min(g[1], p[1]) - max(g[0], p[0])
            if overlap > 0.3 * min(g[1] - g[0], p[1] - p[0]):
                g[0], g[1] = min(g[0], p[0]), max(g[1], p[1])
                g[2], g[3] = min(g[2], p[2]), max(g[3], p[3])
                g[4].extend(p[4])
                continue
        groups.append(list(p[:4]) + [list(p[4])])
    if not groups:
        return []
    tallest = max(g[3] - g[2] for g in groups)
    out = []
    for x0, x1, y0, y1, ids in groups:
        if y1 - y0 < min_height_ratio * tallest:
            continue
        sl = (slice(y0, y1), slice(x0, x1))
        out.append((sl, np.isin(labels[sl], ids)))
    return out


class GlyphCorrelationBackend:
    """Recognizes digit strings in the card font by NCC against a glyph bank."""

    capabilities = {"recognize_cell": True, "word_boxes": False, "concurrent": True}

    def __init__(self, scale: int = 3, shears=(-0.1, 0.0, 0.1), alphabet: str = glyphs.DIGITS):
        self.alphabet = alphabet
        bank, labels = [], []
        for ch in alphabet:
            base = glyphs.glyph_mask(ch, scale)
            variants = [base, ndimage.binary_dilation(base, structure=np.ones((2, 2), dtype=bool))]
            for v in variants:
                for s in shears:
                    m = _shear(v, s) if s else v
                    bank.append(_normalize(self._as_rendered(m)))
                    labels.append(ch)
        self._bank = np.stack(bank).reshape(len(bank), -1)
        self._labels = np.array(labels)

    @staticmethod
    def _as_rendered(mask: np.ndarray) -> np.ndarray:
        """Pass a clean glyph through the same preprocessing as a cell."""
        pad = 6
        img = np.full((mask.shape[0] + 2 * pad, mask.shape[1] + 2 * pad), 250, dtype=np.uint8)
        img[pad:-pad, pad:-pad][mask] = 20
        ink = ink_mask(img)
        ys, xs = np.nonzero(ink)
        return ink[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1]

    def read(self, cell) -> tuple[str, float, list[float]]:
        """(text, confidence, per-character scores)."""
        cell = as_gray(cell)
        comps = components(ink_mask(cell))
        if not comps:
            return "", 0.0, []
        chars, scores = [], []
        for _, m in comps:
            ys, xs = np.nonzero(m)
            v = _normalize(m[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1]).ravel()
            s = self._bank @ v
            k = int(np.argmax(s))
            chars.append(str(self._labels[k]))
            scores.append(float(max(s[k], 0.0)))
        sc = np.array(scores)
        conf = 0.0 if (sc <= 0).any() else float(np.exp(np.log(sc).mean()))
        return "".join(chars), min(conf, 1.0), scores

    def recognize_cell(self, cell, key: str = "") -> tuple[str, float]:
        text, conf, _ = self.read(cell)
        return text, conf
