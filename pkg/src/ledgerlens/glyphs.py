"""A 5x7 dot-matrix font used for printed card text and digit stamping.

The same bitmaps seed the built-in recognizer's glyph bank, which keeps the
synthetic fixtures and the OCR backend consistent without any font files.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

_FONT_ROWS = {
    "0": [".XXX.", "X...X", "X..XX", "X.X.X", "XX..X", "X...X", ".XXX."],
    "1": ["..X..", ".XX..", "..X..", "..X..", "..X..", "..X..", ".XXX."],
    "2": [".XXX.", "X...X", "....X", "...X.", "..X..", ".X...", "XXXXX"],
    "3": ["XXXXX", "...X.", "..X..", "...X.", "....X", "X...X", ".XXX."],
    "4": ["...X.", "..XX.", ".X.X.", "X..X.", "XXXXX", "...X.", "...X."],
    "5": ["XXXXX", "X....", "XXXX.", "....X", "....X", "X...X", ".XXX."],
    "6": ["..XX.", ".X...", "X....", "XXXX.", "X...X", "X...X", ".XXX."],
    "7": ["XXXXX", "....X", "...X.", "..X..", ".X...", ".X...", ".X..."],
    "8": [".XXX.", "X...X", "X...X", ".XXX.", "X...X", "X...X", ".XXX."],
    "9": [".XXX.", "X...X", "X...X", ".XXXX", "....X", "...X.", ".XX.."],
    "A": [".XXX.", "X...X", "X...X", "XXXXX", "X...X", "X...X", "X...X"],
    "B": ["XXXX.", "X...X", "X...X", "XXXX.", "X...X", "X...X", "XXXX."],
    "C": [".XXX.", "X...X", "X....", "X....", "X....", "X...X", ".XXX."],
    "D": ["XXX..", "X..X.", "X...X", "X...X", "X...X", "X..X.", "XXX.."],
    "E": ["XXXXX", "X....", "X....", "XXXX.", "X....", "X....", "XXXXX"],
    "F": ["XXXXX", "X....", "X....", "XXXX.", "X....", "X....", "X...."],
    "G": [".XXX.", "X...X", "X....", "X.XXX", "X...X", "X...X", ".XXXX"],
    "H": ["X...X", "X...X", "X...X", "XXXXX", "X...X", "X...X", "X...X"],
    "I": [".XXX.", "..X..", "..X..", "..X..", "..X..", "..X..", ".XXX."],
    "J": ["..XXX", "...X.", "...X.", "...X.", "...X.", "X..X.", ".XX.."],
    "K": ["X...X", "X..X.", "X.X..", "XX...", "X.X..", "X..X.", "X...X"],
    "L": ["X....", "X....", "X....", "X....", "X....", "X....", "XXXXX"],
    "M": ["X...X", "XX.XX", "X.X.X", "X.X.X", "X...X", "X...X", "X...X"],
    "N": ["X...X", "X...X", "XX..X", "X.X.X", "X..XX", "X...X", "X...X"],
    "O": [".XXX.", "X...X", "X...X", "X...X", "X...X", "X...X", ".XXX."],
    "P": ["XXXX.", "X...X", "X...X", "XXXX.", "X....", "X....", "X...."],
    "Q": [".XXX.", "X...X", "X...X", "X...X", "X.X.X", "X..X.", ".XX.X"],
    "R": ["XXXX.", "X...X", "X...X", "XXXX.", "X.X..", "X..X.", "X...X"],
    "S": [".XXXX", "X....", "X....", ".XXX.", "....X", "....X", "XXXX."],
    "T": ["XXXXX", "..X..", "..X..", "..X..", "..X..", "..X..", "..X.."],
    "U": ["X...X", "X...X", "X...X", "X...X", "X...X", "X...X", ".XXX."],
    "V": ["X...X", "X...X", "X...X", "X...X", "X...X", ".X.X.", "..X.."],
    "W": ["X...X", "X...X", "X...X", "X.X.X", "X.X.X", "X.X.X", ".X.X."],
    "X": ["X...X", "X...X", ".X.X.", "..X..", ".X.X.", "X...X", "X...X"],
    "Y": ["X...X", "X...X", ".X.X.", "..X..", "..X..", "..X..", "..X.."],
    "Z": ["XXXXX", "....X", "...X.", "..X..", ".X...", "X....", "XXXXX"],
    "$": ["..X..", ".XXXX", "X.X..", ".XXX.", "..X.X", "XXXX.", "..X.."],
    ",": [".....", ".....", ".....", ".....", ".XX..", "..X..", ".X..."],
    ".": [".....", ".....", ".....", ".....", ".....", ".XX..", ".XX.."],
    "-": [".....", ".....", ".....", "XXXXX", ".....", ".....", "....."],
    "/": ["....X", "....X", "...X.", "..X..", ".X...", "X....", "X...."],
    ":": [".....", ".XX..", ".XX..", ".....", ".XX..", ".XX..", "....."],
    "#": [".X.X.", ".X.X.", "XXXXX", ".X.X.", "XXXXX", ".X.X.", ".X.X."],
    " ": [".....", ".....", ".....", ".....", ".....", ".....", "....."],
}

GLYPH_W = 5
GLYPH_H = 7
DIGITS = "0123456789"

FONT: dict[str, np.ndarray] = {
    ch: np.array([[c == "X" for c in row] for row in rows], dtype=bool)
    for ch, rows in _FONT_ROWS.items()
}


def glyph_mask(ch: str, scale: int = 1) -> np.ndarray:
    """Boolean ink mask of one character at integer ``scale``."""
    try:
        base = FONT[ch.upper()]
    except KeyError:
        raise ValueError(f"no glyph for {ch!r}") from None
    if scale == 1:
        return base.copy()
    return np.kron(base, np.ones((scale, scale), dtype=bool))


def advance(scale: int) -> int:
    return (GLYPH_W + 1) * scale


def text_size(text: str, scale: int) -> tuple[int, int]:
    """(width, height) in pixels of ``text`` rendered at ``scale``."""
    if not text:
        return 0, GLYPH_H * scale
    return len(text) * advance(scale) - scale, GLYPH_H * scale


def text_mask(text: str, scale: int) -> np.ndarray:
    w, h = text_size(text, scale)
    mask = np.zeros((h, w), dtype=bool)
    step = advance(scale)
    for i, ch in enumerate(text):
        g = glyph_mask(ch, scale)
        mask[:, i * step : i * step + g.shape[1]] |= g
    return mask


def draw_text(img: np.ndarray, text: str, x: int, y: int, scale: int, ink: int = 0) -> tuple[int, int, int, int]:
    """Stamp ``text`` into ``img`` in place at top-left (x, y).

    Returns the tight bounding rectangle (x, y, w, h) of the drawn text.
    """
    m = text_mask(text, scale)
    h, w = m.shape
    region = img[y : y + h, x : x + w]
    region[m[: region.shape[0], : region.shape[1]]] = ink
    return x, y, w, h


def perturbed_glyph(ch: str, scale: int, rng: np.random.Generator, thicken: bool | None = None) -> np.ndarray:
    """A glyph mask with a random stroke-thickness change and slight shear.

    Emulates the typed/handwritten mix of real cards at desk scale; it is not
    a handwriting model.
    """
    m = glyph_mask(ch, scale)
    if thicken is None:
        thicken = bool(rng.random() < 0.3)
    if thicken:
        m = ndimage.binary_dilation(m, structure=np.ones((2, 2), dtype=bool))
    shear = rng.uniform(-0.12, 0.12)
    if abs(shear) > 0.02:
        h, w = m.shape
        pad = int(np.ceil(abs(shear) * h)) + 1
        out = np.zeros((h, w + 2 * pad), dtype=bool)
        for r in range(h):
            off = pad + int(round(shear * (h / 2 - r)))
            out[r, off : off + w] = m[r]
        cols = np.flatnonzero(out.any(axis=0))
        m = out[:, cols[0] : cols[-1] + 1]
    return m
