"""Rendered property-card fixtures with exact ground truth.

A card is the blank template (printed title, labelled fields and a valuation
table) with digit strings stamped into table cells, then warped onto a
slightly larger scan canvas and degraded with noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import glyphs
from ..imagecore import apply_homography, homography_from_points, warp_perspective
from ..segment.layout import LayoutCell, TemplateLayout

PAPER = 250
INK = 20


@dataclass(frozen=True)
class CardDesign:
    """Geometry of the printed card. ``layout()`` exposes the data cells."""

    width: int = 1000
    height: int = 660
    title: str = "PROPERTY VALUATION RECORD"
    table_x: int = 40
    table_y: int = 220
    columns: tuple[tuple[str, int], ...] = (
        ("NO", 60), ("YEAR", 110), ("LAND", 180), ("BUILDINGS", 190), ("TOTAL", 190), ("REMARKS", 190),
    )
    data_columns: tuple[str, ...] = ("YEAR", "LAND", "BUILDINGS", "TOTAL")
    header_height: int = 40
    row_height: int = 36
    n_rows: int = 10
    glyph_scale: int = 3
    label_scale: int = 2
    rule: int = 2
    frame: int = 3

    def column_edges(self) -> list[int]:
        xs = [self.table_x]
        for _, w in self.columns:
            xs.append(xs[-1] + w)
        return xs

    def row_edges(self) -> list[int]:
        ys = [self.table_y, self.table_y + self.header_height]
        for _ in range(self.n_rows):
            ys.append(ys[-1] + self.row_height)
        return ys

    def header_rect(self, column: str) -> tuple[int, int, int, int]:
        xs = self.column_edges()
        names = [c for c, _ in self.columns]
        i = names.index(column)
        w, h = glyphs.text_size(column, self.glyph_scale)
        x = xs[i] + (xs[i + 1] - xs[i] - w) // 2
        y = self.table_y + (self.header_height - h) // 2
        return x, y, w, h

    def layout(self) -> TemplateLayout:
        xs = self.column_edges()
        ys = self.row_edges()
        names = [c for c, _ in self.columns]
        cells = []
        for name in self.data_columns:
            i = names.index(name)
            for r in range(self.n_rows):
                cells.append(LayoutCell(name, r, float(xs[i]), float(ys[r + 1]),
                                        float(xs[i + 1] - xs[i]), float(ys[r + 2] - ys[r + 1])))
        return TemplateLayout(self.width, self.height, tuple(cells))


DEFAULT_DESIGN = CardDesign()

_FIELDS = (("OWNER", 40, 84), ("STREET", 40, 118), ("BOOK", 40, 152), ("PLAT", 250, 152),
           ("PARCEL", 460, 152), ("WARD", 40, 186), ("LOT NO", 250, 186), ("DEED", 460, 186),
           ("DISTRICT", 700, 84), ("CLASS", 700, 118), ("ACRES", 700, 152), ("FRONT FT", 700, 186))


def render_template(design: CardDesign = DEFAULT_DESIGN) -> np.ndarray:
    """The blank reference card."""
    img = np.full((design.height, design.width), PAPER, dtype=np.uint8)
    glyphs.draw_text(img, design.title, design.table_x, 24, 4, INK)
    ls = design.label_scale
    for label, x, y in _FIELDS:
        _, _, w, h = glyphs.draw_text(img, label, x, y, ls, INK)
        img[y + h + 2 : y + h + 3, x + w + 8 : x + w + 170] = INK
    xs = design.column_edges()
    ys = design.row_edges()
    x0, x1, y0, y1 = xs[0], xs[-1], ys[0], ys[-1]
    for y in ys[1:-1]:
        img[y : y + design.rule, x0:x1] = INK
    for x in xs[1:-1]:
        img[y0:y1, x : x + design.rule] = INK
    f = design.frame
    img[y0 : y0 + f, x0 : x1 + f] = INK
    img[y1 : y1 + f, x0 : x1 + f] = INK
    img[y0 : y1 + f, x0 : x0 + f] = INK
    img[y0 : y1 + f, x1 : x1 + f] = INK
    for name, _ in design.columns:
        x, y, _, _ = design.header_rect(name)
        glyphs.draw_text(img, name, x, y, design.glyph_scale, INK)
    for r in range(design.n_rows):
        label = str(r + 1)
        w, h = glyphs.text_size(label, ls)
        cx = xs[0] + (xs[1] - xs[0] - w) // 2
        cy = ys[r + 1] + (design.row_height - h) // 2 + 1
        glyphs.draw_text(img, label, cx, cy, ls, INK)
    return img


@dataclass
class CardSpec:
    """Everything needed to render one card deterministically.

    Warp fields are envelopes: the actual rotation, corner jitter and shift
    are drawn from ``seed`` within them.
    """

    seed: int
    contents: dict[tuple[str, int], str]
    design: CardDesign = DEFAULT_DESIGN
    doc_id: str = ""
    max_rotation_deg: float = 0.0
    perspective_jitter: float = 0.0
    max_translation: float = 0.0
    pad: int = 40
    salt_pepper: float = 0.0
    gradient: float = 0.0
    noise_sigma: float = 0.0
    perturb_glyphs: bool = True

    def __post_init__(self):
        for (col, row), text in self.contents.items():
            if text and not text.isdigit():
                raise ValueError(f"cell {(col, row)} content must be digits or blank, got {text!r}")
        if not 0.0 <= self.salt_pepper < 1.0 or self.perspective_jitter < 0 or self.max_rotation_deg < 0:
            raise ValueError("noise and warp envelopes must be non-negative")


def random_contents(rng: np.random.Generator, design: CardDesign = DEFAULT_DESIGN) -> dict[tuple[str, int], str]:
    """Plausible valuation history: YEAR, LAND, BUILDINGS, TOTAL per filled row."""
    n_filled = int(rng.integers(1, design.n_rows + 1))
    out = {}
    year = 33
    for r in range(design.n_rows):
        if r < n_filled:
            land = int(rng.integers(100, 9999))
            building = int(rng.integers(300, 40000)) if rng.random() < 0.25 else int(rng.integers(300, 9999))
            blank_year = r == 0 and rng.random() < 0.5
            out[("YEAR", r)] = "" if blank_year else str(year)
            out[("LAND", r)] = str(land)
            out[("BUILDINGS", r)] = str(building)
            out[("TOTAL", r)] = str(land + building)
            year += int(rng.integers(1, 5))
        else:
            for c in design.data_columns:
                out[(c, r)] = ""
    return {k: v for k, v in out.items() if k[0] in design.data_columns}


def random_card_spec(seed: int, doc_id: str | None = None, **envelopes) -> CardSpec:
    rng = np.random.default_rng([seed, 0xCA4D])
    design = envelopes.pop("design", DEFAULT_DESIGN)
    contents = random_contents(rng, design)
    return CardSpec(seed=seed, contents=contents, design=design,
                    doc_id=doc_id if doc_id is not None else f"card{seed:05d}", **envelopes)


def _stamp_digits(img, text, cell: LayoutCell, scale, rng, perturb):
    masks = [glyphs.perturbed_glyph(ch, scale, rng) if perturb else glyphs.glyph_mask(ch, scale) for ch in text]
    gap = scale
    total_w = sum(m.shape[1] for m in masks) + gap * (len(masks) - 1)
    glyph_h = max(m.shape[0] for m in masks)
    margin_x = 10
    slack = int(cell.w) - total_w - 2 * margin_x
    x = int(cell.x) + margin_x + (int(rng.integers(0, slack + 1)) if slack > 0 else 0)
    y_base = int(cell.y) + (int(cell.h) - glyph_h) // 2 + 1
    ink = int(rng.integers(0, 60))
    for m in masks:
        jitter = int(rng.integers(-1, 2)) if perturb else 0
        y = y_base + jitter
        region = img[y : y + m.shape[0], x : x + m.shape[1]]
        region[m[: region.shape[0], : region.shape[1]]] = ink
        x += m.shape[1] + gap


def _card_warp(spec: CardSpec, rng: np.random.Generator) -> np.ndarray:
    """Homography from template coordinates onto the scan canvas."""
    d = spec.design
    w, h = d.width, d.height
    corners = np.array([[0, 0], [w, 0], [w, h], [0, h]], dtype=np.float64)
    theta = np.deg2rad(rng.uniform(-spec.max_rotation_deg, spec.max_rotation_deg))
    c, s = np.cos(theta), np.sin(theta)
    centre = np.array([w / 2.0, h / 2.0])
    moved = (corners - centre) @ np.array([[c, s], [-s, c]]) + centre
    moved += rng.uniform(-spec.perspective_jitter, spec.perspective_jitter, size=(4, 2)) * w
    moved += rng.uniform(-spec.max_translation, spec.max_translation, size=2)
    moved += spec.pad
    return homography_from_points(corners, moved)


def render_card(spec: CardSpec) -> tuple[np.ndarray, dict]:
    """Render ``spec`` to a scan image plus its ground-truth record.

    The record carries the template-to-scan homography and every data cell's
    post-warp quad and content string.
    """
    rng = np.random.default_rng([spec.seed, 0x5CA2])
    d = spec.design
    layout = d.layout()
    img = render_template(d)
    for cell in layout.cells:
        text = spec.contents.get((cell.column, cell.row), "")
        if text:
            _stamp_digits(img, text, cell, d.glyph_scale, rng, spec.perturb_glyphs)

    g = _card_warp(spec, rng)
    out_w, out_h = d.width + 2 * spec.pad, d.height + 2 * spec.pad
    scan = warp_perspective(img, g, out_w, out_h).astype(np.float64)

    if spec.gradient > 0:
        angle = rng.uniform(0, 2 * np.pi)
        yy, xx = np.mgrid[0:out_h, 0:out_w]
        ramp = (np.cos(angle) * xx / out_w + np.sin(angle) * yy / out_h)
        ramp = (ramp - ramp.min()) / max(np.ptp(ramp), 1e-9)
        scan *= 1.0 - spec.gradient * ramp
    if spec.noise_sigma > 0:
        scan += rng.normal(0.0, spec.noise_sigma, size=scan.shape)
    scan = np.clip(np.floor(scan + 0.5), 0, 255).astype(np.uint8)
    if spec.salt_pepper > 0:
        u = rng.random(scan.shape)
        scan[u < spec.salt_pepper / 2] = 0
        scan[(u >= spec.salt_pepper / 2) & (u < spec.salt_pepper)] = 255

    cells = []
    for cell in layout.cells:
        q = apply_homography(g, cell.quad())
        cells.append({"column": cell.column, "row": cell.row,
                      "text": spec.contents.get((cell.column, cell.row), ""),
                      "quad": np.round(q, 6).tolist()})
    hx, hy, hw, hh = d.header_rect("BUILDINGS")
    truth = {
        "doc_id": spec.doc_id,
        "seed": spec.seed,
        "template_to_scan": [float(v) for v in g.ravel()],
        "scan_size": [out_w, out_h],
        "header_rect": apply_homography(g, [[hx, hy], [hx + hw, hy + hh]]).round(6).tolist(),
        "cells": cells,
    }
    return scan, truth


def render_cell_text(text: str, width: int = 200, height: int = 64, scale: int = 3, salt_pepper: float = 0.0,
                     seed: int = 0, perturb: bool = False) -> np.ndarray:
    """A lone cell image with ``text`` stamped left-of-centre, for OCR fixtures."""
    rng = np.random.default_rng([seed, 0xCE11])
    img = np.full((height, width), PAPER, dtype=np.uint8)
    if text:
        _stamp_digits(img, text, LayoutCell("cell", 0, 0.0, 0.0, float(width), float(height)), scale, rng, perturb)
    if salt_pepper > 0:
        u = rng.random(img.shape)
        img[u < salt_pepper / 2] = 0
        img[(u >= salt_pepper / 2) & (u < salt_pepper)] = 255
    return img
