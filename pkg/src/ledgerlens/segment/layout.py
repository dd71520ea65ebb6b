"""Fixed card layout: named cell rectangles in template coordinates."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ..errors import SchemaError


class LayoutCell(NamedTuple):
    column: str
    row: int
    x: float
    y: float
    w: float
    h: float

    def quad(self) -> np.ndarray:
        return np.array([[self.x, self.y], [self.x + self.w, self.y],
                         [self.x + self.w, self.y + self.h], [self.x, self.y + self.h]], dtype=np.float64)


class CellRegion(NamedTuple):
    doc_id: str
    quad: np.ndarray
    column_name: str
    row_index: int

    @property
    def key(self) -> str:
        return cell_key(self.doc_id, self.column_name, self.row_index)


def cell_key(doc_id: str, column: str, row: int) -> str:
    return f"{doc_id}_{column}_{row}"


@dataclass(frozen=True)
class TemplateLayout:
    width: int
    height: int
    cells: tuple[LayoutCell, ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(LayoutCell(*c) for c in self.cells))
        self.validate()

    def validate(self) -> None:
        seen = set()
        for c in self.cells:
            key = (c.column, c.row)
            if key in seen:
                raise SchemaError(f"duplicate layout cell {key}")
            seen.add(key)
            if c.w <= 0 or c.h <= 0 or c.row < 0:
                raise SchemaError(f"cell {key} has non-positive size or negative row")
            if c.x < 0 or c.y < 0 or c.x + c.w > self.width or c.y + c.h > self.height:
                raise SchemaError(f"cell {key} leaves the template bounds")
        boxes = sorted(self.cells, key=lambda c: c.x)
        for i, a in enumerate(boxes):
            for b in boxes[i + 1 :]:
                if b.x >= a.x + a.w:
                    break
                if min(a.y + a.h, b.y + b.h) > max(a.y, b.y):
                    raise SchemaError(f"cells {(a.column, a.row)} and {(b.column, b.row)} overlap")

    def cell(self, column: str, row: int) -> LayoutCell:
        for c in self.cells:
            if c.column == column and c.row == row:
                return c
        raise KeyError((column, row))

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "cells": [{"column": c.column, "row": c.row, "x": c.x, "y": c.y, "w": c.w, "h": c.h} for c in self.cells],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TemplateLayout":
        try:
            cells = [LayoutCell(str(c["column"]), int(c["row"]), float(c["x"]), float(c["y"]), float(c["w"]), float(c["h"]))
                     for c in d["cells"]]
            return cls(int(d["width"]), int(d["height"]), tuple(cells))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed layout: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "TemplateLayout":
        return cls.from_dict(json.loads(Path(path).read_text()))
