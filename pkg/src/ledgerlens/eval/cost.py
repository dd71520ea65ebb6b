"""Cost comparison of manual entry, scanning, and the two automated routes."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from ..errors import ParameterError


@dataclass(frozen=True)
class CostScenario:
    n_documents: int = 353_973
    entry_wage: float = 15.0
    labeled_per_hour_basis: tuple[int, float] = (12_423, 58.0)
    scan_quotes: tuple[float, ...] = (45_477.80, 25_663.04)
    quoted_n: int = 353_973
    dev_hours: float = 84.0
    dev_wage: float = 55.93
    n_training_labels: int = 12_423
    remote_cost_per_cell: float = 0.0002
    n_cells: int | None = None

    def __post_init__(self):
        n_lab, hours = self.labeled_per_hour_basis
        if n_lab <= 0 or hours <= 0:
            raise ParameterError("labeling basis needs a positive count and positive hours")
        if self.quoted_n <= 0:
            raise ParameterError("quoted_n must be positive")
        rates = (self.n_documents, self.entry_wage, self.dev_hours, self.dev_wage, self.n_training_labels,
                 self.remote_cost_per_cell, *self.scan_quotes)
        if any(r < 0 for r in rates):
            raise ParameterError("counts, rates and quotes must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CostScenario":
        d = dict(d)
        if "labeled_per_hour_basis" in d:
            d["labeled_per_hour_basis"] = tuple(d["labeled_per_hour_basis"])
        if "scan_quotes" in d:
            d["scan_quotes"] = tuple(d["scan_quotes"])
        return cls(**d)


REFERENCE_SCENARIO = CostScenario()


@dataclass(frozen=True)
class CostReport:
    per_doc_entry: float
    manual_entry_total: float
    per_doc_scan: float
    scan_total: float
    manual_scan_and_entry_total: float
    development: float
    ocr_labeling: float
    ocr_method_total: float
    regression_labeling: float
    regression_method_total: float
    remote_ocr_total: float
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        rows = [
            ("Manual entry, per document", self.per_doc_entry, 5),
            ("Manual entry, total", self.manual_entry_total, 2),
            ("Scanning, per document", self.per_doc_scan, 5),
            ("Scanning, total", self.scan_total, 2),
            ("Manual scan + entry, total", self.manual_scan_and_entry_total, 2),
            ("Model development", self.development, 2),
            ("OCR method, total", self.ocr_method_total, 2),
            ("Regression method, total", self.regression_method_total, 2),
            ("Remote OCR, total", self.remote_ocr_total, 2),
        ]
        w = max(len(r[0]) for r in rows)
        return "\n".join(f"{name.ljust(w)}  ${value:>14,.{dp}f}" for name, value, dp in rows)


def cost_estimate(s: CostScenario) -> CostReport:
    n_lab, hours = s.labeled_per_hour_basis
    per_entry = hours * s.entry_wage / n_lab
    per_scan = (sum(s.scan_quotes) / len(s.scan_quotes) / s.quoted_n) if s.scan_quotes else 0.0
    manual = s.n_documents * per_entry
    scan = s.n_documents * per_scan
    dev = s.dev_hours * s.dev_wage
    ocr_lab = s.n_training_labels * per_entry
    reg_lab = s.n_training_labels * (per_entry + per_scan)
    cells = s.n_documents if s.n_cells is None else s.n_cells
    return CostReport(per_entry, manual, per_scan, scan, manual + scan, dev, ocr_lab, dev + ocr_lab, reg_lab,
                      dev + reg_lab, cells * s.remote_cost_per_cell)
