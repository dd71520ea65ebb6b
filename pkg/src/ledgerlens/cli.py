"""Command-line entry point: ``ledgerlens <command> [options]``.

Settings resolve in this order, later winning: built-in defaults, the TOML
``--config`` file (top level, then the command's own table), environment
variables named ``LEDGERLENS_<OPTION>``, then command-line flags.

Exit codes: 0 success, 1 some documents failed, 2 bad configuration or input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import threading
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, LedgerLensError

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

log = logging.getLogger("ledgerlens")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2
ENV_PREFIX = "LEDGERLENS_"


class _Opt:
    def __init__(self, default=None, type=str, help="", choices=None, flag=False):
        self.default, self.type, self.help, self.choices, self.flag = default, type, help, choices, flag


def _ints(s):
    return [int(v) for v in str(s).split(",") if v.strip()]


COMMON = {
    "seed": _Opt(0, int, "master seed"),
    "workers": _Opt(0, int, "worker threads (0 = available cores)"),
    "out": _Opt(None, str, "output directory"),
}

COMMANDS: dict[str, dict[str, _Opt]] = {
    "synth cards": {
        "n": _Opt(50, int, "number of cards"),
        "rotation": _Opt(2.0, float, "max rotation, degrees"),
        "jitter": _Opt(0.01, float, "perspective corner jitter as a fraction of width"),
        "translation": _Opt(20.0, float, "max translation, pixels"),
        "noise": _Opt(4.0, float, "Gaussian noise sigma, grey levels"),
        "salt_pepper": _Opt(0.002, float, "salt-and-pepper fraction"),
        "gradient": _Opt(0.15, float, "brightness gradient amplitude"),
        "clean": _Opt(False, bool, "no warp and no noise", flag=True),
    },
    "synth parcels": {
        "n": _Opt(1000, int, "number of parcels"),
        "county": _Opt("hamilton", str, "source layout", ("hamilton", "franklin")),
        "mechanism": _Opt("MAR", str, "missing-card mechanism", ("MAR", "shifted")),
        "missing_fraction": _Opt(0.25, float, "share of parcels without a card"),
        "noise_frac": _Opt(0.10, float, "label noise sigma as a fraction of the mean value"),
        "value_scale": _Opt(1.0, float, "multiplier on every value"),
    },
    "align": {
        "in": _Opt(None, str, "directory of scan PNGs"),
        "template": _Opt(None, str, "blank template PNG"),
        "match_retain": _Opt(0.05, float, "fraction of matches kept by distance"),
        "min_inliers": _Opt(15, int, "inliers needed to accept"),
        "max_error": _Opt(6.0, float, "reprojection error bound, pixels"),
        "schedule": _Opt("5000,7000,10000", str, "feature counts per attempt"),
    },
    "segment": {
        "in": _Opt(None, str, "directory of scan PNGs"),
        "format": _Opt("single-cell", str, "card format", ("single-cell", "comprehensive")),
        "alignments": _Opt(None, str, "alignments.jsonl from the align command (comprehensive)"),
        "layout": _Opt(None, str, "template layout JSON (comprehensive)"),
        "header": _Opt("BUILDINGS", str, "header word above the wanted cell (single-cell)"),
        "cell_width": _Opt(200, int, "output cell width"),
        "cell_height": _Opt(0, int, "output cell height (0 = format default)"),
        "inset": _Opt(4.0, float, "pixels trimmed off each cell edge (comprehensive)"),
    },
    "ocr": {
        "cells": _Opt(None, str, "directory of cell PNGs named <doc>_<column>_<row>.png"),
        "backend": _Opt("builtin", str, "recognizer", ("builtin", "remote")),
        "endpoint": _Opt(None, str, "remote OCR base URL"),
        "rate_limit": _Opt(5.0, float, "remote requests per second"),
        "timeout": _Opt(10.0, float, "remote timeout, seconds"),
        "max_retries": _Opt(3, int, "remote retries"),
        "retain": _Opt(1.0, float, "fraction of most confident predictions kept"),
    },
    "pipeline": {
        "in": _Opt(None, str, "directory of scan PNGs"),
        "template": _Opt(None, str, "blank template PNG (comprehensive)"),
        "layout": _Opt(None, str, "template layout JSON (comprehensive)"),
        "format": _Opt("comprehensive", str, "card format", ("single-cell", "comprehensive")),
        "header": _Opt("BUILDINGS", str, "header word (single-cell)"),
        "backend": _Opt("builtin", str, "recognizer", ("builtin", "remote")),
        "endpoint": _Opt(None, str, "remote OCR base URL"),
        "rate_limit": _Opt(5.0, float, "remote requests per second"),
        "timeout": _Opt(10.0, float, "remote timeout, seconds"),
        "max_retries": _Opt(3, int, "remote retries"),
        "retain": _Opt(1.0, float, "fraction of most confident predictions kept"),
        "cell_width": _Opt(200, int, "output cell width"),
        "cell_height": _Opt(0, int, "output cell height (0 = format default)"),
        "inset": _Opt(4.0, float, "pixels trimmed off each cell edge (comprehensive)"),
        "truth": _Opt(None, str, "ground-truth JSON directory to score against"),
        "save_cells": _Opt(False, bool, "write rectified cell PNGs", flag=True),
    },
    "ingest": {
        "features": _Opt(None, str, "raw features CSV"),
        "labels": _Opt(None, str, "labels CSV"),
        "county": _Opt("hamilton", str, "source of the features file"),
        "tier": _Opt("all", str, "feature tier", ("all", "shared")),
        "test_fraction": _Opt(0.2, float, "held-out share"),
    },
    "train": {
        "train": _Opt(None, str, "training design-matrix CSV"),
        "encoder": _Opt(None, str, "encoder sidecar JSON"),
        "learner": _Opt("forest", str, "model family", ("forest", "tree", "linear")),
        "preset": _Opt("desk", str, "hyper-parameter preset", ("desk", "table4")),
        "n_estimators": _Opt(None, int, "override tree count"),
        "max_depth": _Opt(None, int, "override depth limit"),
        "min_samples_split": _Opt(None, int, "override split minimum"),
        "max_features": _Opt(None, str, "override candidate rule: sqrt, all or a fraction"),
    },
    "grid-search": {
        "train": _Opt(None, str, "training design-matrix CSV"),
        "k": _Opt(5, int, "folds"),
        "n_estimators": _Opt("100", str, "comma-separated values"),
        "max_depth": _Opt("200", str, "comma-separated values"),
        "min_samples_split": _Opt("4", str, "comma-separated values"),
        "max_features": _Opt("sqrt", str, "comma-separated values"),
    },
    "predict": {
        "model": _Opt(None, str, "model JSON"),
        "matrix": _Opt(None, str, "design-matrix CSV"),
    },
    "adjust": {
        "predictions": _Opt(None, str, "predictions CSV with parcel_id,prediction"),
        "mu_source": _Opt(None, float, "source mean"),
        "sigma_source": _Opt(None, float, "source standard deviation"),
        "mu_target": _Opt(None, float, "target mean"),
        "sigma_target": _Opt(None, float, "target standard deviation"),
        "source_labels": _Opt(None, str, "labels CSV for the source moments"),
        "target_labels": _Opt(None, str, "labels CSV sampled for the target moments"),
        "sample_n": _Opt(100, int, "target sample size"),
    },
    "evaluate": {
        "predictions": _Opt(None, str, "CSV with prediction and truth columns"),
    },
    "audit-bias": {
        "predictions": _Opt(None, str, "CSV with parcel_id, prediction and truth"),
        "parcel_tracts": _Opt(None, str, "parcel_id,tract_id CSV"),
        "tracts": _Opt(None, str, "tract variables CSV"),
    },
    "audit-mar": {
        "features": _Opt(None, str, "raw features CSV of every parcel"),
        "labels": _Opt(None, str, "labels CSV (parcels with a card)"),
        "county": _Opt("hamilton", str, "source of the features file"),
        "method": _Opt("normal", str, "p-value method", ("normal", "permutation")),
        "permutations": _Opt(100, int, "permutations for the permutation method"),
        "n_estimators": _Opt(200, int, "trees in the classifier forest"),
    },
    "cost": {
        "preset": _Opt("paper-appendix-h", str, "scenario preset", ("paper-appendix-h",)),
        "n_documents": _Opt(None, int, "override document count"),
        "n_cells": _Opt(None, int, "override remote OCR cell count"),
    },
}


# ---------------------------------------------------------------- settings


def _coerce(value, opt: _Opt, source: str):
    if value is None:
        return None
    try:
        if opt.type is bool:
            if isinstance(value, bool):
                return value
            s = str(value).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off", ""):
                return False
            raise ValueError(s)
        v = opt.type(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{source}: cannot read {value!r} as {opt.type.__name__}") from None
    if opt.choices and v not in opt.choices:
        raise ConfigError(f"{source}: {v!r} is not one of {list(opt.choices)}")
    return v


def load_config(path) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} not found")
    try:
        return tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from None


def resolve_settings(command: str, flags: dict, config: dict, environ=None) -> dict:
    environ = os.environ if environ is None else environ
    opts = {**COMMON, **COMMANDS[command]}
    section = config.get(command.replace(" ", "-"), config.get(command, {}))
    if not isinstance(section, dict):
        raise ConfigError(f"config table [{command}] must be a table")
    known = set(opts) | {k.replace("_", "-") for k in opts}
    for k in section:
        if k not in known:
            raise ConfigError(f"unknown setting {k!r} in config table [{command}]")
    out = {}
    for name, opt in opts.items():
        v = opt.default
        for src_name, src in (("config", config), (f"config [{command}]", section)):
            for key in (name, name.replace("_", "-")):
                if key in src and not isinstance(src[key], dict):
                    v = _coerce(src[key], opt, f"{src_name} {key}")
        env_key = ENV_PREFIX + name.upper()
        if env_key in environ:
            v = _coerce(environ[env_key], opt, f"environment {env_key}")
        if flags.get(name) is not None:
            v = _coerce(flags[name], opt, f"--{name.replace('_', '-')}")
        out[name] = v
    return out


def config_hash(command: str, settings: dict) -> str:
    """Hash of the effective settings; where the output goes is not part of it."""
    kept = {k: v for k, v in settings.items() if k != "out"}
    blob = json.dumps({"command": command, **kept}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _require(s: dict, *names):
    for n in names:
        if s.get(n) in (None, ""):
            raise ConfigError(f"--{n.replace('_', '-')} is required")


def _workers(s: dict) -> int:
    from .model.forest import default_workers

    return s["workers"] if s["workers"] and s["workers"] > 0 else default_workers()


def doc_seed(seed: int, doc_id: str) -> int:
    """Per-document seed from the master seed and the document id."""
    return int(np.random.SeedSequence([int(seed), zlib.crc32(doc_id.encode())]).generate_state(1)[0])


# ---------------------------------------------------------------- manifest and event log


class EventLog:
    """Structured per-document events, one JSON object per line."""

    def __init__(self, path=None):
        self._fh = Path(path).open("a") if path else None
        self._lock = threading.Lock()

    def emit(self, event: str, **fields) -> None:
        if self._fh is None:
            return
        rec = {"ts": round(time.time(), 3), "event": event, **fields}
        with self._lock:
            self._fh.write(json.dumps(rec, default=str) + "\n")
            self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int
    inputs: dict = field(default_factory=dict)
    stages: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    wall_time_s: float = 0.0

    def stage(self, name: str, inputs: int, succeeded: int, failed: int | None = None, dropped: int = 0) -> None:
        """Record stage counts; ``dropped`` items were removed on purpose, not lost."""
        failed = inputs - succeeded - dropped if failed is None else failed
        if inputs != succeeded + failed + dropped:
            raise ValueError(f"stage {name}: {inputs} inputs != {succeeded} + {failed} + {dropped}")
        self.stages[name] = {"inputs": inputs, "succeeded": succeeded, "failed": failed}
        if dropped:
            self.stages[name]["dropped"] = dropped

    @property
    def any_failed(self) -> bool:
        return any(v["failed"] for v in self.stages.values())

    def add(self, path) -> Path:
        self.artifacts.append(str(path))
        return Path(path)

    def to_dict(self) -> dict:
        return {"command": self.command, "config_hash": self.config_hash, "seed": self.seed,
                "inputs": self.inputs, "stages": self.stages, "wall_time_s": round(self.wall_time_s, 3),
                "artifacts": self.artifacts, **({"extra": self.extra} if self.extra else {})}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, default=str) + "\n")


@dataclass
class Context:
    command: str
    s: dict
    out: Path
    manifest: RunManifest
    events: EventLog


def _scans(directory) -> list[tuple[str, Path]]:
    d = Path(directory)
    if not d.is_dir():
        raise ConfigError(f"input directory {d} not found")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() in (".png", ".tif", ".tiff"))
    return [(p.stem, p) for p in files]


def _map_docs(fn, items, workers):
    if workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- synth


def cmd_synth_cards(ctx: Context) -> None:
    from .imagecore import write_png
    from .synth.cards import DEFAULT_DESIGN, random_card_spec, render_card, render_template

    s = ctx.s
    if s["n"] < 1:
        raise ConfigError("--n must be >= 1")
    env = {} if s["clean"] else {
        "max_rotation_deg": s["rotation"], "perspective_jitter": s["jitter"], "max_translation": s["translation"],
        "noise_sigma": s["noise"], "salt_pepper": s["salt_pepper"], "gradient": s["gradient"],
    }
    cards, truth_dir = ctx.out / "cards", ctx.out / "truth"
    cards.mkdir(parents=True, exist_ok=True)
    truth_dir.mkdir(parents=True, exist_ok=True)
    write_png(ctx.manifest.add(ctx.out / "template.png"), render_template(DEFAULT_DESIGN))
    DEFAULT_DESIGN.layout().save(ctx.manifest.add(ctx.out / "layout.json"))

    def one(i):
        doc_id = f"card{i:05d}"
        scan, truth = render_card(random_card_spec(doc_seed(s["seed"], doc_id), doc_id, **env))
        write_png(cards / f"{doc_id}.png", scan)
        (truth_dir / f"{doc_id}.json").write_text(json.dumps(truth, indent=1) + "\n")
        ctx.events.emit("rendered", doc_id=doc_id)
        return doc_id

    done = _map_docs(one, list(range(s["n"])), _workers(s))
    ctx.manifest.inputs["cards"] = s["n"]
    ctx.manifest.stage("render", s["n"], len(done))
    ctx.manifest.artifacts += [str(cards), str(truth_dir)]


def cmd_synth_parcels(ctx: Context) -> None:
    from .synth.parcels import SynthParcelSpec, generate_parcels

    s = ctx.s
    try:
        spec = SynthParcelSpec(seed=s["seed"], n=s["n"], county=s["county"], mechanism=s["mechanism"],
                               missing_fraction=s["missing_fraction"], noise_frac=s["noise_frac"],
                               value_scale=s["value_scale"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    data = generate_parcels(spec)
    paths = data.write(ctx.out)
    for p in paths.values():
        ctx.manifest.add(p)
    ctx.manifest.inputs["parcels"] = s["n"]
    ctx.manifest.stage("generate", s["n"], s["n"])
    ctx.manifest.extra["with_card"] = int(data.has_card.sum())


# ---------------------------------------------------------------- align / segment / ocr


def _policy(s: dict):
    from .align import AlignmentPolicy

    try:
        return AlignmentPolicy(feature_counts=tuple(_ints(s.get("schedule", "5000,7000,10000"))),
                               retain_fraction=s.get("match_retain", 0.05),
                               min_inliers=s.get("min_inliers", 15), max_reprojection_error=s.get("max_error", 6.0),
                               seed=s["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _align_all(ctx: Context, docs, template_path, policy) -> dict:
    from .align import Aligner
    from .imagecore import read_image

    aligner = Aligner(read_image(template_path), policy)

    def one(item):
        doc_id, path = item
        try:
            res = aligner.align(read_image(path), seed=doc_seed(ctx.s["seed"], doc_id))
        except LedgerLensError as exc:
            ctx.events.emit("align", doc_id=doc_id, status="error", error=str(exc))
            return doc_id, None
        ctx.events.emit("align", doc_id=doc_id, status=res.status, inliers=res.inlier_count,
                        attempts=res.attempts_used)
        return doc_id, res

    return dict(_map_docs(one, docs, _workers(ctx.s)))


def cmd_align(ctx: Context) -> None:
    s = ctx.s
    _require(s, "in", "template")
    docs = _scans(s["in"])
    results = _align_all(ctx, docs, s["template"], _policy(s))
    path = ctx.manifest.add(ctx.out / "alignments.jsonl")
    ok = 0
    with path.open("w") as fh:
        for doc_id, _ in docs:
            res = results[doc_id]
            if res is None:
                rec = {"doc_id": doc_id, "status": "error", "h": None, "inliers": 0, "mean_err": None, "attempts": 0}
            else:
                rec = res.to_record(doc_id)
                ok += res.aligned
            fh.write(json.dumps(rec) + "\n")
    ctx.manifest.inputs["scans"] = len(docs)
    ctx.manifest.stage("align", len(docs), ok)


def _load_alignments(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"alignments file {p} not found")
    out = {}
    for line in p.read_text().splitlines():
        if line.strip():
            rec = json.loads(line)
            out[rec["doc_id"]] = rec
    return out


def _cell_size(s: dict) -> tuple[int, int]:
    default_h = 64 if s["format"] == "single-cell" else 40
    return s["cell_width"], s["cell_height"] or default_h


def _segment_docs(ctx: Context, docs, alignment: dict | None, layout) -> tuple[list, dict]:
    """Rectified cells as ((doc, column, row), image) in document order, plus
    per-document failure reasons."""
    from .errors import HeaderNotFoundError, SegmentationFailure
    from .imagecore import read_image
    from .segment import extract_first_cell, project_layout, rectify_regions

    s = ctx.s
    size = _cell_size(s)

    def one(item):
        doc_id, path = item
        try:
            img = read_image(path)
            if s["format"] == "single-cell":
                fc = extract_first_cell(img, s["header"], out_size=size, doc_id=doc_id)
                cells = [((doc_id, s["header"], 0), fc.image)]
            else:
                rec = alignment.get(doc_id)
                if rec is None or rec.get("status") != "aligned":
                    raise SegmentationFailure("card not aligned")
                h = np.array(rec["h"], dtype=np.float64).reshape(3, 3)
                regions = project_layout(layout, h, doc_id)
                imgs = rectify_regions(img, regions, size, s["inset"])
                cells = [((doc_id, r.column_name, r.row_index), imgs[r.key]) for r in regions]
        except (HeaderNotFoundError, SegmentationFailure, LedgerLensError) as exc:
            ctx.events.emit("segment", doc_id=doc_id, status="failed", error=str(exc))
            return doc_id, None, f"{type(exc).__name__}: {exc}"
        ctx.events.emit("segment", doc_id=doc_id, status="ok", cells=len(cells))
        return doc_id, cells, None

    cells, failures = [], {}
    for doc_id, got, err in _map_docs(one, docs, _workers(s)):
        if got is None:
            failures[doc_id] = err
        else:
            cells.extend(got)
    return cells, failures


def _load_layout(path):
    from .segment import TemplateLayout

    if not path or not Path(path).is_file():
        raise ConfigError(f"layout file {path} not found")
    return TemplateLayout.load(path)


def _write_cell_pngs(directory: Path, cells) -> None:
    from .imagecore import write_png
    from .segment import cell_key

    directory.mkdir(parents=True, exist_ok=True)
    for (doc, col, row), img in cells:
        write_png(directory / f"{cell_key(doc, col, row)}.png", img)


def _write_failures(path: Path, failures: list[tuple[str, str, str]]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "stage", "reason"])
        w.writerows(failures)


def cmd_segment(ctx: Context) -> None:
    s = ctx.s
    _require(s, "in")
    docs = _scans(s["in"])
    alignment, layout = None, None
    if s["format"] == "comprehensive":
        _require(s, "alignments", "layout")
        alignment, layout = _load_alignments(s["alignments"]), _load_layout(s["layout"])
    cells, failures = _segment_docs(ctx, docs, alignment, layout)
    _write_cell_pngs(ctx.out / "cells", cells)
    ctx.manifest.artifacts.append(str(ctx.out / "cells"))
    summary = {"attempted": len(docs), "segmented": len(docs) - len(failures), "failed": len(failures),
               "failure_ids": sorted(failures), "cells": len(cells)}
    (ctx.out / "segmentation.json").write_text(json.dumps(summary, indent=2) + "\n")
    ctx.manifest.add(ctx.out / "segmentation.json")
    _write_failures(ctx.manifest.add(ctx.out / "failures.csv"),
                    [(d, "segment", r) for d, r in sorted(failures.items())])
    ctx.manifest.inputs["scans"] = len(docs)
    ctx.manifest.stage("segment", len(docs), len(docs) - len(failures))


def _backend(s: dict):
    from .ocr import GlyphCorrelationBackend, RemoteBackend, RemoteOcrConfig

    if s["backend"] == "builtin":
        return GlyphCorrelationBackend()
    _require(s, "endpoint")
    try:
        cfg = RemoteOcrConfig(s["endpoint"], timeout=s["timeout"], max_retries=s["max_retries"],
                              rate_limit=s["rate_limit"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RemoteBackend(cfg)


def _recognize_and_filter(ctx: Context, cells) -> tuple[list, list]:
    """OCR, normalize and confidence-filter; writes both prediction CSVs."""
    from .errors import InvalidCharactersError
    from .ocr import (OcrPrediction, batch_recognize, confidence_filter, normalize_prediction, split_results,
                      write_predictions_csv)

    s = ctx.s
    if not 0.0 < s["retain"] <= 1.0:
        raise ConfigError("--retain must lie in (0, 1]")
    backend = _backend(s)
    results = batch_recognize(backend, cells, _workers(s))
    preds, fails = split_results(results)
    good, bad = [], [(f"{f.doc_id}/{f.column_name}/{f.row_index}", "ocr", f.error) for f in fails]
    for p in preds:
        try:
            normalize_prediction(p)
            good.append(p)
        except InvalidCharactersError as exc:
            bad.append((f"{p.doc_id}/{p.column_name}/{p.row_index}", "normalize", str(exc)))
    for r in results:
        ok = isinstance(r, OcrPrediction)
        ctx.events.emit("ocr", doc_id=r.doc_id, column=r.column_name, row=r.row_index,
                        status="ok" if ok else "failed", **({"text": r.text, "confidence": round(r.confidence, 6)}
                                                              if ok else {"error": r.error}))
    kept, _ = confidence_filter(good, s["retain"])
    kept = sorted(kept, key=lambda p: p.sort_key)
    write_predictions_csv(ctx.manifest.add(ctx.out / "predictions_all.csv"), good)
    write_predictions_csv(ctx.manifest.add(ctx.out / "predictions.csv"), kept)
    ctx.manifest.stage("ocr", len(cells), len(preds))
    ctx.manifest.stage("normalize", len(preds), len(good))
    ctx.manifest.stage("filter", len(good), len(kept), 0, len(good) - len(kept))
    ctx.manifest.extra["retain"] = s["retain"]
    return good, bad


def _parse_cell_name(stem: str) -> tuple[str, str, int]:
    parts = stem.rsplit("_", 2)
    if len(parts) != 3 or not parts[2].isdigit():
        raise ConfigError(f"cell file {stem!r} is not named <doc>_<column>_<row>")
    return parts[0], parts[1], int(parts[2])


def cmd_ocr(ctx: Context) -> None:
    from .imagecore import read_image

    s = ctx.s
    _require(s, "cells")
    files = _scans(s["cells"])
    cells = [(_parse_cell_name(stem), read_image(p)) for stem, p in files]
    _, bad = _recognize_and_filter(ctx, cells)
    _write_failures(ctx.manifest.add(ctx.out / "failures.csv"), bad)
    ctx.manifest.inputs["cells"] = len(cells)


def _truth_check(truth_dir, preds, only=None) -> dict:
    """Exact-value agreement with ground truth. ``only`` = (column, row)
    restricts the truth set to one cell per card."""
    from .ocr import normalize_prediction

    d = Path(truth_dir)
    want = {}
    for p in sorted(d.glob("*.json")):
        t = json.loads(p.read_text())
        for c in t["cells"]:
            if only is not None and (c["column"], int(c["row"])) != only:
                continue
            want[(t["doc_id"], c["column"], int(c["row"]))] = int(c["text"]) if c["text"] else 0
    compared = exact = 0
    for p in preds:
        key = (p.doc_id, p.column_name, p.row_index)
        if key in want:
            compared += 1
            exact += normalize_prediction(p) == want[key]
    return {"truth_cells": len(want), "compared": compared, "exact": exact,
            "exact_rate": exact / len(want) if want else 0.0}


def cmd_pipeline(ctx: Context) -> None:
    s = ctx.s
    _require(s, "in")
    docs = _scans(s["in"])
    ctx.manifest.inputs["scans"] = len(docs)
    failures: list[tuple[str, str, str]] = []
    alignment, layout = None, None
    if s["format"] == "comprehensive":
        _require(s, "template", "layout")
        layout = _load_layout(s["layout"])
        results = _align_all(ctx, docs, s["template"], _policy(s))
        alignment = {d: (r.to_record(d) if r is not None else {"doc_id": d, "status": "error"})
                     for d, r in results.items()}
        with ctx.manifest.add(ctx.out / "alignments.jsonl").open("w") as fh:
            for d, _ in docs:
                fh.write(json.dumps(alignment[d]) + "\n")
        n_al = sum(1 for d, _ in docs if alignment[d]["status"] == "aligned")
        ctx.manifest.stage("align", len(docs), n_al)
        failures += [(d, "align", alignment[d]["status"]) for d, _ in docs if alignment[d]["status"] != "aligned"]
        seg_docs = [(d, p) for d, p in docs if alignment[d]["status"] == "aligned"]
    else:
        seg_docs = docs
    cells, seg_fail = _segment_docs(ctx, seg_docs, alignment, layout)
    ctx.manifest.stage("segment", len(seg_docs), len(seg_docs) - len(seg_fail))
    failures += [(d, "segment", r) for d, r in sorted(seg_fail.items())]
    if s["save_cells"]:
        _write_cell_pngs(ctx.out / "cells", cells)
        ctx.manifest.artifacts.append(str(ctx.out / "cells"))
    ctx.manifest.extra["cells"] = len(cells)
    good, bad = _recognize_and_filter(ctx, cells)
    failures += bad
    _write_failures(ctx.manifest.add(ctx.out / "failures.csv"), failures)
    if s["truth"]:
        ctx.manifest.extra["truth_check"] = _truth_check(s["truth"], good, (s["header"], 0) if s["format"] == "single-cell" else None)


# ---------------------------------------------------------------- ingest / model


def _ingest_records(features, labels, county, schema):
    from .ingest import attach_labels, clean_records, load_features_csv, load_labels_csv

    for p in (features, labels):
        if p and not Path(p).is_file():
            raise ConfigError(f"input file {p} not found")
    raw = load_features_csv(features, county)
    labs = load_labels_csv(labels) if labels else {}
    return raw, clean_records(attach_labels(raw, labs), schema)


def cmd_ingest(ctx: Context) -> None:
    from .ingest import default_schema, fit_encoder, harmonize, train_test_split

    s = ctx.s
    _require(s, "features", "labels")
    schema = default_schema()
    raw, recs = _ingest_records(s["features"], s["labels"], s["county"], schema)
    if s["tier"] == "shared":
        recs = harmonize(recs, schema, "shared")
        schema = schema.tier("shared")
    labeled = [r for r in recs if r.label is not None]
    unlabeled = [r for r in recs if r.label is None]
    train, test = train_test_split(labeled, s["test_fraction"], s["seed"])
    enc = fit_encoder(train, schema)
    enc.transform(train).save_csv(ctx.manifest.add(ctx.out / "train.csv"))
    enc.transform(test).save_csv(ctx.manifest.add(ctx.out / "test.csv"))
    if unlabeled:
        enc.transform(unlabeled, with_target=False).save_csv(ctx.manifest.add(ctx.out / "unlabeled.csv"))
    enc.save_sidecar(ctx.manifest.add(ctx.out / "encoder.json"))
    ctx.manifest.inputs["records"] = len(raw)
    ctx.manifest.stage("clean", len(raw), len(recs), 0, len(raw) - len(recs))
    ctx.manifest.extra.update({"labeled": len(labeled), "unlabeled": len(unlabeled),
                               "train": len(train), "test": len(test)})


def _load_matrix(path, sidecar=None):
    from .ingest import DesignMatrix

    if not path or not Path(path).is_file():
        raise ConfigError(f"design matrix {path} not found")
    return DesignMatrix.load_csv(path, sidecar)


def _hyperparams(s: dict):
    from .model import preset

    over = {k: s[k] for k in ("n_estimators", "max_depth", "min_samples_split") if s.get(k) is not None}
    if s.get("max_features") is not None:
        mf = s["max_features"]
        over["max_features"] = mf if mf in ("sqrt", "all") else float(mf)
    try:
        return preset(s["preset"], seed=s["seed"], **over)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_train(ctx: Context) -> None:
    from .model import LinearBaseline, feature_importances, fit_forest

    s = ctx.s
    _require(s, "train")
    sidecar = json.loads(Path(s["encoder"]).read_text()) if s["encoder"] else None
    m = _load_matrix(s["train"], sidecar)
    if m.target is None:
        raise ConfigError(f"{s['train']} has no target column")
    path = ctx.out / "model.json"
    if s["learner"] == "linear":
        lb = LinearBaseline().fit(m)
        path.write_text(json.dumps({"schema_version": 1, "kind": "linear", "columns": list(m.columns),
                                    "coef": [float(c) for c in lb.coef]}) + "\n")
    else:
        hp = _hyperparams(s)
        if s["learner"] == "tree":
            from .model import HyperParams

            hp = HyperParams(**{**hp.to_dict(), "n_estimators": 1, "bootstrap": False})
        forest = fit_forest(m, hp, workers=_workers(s))
        if sidecar:
            forest.medians = dict(sidecar.get("medians", {}))
        forest.save(path)
        imp = feature_importances(forest)
        ctx.manifest.add(ctx.out / "importances.json").write_text(
            json.dumps(dict(sorted(imp.items(), key=lambda kv: -kv[1])), indent=2) + "\n")
        ctx.manifest.extra["hyperparams"] = hp.to_dict()
    ctx.manifest.add(path)
    ctx.manifest.inputs["rows"] = m.n
    ctx.manifest.stage("fit", 1, 1)


def cmd_grid_search(ctx: Context) -> None:
    from .model import HyperParams, grid_search, write_grid_csv

    s = ctx.s
    _require(s, "train")
    m = _load_matrix(s["train"])
    if m.target is None:
        raise ConfigError(f"{s['train']} has no target column")
    try:
        mfs = [v if v in ("sqrt", "all") else float(v) for v in str(s["max_features"]).split(",") if v.strip()]
        grid = [HyperParams(n_estimators=a, max_depth=b, min_samples_split=c, max_features=d, seed=s["seed"])
                for a in _ints(s["n_estimators"]) for b in _ints(s["max_depth"])
                for c in _ints(s["min_samples_split"]) for d in mfs]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    best, table = grid_search(m, grid, k=s["k"], seed=s["seed"], workers=_workers(s))
    write_grid_csv(ctx.manifest.add(ctx.out / "grid.csv"), table)
    ctx.manifest.add(ctx.out / "best.json").write_text(json.dumps(best.to_dict(), indent=2) + "\n")
    ctx.manifest.inputs["rows"] = m.n
    ctx.manifest.stage("grid", len(grid), len(grid))


def load_model(path):
    from .model import RandomForest

    if not path or not Path(path).is_file():
        raise ConfigError(f"model file {path} not found")
    d = json.loads(Path(path).read_text())
    if d.get("kind") == "linear":
        if d.get("schema_version") != 1:
            raise ConfigError("unsupported model schema_version")
        coef = np.array(d["coef"])
        cols = tuple(d["columns"])

        class _Linear:
            columns = cols

            def predict(self, m):
                from .errors import SchemaError

                if tuple(m.columns) != cols:
                    raise SchemaError("design-matrix columns do not match the trained model")
                return coef[0] + m.values @ coef[1:]

        return _Linear()
    return RandomForest.from_dict(d)


def _write_value_csv(path: Path, ids, pred, truth=None, extra: dict | None = None) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["parcel_id", "prediction"] + (["truth"] if truth is not None else []) + list(extra or {})
        w.writerow(cols)
        for i, pid in enumerate(ids):
            row = [pid, repr(float(pred[i]))]
            if truth is not None:
                row.append(repr(float(truth[i])))
            row += [repr(float(v[i])) for v in (extra or {}).values()]
            w.writerow(row)


def _read_value_csv(path) -> dict[str, np.ndarray | list]:
    if not path or not Path(path).is_file():
        raise ConfigError(f"predictions file {path} not found")
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "prediction" not in rows[0] or "parcel_id" not in rows[0]:
        raise ConfigError(f"{path}: expected parcel_id and prediction columns")
    out = {"parcel_id": [r["parcel_id"] for r in rows]}
    for k in rows[0]:
        if k != "parcel_id":
            out[k] = np.array([float(r[k]) for r in rows])
    return out


def cmd_predict(ctx: Context) -> None:
    s = ctx.s
    _require(s, "model", "matrix")
    model = load_model(s["model"])
    m = _load_matrix(s["matrix"])
    pred = model.predict(m)
    _write_value_csv(ctx.manifest.add(ctx.out / "predictions.csv"), m.row_ids, pred, m.target)
    ctx.manifest.inputs["rows"] = m.n
    ctx.manifest.stage("predict", m.n, m.n)


def cmd_adjust(ctx: Context) -> None:
    from .ingest import load_labels_csv
    from .model import AdjustmentParams, adjust_distribution, estimate_moments, sample_target_moments

    s = ctx.s
    _require(s, "predictions")
    data = _read_value_csv(s["predictions"])
    mu_s, sd_s, mu_t, sd_t = s["mu_source"], s["sigma_source"], s["mu_target"], s["sigma_target"]
    if mu_s is None or sd_s is None:
        if s["source_labels"]:
            mu_s, sd_s = estimate_moments([l.value_dollars for l in load_labels_csv(s["source_labels"]).values()])
        else:
            mu_s, sd_s = estimate_moments(data["prediction"])
    if mu_t is None or sd_t is None:
        _require(s, "target_labels")
        vals = [l.value_dollars for l in load_labels_csv(s["target_labels"]).values()]
        mu_t, sd_t = sample_target_moments(vals, s["sample_n"], s["seed"])
    try:
        p = AdjustmentParams(mu_s, sd_s, mu_t, sd_t, s["sample_n"])
    except LedgerLensError as exc:
        raise ConfigError(str(exc)) from None
    adj = adjust_distribution(data["prediction"], p)
    extra = {"prediction_raw": data["prediction"]}
    _write_value_csv(ctx.manifest.add(ctx.out / "adjusted.csv"), data["parcel_id"], adj, data.get("truth"), extra)
    ctx.manifest.extra["params"] = {"mu_source": mu_s, "sigma_source": sd_s, "mu_target": mu_t, "sigma_target": sd_t}
    n = len(adj)
    ctx.manifest.inputs["rows"] = n
    ctx.manifest.stage("adjust", n, n)


def cmd_evaluate(ctx: Context) -> None:
    from .eval import format_metrics_table, metrics_full_and_trimmed

    s = ctx.s
    _require(s, "predictions")
    data = _read_value_csv(s["predictions"])
    if "truth" not in data:
        raise ConfigError(f"{s['predictions']}: no truth column to evaluate against")
    pairs = np.column_stack([data["prediction"], data["truth"]])
    reports = metrics_full_and_trimmed(pairs)
    ctx.manifest.add(ctx.out / "metrics.json").write_text(
        json.dumps({k: v.to_dict() for k, v in reports.items()}, indent=2) + "\n")
    text = format_metrics_table(reports)
    ctx.manifest.add(ctx.out / "metrics.txt").write_text(text + "\n")
    print(text)
    ctx.manifest.inputs["rows"] = len(pairs)
    ctx.manifest.stage("evaluate", len(pairs), len(pairs))


def cmd_audit_bias(ctx: Context) -> None:
    from .eval import bias_audit, load_parcel_tracts_csv, load_tracts_csv

    s = ctx.s
    _require(s, "predictions", "parcel_tracts", "tracts")
    data = _read_value_csv(s["predictions"])
    if "truth" not in data:
        raise ConfigError(f"{s['predictions']}: no truth column")
    rep = bias_audit(data["parcel_id"], data["prediction"], data["truth"],
                     load_parcel_tracts_csv(s["parcel_tracts"]), load_tracts_csv(s["tracts"]))
    ctx.manifest.add(ctx.out / "bias.json").write_text(rep.to_json() + "\n")
    ctx.manifest.add(ctx.out / "bias.txt").write_text(rep.to_text() + "\n")
    print(rep.to_text())
    n = len(data["parcel_id"])
    ctx.manifest.inputs["rows"] = n
    ctx.manifest.stage("audit", n, n)


def cmd_audit_mar(ctx: Context) -> None:
    from .eval import c2st_mar_test
    from .ingest import default_schema, fit_encoder
    from .model import preset

    s = ctx.s
    _require(s, "features", "labels")
    schema = default_schema()
    raw, recs = _ingest_records(s["features"], s["labels"], s["county"], schema)
    enc = fit_encoder(recs, schema)
    present = enc.transform([r for r in recs if r.label is not None], with_target=False)
    missing = enc.transform([r for r in recs if r.label is None], with_target=False)
    hp = preset("desk", n_estimators=s["n_estimators"])
    res = c2st_mar_test(present, missing, seed=s["seed"], hp=hp, method=s["method"],
                        n_permutations=s["permutations"], workers=_workers(s))
    out = {**res.to_dict(), "n_present": present.n, "n_missing": missing.n}
    ctx.manifest.add(ctx.out / "c2st.json").write_text(json.dumps(out, indent=2) + "\n")
    print(f"accuracy {res.test_accuracy:.4f} on {res.n_test} held-out rows, p = {res.p_value:.4g} ({res.method})")
    ctx.manifest.inputs["records"] = len(raw)
    ctx.manifest.stage("clean", len(raw), len(recs), 0, len(raw) - len(recs))


def cmd_cost(ctx: Context) -> None:
    from dataclasses import replace

    from .eval import REFERENCE_SCENARIO, cost_estimate

    s = ctx.s
    sc = REFERENCE_SCENARIO
    try:
        if s["n_documents"] is not None:
            sc = replace(sc, n_documents=s["n_documents"])
        if s["n_cells"] is not None:
            sc = replace(sc, n_cells=s["n_cells"])
    except LedgerLensError as exc:
        raise ConfigError(str(exc)) from None
    rep = cost_estimate(sc)
    ctx.manifest.add(ctx.out / "cost.json").write_text(
        json.dumps({"scenario": sc.to_dict(), "report": rep.to_dict()}, indent=2) + "\n")
    ctx.manifest.add(ctx.out / "cost.txt").write_text(rep.to_text() + "\n")
    print(rep.to_text())
    ctx.manifest.stage("estimate", 1, 1)


HANDLERS = {
    "synth cards": cmd_synth_cards, "synth parcels": cmd_synth_parcels, "align": cmd_align,
    "segment": cmd_segment, "ocr": cmd_ocr, "pipeline": cmd_pipeline, "ingest": cmd_ingest,
    "train": cmd_train, "grid-search": cmd_grid_search, "predict": cmd_predict, "adjust": cmd_adjust,
    "evaluate": cmd_evaluate, "audit-bias": cmd_audit_bias, "audit-mar": cmd_audit_mar, "cost": cmd_cost,
}


# ---------------------------------------------------------------- argparse


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_opts(p: argparse.ArgumentParser, opts: dict[str, _Opt]) -> None:
    for name, opt in opts.items():
        flag = "--" + name.replace("_", "-")
        dest = name
        if opt.flag:
            p.add_argument(flag, dest=dest, action="store_const", const=True, default=None, help=opt.help)
        else:
            h = opt.help + ("" if opt.default is None else f" (default {opt.default})")
            p.add_argument(flag, dest=dest, default=None, choices=opt.choices, help=h, metavar=name.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ledgerlens", description="Digitize assessment cards and model historical values.")
    parser.add_argument("--config", help="TOML settings file")
    parser.add_argument("--manifest", help="manifest path (default <out>/manifest.json)")
    parser.add_argument("--jsonl-log", dest="jsonl_log", help="append per-document events to this JSONL file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    synth = sub.add_parser("synth", help="generate synthetic fixtures")
    ssub = synth.add_subparsers(dest="synth_kind", metavar="KIND", parser_class=_Parser)
    for name, opts in COMMANDS.items():
        if name.startswith("synth "):
            kind = name.split()[1]
            p = ssub.add_parser(kind, help=f"synthetic {kind}")
        else:
            p = sub.add_parser(name, help=f"{name} stage")
        _add_opts(p, {**COMMON, **opts})
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    command = args.command
    if command == "synth":
        if args.synth_kind is None:
            parser.print_usage(sys.stderr)
            return EXIT_CONFIG
        command = f"synth {args.synth_kind}"
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "synth_kind", "config", "manifest",
                                                              "jsonl_log", "verbose")}
    events = None
    try:
        s = resolve_settings(command, flags, load_config(args.config))
        _require(s, "out")
        out = Path(s["out"])
        out.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(command, config_hash(command, s), s["seed"])
        events = EventLog(args.jsonl_log)
        ctx = Context(command, s, out, manifest, events)
        t0 = time.perf_counter()
        HANDLERS[command](ctx)
        manifest.wall_time_s = time.perf_counter() - t0
        manifest.save(args.manifest or out / "manifest.json")
    except ConfigError as exc:
        print(f"ledgerlens: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LedgerLensError as exc:
        print(f"ledgerlens: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        if events is not None:
            events.close()
    return EXIT_PARTIAL if manifest.any_failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
