"""Register a scanned card onto the blank reference template."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import LedgerLensError
from ..imagecore import as_gray, brighten_dark_regions
from .features import FeatureSet, detect_and_describe
from .matching import match_descriptors, quadrant_filter
from .ransac import estimate_homography_ransac

ALIGNED = "aligned"
FLAGGED = "flagged_for_manual_inspection"


@dataclass(frozen=True)
class AlignmentPolicy:
    feature_counts: tuple[int, ...] = (5000, 7000, 10000)
    retain_fraction: float = 0.05
    min_inliers: int = 15
    max_reprojection_error: float = 6.0
    ransac_iterations: int = 2000
    seed: int = 0
    brighten_threshold: int = 64
    brighten_target: int = 96

    def __post_init__(self):
        counts = tuple(int(c) for c in self.feature_counts)
        object.__setattr__(self, "feature_counts", counts)
        if not counts:
            raise ValueError("feature_counts schedule must be non-empty")
        if any(b < a for a, b in zip(counts, counts[1:])):
            raise ValueError("feature_counts schedule must be non-decreasing")
        if not 0.0 < self.retain_fraction <= 1.0:
            raise ValueError("retain_fraction must lie in (0, 1]")
        if self.min_inliers < 4:
            raise ValueError("min_inliers must be at least 4")
        if self.max_reprojection_error <= 0:
            raise ValueError("max_reprojection_error must be positive")


@dataclass
class AlignmentResult:
    status: str
    homography: np.ndarray | None
    inlier_count: int
    mean_reprojection_error: float
    attempts_used: int
    attempts: list[dict] = field(default_factory=list)

    @property
    def aligned(self) -> bool:
        return self.status == ALIGNED

    def to_record(self, doc_id: str) -> dict:
        h = None if self.homography is None else [float(v) for v in np.asarray(self.homography).ravel()]
        err = self.mean_reprojection_error
        return {
            "doc_id": doc_id,
            "status": self.status,
            "h": h,
            "inliers": int(self.inlier_count),
            "mean_err": None if not math.isfinite(err) else float(err),
            "attempts": int(self.attempts_used),
        }

    def to_json(self, doc_id: str) -> str:
        return json.dumps(self.to_record(doc_id), sort_keys=False)


def _prepare(img, policy: AlignmentPolicy) -> np.ndarray:
    img = as_gray(img)
    if policy.brighten_threshold > 0:
        img = brighten_dark_regions(img, policy.brighten_threshold, policy.brighten_target)
    return img


class Aligner:
    """Template-bound aligner that caches template features per feature budget.

    One instance may serve many scans, including from several threads; the
    cache only ever grows with deterministic values.
    """

    def __init__(self, template, policy: AlignmentPolicy | None = None):
        self.policy = policy or AlignmentPolicy()
        self.template = _prepare(template, self.policy)
        self._cache: dict[int, FeatureSet] = {}

    def template_features(self, n_features: int) -> FeatureSet:
        fs = self._cache.get(n_features)
        if fs is None:
            fs = detect_and_describe(self.template, n_features)
            self._cache[n_features] = fs
        return fs

    def align(self, scan, seed: int | None = None) -> AlignmentResult:
        policy = self.policy
        seed = policy.seed if seed is None else seed
        scan = _prepare(scan, policy)
        best = None
        attempts = []
        for attempt, n_features in enumerate(policy.feature_counts, start=1):
            info = {"n_features": n_features, "matches": 0, "filtered": 0, "inliers": 0, "mean_err": None}
            try:
                tfs = self.template_features(n_features)
                sfs = detect_and_describe(scan, n_features)
                matches = match_descriptors(tfs, sfs, policy.retain_fraction)
                info["matches"] = len(matches)
                kept = quadrant_filter(matches, tfs.xy, sfs.xy, self.template.shape, scan.shape)
                info["filtered"] = len(kept)
                src = np.array([sfs.xy[m.scan_index] for m in kept]).reshape(-1, 2)
                dst = np.array([tfs.xy[m.template_index] for m in kept]).reshape(-1, 2)
                res = estimate_homography_ransac(
                    src, dst,
                    iterations=policy.ransac_iterations,
                    threshold=policy.max_reprojection_error,
                    seed=seed,
                )
            except LedgerLensError as exc:
                info["error"] = type(exc).__name__
                attempts.append(info)
                continue
            n_in = len(res.inliers)
            info["inliers"] = n_in
            info["mean_err"] = res.mean_error
            attempts.append(info)
            if best is None or n_in > best[0]:
                best = (n_in, res)
            if n_in >= policy.min_inliers:
                return AlignmentResult(ALIGNED, res.homography, n_in, res.mean_error, attempt, attempts)
        if best is None:
            return AlignmentResult(FLAGGED, None, 0, float("inf"), len(policy.feature_counts), attempts)
        n_in, res = best
        return AlignmentResult(FLAGGED, res.homography, n_in, res.mean_error, len(policy.feature_counts), attempts)


def align_card(scan, template, policy: AlignmentPolicy | None = None) -> AlignmentResult:
    """Align ``scan`` to ``template``; the homography maps scan to template coordinates.

    Failure is reported through the status, never raised.
    """
    return Aligner(template, policy).align(scan)
