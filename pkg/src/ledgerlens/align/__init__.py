from .card import ALIGNED, FLAGGED, Aligner, AlignmentPolicy, AlignmentResult, align_card
from .features import FeatureSet, Keypoint, detect_and_describe, fast_corners
from .matching import FeatureMatch, hamming_nearest, match_descriptors, quadrant_filter
from .ransac import RansacResult, estimate_homography_ransac, fit_homography_dlt, reprojection_errors

__all__ = [
    "ALIGNED", "FLAGGED", "Aligner", "AlignmentPolicy", "AlignmentResult", "align_card",
    "FeatureSet", "Keypoint", "detect_and_describe", "fast_corners",
    "FeatureMatch", "hamming_nearest", "match_descriptors", "quadrant_filter",
    "RansacResult", "estimate_homography_ransac", "fit_homography_dlt", "reprojection_errors",
]
