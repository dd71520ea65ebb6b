"""Brute-force Hamming matching and the quadrant-consistency filter."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .. import _accel
from ..errors import NoFeaturesError
from .features import FeatureSet


class FeatureMatch(NamedTuple):
    template_index: int
    scan_index: int
    distance: int


@_accel.njit
def _popcount64(v):
    v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
    v = (v & np.uint64(0x3333333333333333)) + ((v >> np.uint64(2)) & np.uint64(0x3333333333333333))
    v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (v * np.uint64(0x0101010101010101)) >> np.uint64(56)


@_accel.njit
def _nearest_nb(a, b):
    n, words = a.shape
    m = b.shape[0]
    best_idx = np.empty(n, dtype=np.int64)
    best_dist = np.empty(n, dtype=np.int64)
    for i in range(n):
        bd = 1 << 30
        bi = -1
        for j in range(m):
            d = 0
            for w in range(words):
                d += _popcount64(a[i, w] ^ b[j, w])
            if d < bd:
                bd = d
                bi = j
        best_idx[i] = bi
        best_dist[i] = bd
    return best_idx, best_dist


def _nearest_np(a, b, chunk=256):
    n = a.shape[0]
    best_idx = np.empty(n, dtype=np.int64)
    best_dist = np.empty(n, dtype=np.int64)
    for start in range(0, n, chunk):
        block = a[start : start + chunk]
        dist = np.bitwise_count(block[:, None, :] ^ b[None, :, :]).sum(axis=2, dtype=np.int64)
        idx = np.argmin(dist, axis=1)
        best_idx[start : start + chunk] = idx
        best_dist[start : start + chunk] = dist[np.arange(len(block)), idx]
    return best_idx, best_dist


def hamming_nearest(query: np.ndarray, train: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index and Hamming distance of each query row's nearest train row.

    Ties resolve to the lowest train index.
    """
    q = np.ascontiguousarray(query, dtype=np.uint8).view(np.uint64)
    t = np.ascontiguousarray(train, dtype=np.uint8).view(np.uint64)
    return _accel.pick(_nearest_nb, _nearest_np)(q, t)


def match_descriptors(template_set: FeatureSet, scan_set: FeatureSet, retain_fraction: float) -> list[FeatureMatch]:
    """Nearest scan descriptor for every template descriptor, best first.

    Keeps the first ceil(retain_fraction * n_template) matches after a stable
    sort on distance.
    """
    if not 0.0 < retain_fraction <= 1.0:
        raise ValueError("retain_fraction must lie in (0, 1]")
    if len(template_set) == 0 or len(scan_set) == 0:
        raise NoFeaturesError("cannot match an empty descriptor set")
    idx, dist = hamming_nearest(template_set.descriptors, scan_set.descriptors)
    order = np.argsort(dist, kind="stable")
    keep = math.ceil(retain_fraction * len(order))
    return [FeatureMatch(int(i), int(idx[i]), int(dist[i])) for i in order[:keep]]


def quadrant_index(xy: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """0..3 quadrant (TL, TR, BL, BR) about the centre of a (height, width) image."""
    h, w = dims
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    return (xy[:, 0] >= w / 2.0).astype(np.int64) + 2 * (xy[:, 1] >= h / 2.0).astype(np.int64)


def quadrant_filter(matches, template_xy, scan_xy, template_dims, scan_dims) -> list[FeatureMatch]:
    """Keep matches whose endpoints sit in the same quadrant of their own image."""
    if not matches:
        return []
    t_idx = np.array([m.template_index for m in matches])
    s_idx = np.array([m.scan_index for m in matches])
    tq = quadrant_index(np.asarray(template_xy)[t_idx], template_dims)
    sq = quadrant_index(np.asarray(scan_xy)[s_idx], scan_dims)
    return [m for m, same in zip(matches, tq == sq) if same]
