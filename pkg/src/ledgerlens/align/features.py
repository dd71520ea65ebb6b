"""Oriented binary features: FAST-9 corners ranked by Harris response,
intensity-centroid orientation, and 256 rotated intensity comparisons on a
smoothed 31x31 patch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .. import _accel
from ..errors import DimensionError
from ..imagecore import as_gray

FAST_THRESHOLD = 20
FAST_ARC = 9
PATCH_SIZE = 31
PATCH_RADIUS = PATCH_SIZE // 2
BORDER = PATCH_RADIUS + 1
N_BITS = 256
N_ANGLE_BINS = 30
HARRIS_K = 0.04
HARRIS_SIGMA = 1.5
PATTERN_SEED = 0x5EED_0B5

# Bresenham circle of radius 3, clockwise from 12 o'clock, as (dx, dy).
CIRCLE = np.array(
    [(0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
     (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3)],
    dtype=np.int64,
)


class Keypoint(NamedTuple):
    x: float
    y: float
    response: float
    orientation: float


def _build_pattern() -> np.ndarray:
    """256 point pairs (x1, y1, x2, y2) inside the patch disc, fixed forever."""
    rng = np.random.default_rng(PATTERN_SEED)
    pairs = []
    sigma = PATCH_SIZE / 5.0
    while len(pairs) < N_BITS:
        p = np.rint(rng.normal(0.0, sigma, size=4)).astype(np.int64)
        if p[0] ** 2 + p[1] ** 2 > PATCH_RADIUS**2 or p[2] ** 2 + p[3] ** 2 > PATCH_RADIUS**2:
            continue
        if p[0] == p[2] and p[1] == p[3]:
            continue
        pairs.append(p)
    return np.array(pairs, dtype=np.int64)


def _rotated_patterns(pattern: np.ndarray) -> np.ndarray:
    out = np.empty((N_ANGLE_BINS, N_BITS, 4), dtype=np.int64)
    for b in range(N_ANGLE_BINS):
        theta = 2.0 * np.pi * b / N_ANGLE_BINS
        c, s = np.cos(theta), np.sin(theta)
        for k in (0, 2):
            x, y = pattern[:, k], pattern[:, k + 1]
            out[b, :, k] = np.rint(c * x - s * y)
            out[b, :, k + 1] = np.rint(s * x + c * y)
    return out


PATTERN = _build_pattern()
ROTATED_PATTERN = _rotated_patterns(PATTERN)

_yy, _xx = np.mgrid[-PATCH_RADIUS : PATCH_RADIUS + 1, -PATCH_RADIUS : PATCH_RADIUS + 1]
_disc = _xx**2 + _yy**2 <= PATCH_RADIUS**2
DISC_DX = _xx[_disc].astype(np.int64)
DISC_DY = _yy[_disc].astype(np.int64)


@dataclass
class FeatureSet:
    """Keypoints and descriptors as parallel arrays.

    ``descriptors`` is (n, 32) uint8 with bit i of the 256 stored MSB-first
    in byte i // 8 (``numpy.packbits`` order).
    """

    xy: np.ndarray
    response: np.ndarray
    orientation: np.ndarray
    descriptors: np.ndarray
    image_shape: tuple[int, int]

    def __len__(self) -> int:
        return len(self.xy)

    def keypoints(self) -> list[Keypoint]:
        return [Keypoint(float(x), float(y), float(r), float(o))
                for (x, y), r, o in zip(self.xy, self.response, self.orientation)]

    @classmethod
    def empty(cls, shape) -> "FeatureSet":
        return cls(np.zeros((0, 2)), np.zeros(0), np.zeros(0), np.zeros((0, N_BITS // 8), np.uint8), tuple(shape))


# --------------------------------------------------------------------------
# FAST-9


@_accel.njit
def _fast_nb(img, t, border, cdx, cdy, arc):
    rows, cols = img.shape
    out = np.zeros((rows, cols), dtype=np.bool_)
    state = np.empty(16, dtype=np.int64)
    for y in range(border, rows - border):
        for x in range(border, cols - border):
            p = np.int64(img[y, x])
            hi = p + t
            lo = p - t
            nb = 0
            nd = 0
            for k in range(0, 16, 4):
                v = np.int64(img[y + cdy[k], x + cdx[k]])
                if v > hi:
                    nb += 1
                elif v < lo:
                    nd += 1
            if nb < 2 and nd < 2:
                continue
            for k in range(16):
                v = np.int64(img[y + cdy[k], x + cdx[k]])
                if v > hi:
                    state[k] = 1
                elif v < lo:
                    state[k] = -1
                else:
                    state[k] = 0
            run = 0
            prev = 0
            for k in range(32):
                s = state[k % 16]
                if s != 0 and s == prev:
                    run += 1
                elif s != 0:
                    run = 1
                else:
                    run = 0
                prev = s
                if run >= arc:
                    out[y, x] = True
                    break
    return out


def _fast_np(img, t, border, cdx, cdy, arc):
    rows, cols = img.shape
    out = np.zeros((rows, cols), dtype=bool)
    if rows <= 2 * border or cols <= 2 * border:
        return out
    centre = img[border : rows - border, border : cols - border].astype(np.int16)
    ring = np.stack([
        img[border + dy : rows - border + dy, border + dx : cols - border + dx].astype(np.int16)
        for dx, dy in zip(cdx, cdy)
    ])
    hit = np.zeros(centre.shape, dtype=bool)
    for flags in (ring > centre + t, ring < centre - t):
        wrapped = np.concatenate([flags, flags[: arc - 1]]).astype(np.int16)
        csum = np.concatenate([np.zeros((1,) + centre.shape, np.int16), np.cumsum(wrapped, axis=0, dtype=np.int16)])
        window = csum[arc:] - csum[:-arc]
        hit |= (window >= arc).any(axis=0)
    out[border : rows - border, border : cols - border] = hit
    return out


def fast_corners(img, threshold: int = FAST_THRESHOLD, border: int = BORDER) -> np.ndarray:
    """Boolean mask of FAST-9 corners at least ``border`` pixels from the edge."""
    img = np.ascontiguousarray(as_gray(img))
    kernel = _accel.pick(_fast_nb, _fast_np)
    return kernel(img, int(threshold), int(border), CIRCLE[:, 0].copy(), CIRCLE[:, 1].copy(), FAST_ARC)


def harris_response(img) -> np.ndarray:
    f = as_gray(img).astype(np.float64) / 255.0
    gx = ndimage.sobel(f, axis=1, mode="nearest")
    gy = ndimage.sobel(f, axis=0, mode="nearest")
    sxx = ndimage.gaussian_filter(gx * gx, HARRIS_SIGMA, mode="nearest")
    syy = ndimage.gaussian_filter(gy * gy, HARRIS_SIGMA, mode="nearest")
    sxy = ndimage.gaussian_filter(gx * gy, HARRIS_SIGMA, mode="nearest")
    return sxx * syy - sxy * sxy - HARRIS_K * (sxx + syy) ** 2


# --------------------------------------------------------------------------
# orientation + descriptors


@_accel.njit
def _describe_nb(smooth, raw, xs, ys, ddx, ddy, rotated, n_bins):
    n = xs.shape[0]
    n_bits = rotated.shape[1]
    desc = np.zeros((n, n_bits // 8), dtype=np.uint8)
    angles = np.empty(n, dtype=np.float64)
    for i in range(n):
        x = xs[i]
        y = ys[i]
        m10 = np.int64(0)
        m01 = np.int64(0)
        for k in range(ddx.shape[0]):
            v = np.int64(raw[y + ddy[k], x + ddx[k]])
            m10 += ddx[k] * v
            m01 += ddy[k] * v
        theta = np.arctan2(np.float64(m01), np.float64(m10))
        angles[i] = theta
        two_pi = 2.0 * np.pi
        a = theta % two_pi
        b = int(np.floor(a / (two_pi / n_bins) + 0.5)) % n_bins
        for j in range(n_bits):
            p1 = smooth[y + rotated[b, j, 1], x + rotated[b, j, 0]]
            p2 = smooth[y + rotated[b, j, 3], x + rotated[b, j, 2]]
            if p1 < p2:
                desc[i, j >> 3] |= np.uint8(1 << (7 - (j & 7)))
    return angles, desc


def _describe_np(smooth, raw, xs, ys, ddx, ddy, rotated, n_bins):
    if len(xs) == 0:
        return np.zeros(0), np.zeros((0, rotated.shape[1] // 8), np.uint8)
    vals = raw[ys[:, None] + ddy[None, :], xs[:, None] + ddx[None, :]].astype(np.int64)
    m10 = (vals * ddx[None, :]).sum(axis=1)
    m01 = (vals * ddy[None, :]).sum(axis=1)
    theta = np.arctan2(m01.astype(np.float64), m10.astype(np.float64))
    two_pi = 2.0 * np.pi
    bins = np.floor((theta % two_pi) / (two_pi / n_bins) + 0.5).astype(np.int64) % n_bins
    pat = rotated[bins]
    p1 = smooth[ys[:, None] + pat[:, :, 1], xs[:, None] + pat[:, :, 0]]
    p2 = smooth[ys[:, None] + pat[:, :, 3], xs[:, None] + pat[:, :, 2]]
    return theta, np.packbits(p1 < p2, axis=1)


def _subpixel(resp, xs, ys) -> np.ndarray:
    """Parabolic peak offset of the Harris response along each axis, clipped to half a pixel."""
    rows, cols = resp.shape
    x0, x1 = np.clip(xs - 1, 0, cols - 1), np.clip(xs + 1, 0, cols - 1)
    y0, y1 = np.clip(ys - 1, 0, rows - 1), np.clip(ys + 1, 0, rows - 1)
    c = resp[ys, xs]
    out = np.stack([xs, ys], axis=1).astype(np.float64)
    for axis, (lo, hi) in enumerate(((resp[ys, x0], resp[ys, x1]), (resp[y0, xs], resp[y1, xs]))):
        curv = lo - 2.0 * c + hi
        with np.errstate(divide="ignore", invalid="ignore"):
            off = np.where(curv < 0, 0.5 * (lo - hi) / curv, 0.0)
        out[:, axis] += np.clip(off, -0.5, 0.5)
    return out


def detect_and_describe(img, n_features: int, fast_threshold: int = FAST_THRESHOLD) -> FeatureSet:
    """Up to ``n_features`` oriented keypoints with binary descriptors.

    Corners are FAST-9 hits surviving 3x3 non-maximum suppression on the
    Harris response, ranked by that response (ties broken in raster order).
    """
    img = as_gray(img)
    rows, cols = img.shape
    if rows < PATCH_SIZE or cols < PATCH_SIZE:
        raise DimensionError(f"image must be at least {PATCH_SIZE}x{PATCH_SIZE}")
    if n_features < 1:
        return FeatureSet.empty(img.shape)
    corners = fast_corners(img, fast_threshold)
    if not corners.any():
        return FeatureSet.empty(img.shape)
    resp = harris_response(img)
    masked = np.where(corners, resp, -np.inf)
    peak = ndimage.maximum_filter(masked, size=3, mode="constant", cval=-np.inf)
    keep = corners & (masked == peak) & (resp > 0)
    ys, xs = np.nonzero(keep)
    if len(ys) == 0:
        return FeatureSet.empty(img.shape)
    r = resp[ys, xs]
    order = np.argsort(-r, kind="stable")[:n_features]
    ys, xs, r = ys[order].astype(np.int64), xs[order].astype(np.int64), r[order]

    smooth = ndimage.uniform_filter(img.astype(np.float32), size=5, mode="nearest")
    kernel = _accel.pick(_describe_nb, _describe_np)
    angles, desc = kernel(smooth, np.ascontiguousarray(img), xs, ys, DISC_DX, DISC_DY, ROTATED_PATTERN, N_ANGLE_BINS)
    xy = _subpixel(resp, xs, ys)
    return FeatureSet(xy, r, np.asarray(angles), np.ascontiguousarray(desc), img.shape)
