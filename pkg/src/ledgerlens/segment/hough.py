"""Axis-aligned rule detection with a restricted-angle Hough transform."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.ndimage import uniform_filter

from .. import _accel
from ..imagecore import as_gray


class LineRT(NamedTuple):
    """Line x cos(theta) + y sin(theta) = rho, theta in [0, pi)."""

    rho: float
    theta: float
    votes: int

    @property
    def horizontal(self) -> bool:
        return abs(self.theta - math.pi / 2) < math.pi / 4

    def canonical(self) -> tuple[float, float]:
        """(rho, theta) with theta folded into (-pi/2, pi/2] so near-vertical
        lines on either side of 0 compare by rho directly."""
        if self.theta > math.pi / 2 + math.pi / 4:
            return -self.rho, self.theta - math.pi
        return self.rho, self.theta


@dataclass(frozen=True)
class HoughParams:
    window: int = 15
    offset: float = 10.0
    angle_span_deg: int = 2
    vote_fraction: float = 0.5
    merge_distance: float = 10.0

    def thetas_deg(self) -> np.ndarray:
        s = self.angle_span_deg
        near_zero = [(d + 180) % 180 for d in range(-s, s + 1)]
        near_ninety = list(range(90 - s, 90 + s + 1))
        return np.array(sorted(set(near_zero + near_ninety)), dtype=np.int64)


def binarize_adaptive(img, window: int = 15, offset: float = 10.0) -> np.ndarray:
    """Ink mask: pixels darker than their local mean by more than ``offset``."""
    f = as_gray(img).astype(np.float64)
    local = uniform_filter(f, size=window, mode="nearest")
    return f < local - offset


@_accel.njit
def _accumulate_nb(ys, xs, cos_t, sin_t, diag):
    acc = np.zeros((cos_t.shape[0], 2 * diag + 1), dtype=np.int64)
    for i in range(ys.shape[0]):
        x = xs[i]
        y = ys[i]
        for t in range(cos_t.shape[0]):
            r = int(np.floor(x * cos_t[t] + y * sin_t[t] + 0.5)) + diag
            acc[t, r] += 1
    return acc


def _accumulate_np(ys, xs, cos_t, sin_t, diag):
    acc = np.zeros((cos_t.shape[0], 2 * diag + 1), dtype=np.int64)
    for t in range(cos_t.shape[0]):
        r = np.floor(xs * cos_t[t] + ys * sin_t[t] + 0.5).astype(np.int64) + diag
        acc[t] = np.bincount(r, minlength=2 * diag + 1)
    return acc


def hough_accumulator(mask: np.ndarray, thetas_deg: np.ndarray) -> tuple[np.ndarray, int]:
    ys, xs = np.nonzero(mask)
    diag = int(math.ceil(math.hypot(*mask.shape))) + 1
    th = np.deg2rad(thetas_deg.astype(np.float64))
    kernel = _accel.pick(_accumulate_nb, _accumulate_np)
    acc = kernel(ys.astype(np.float64), xs.astype(np.float64), np.cos(th), np.sin(th), diag)
    return acc, diag


def hough_lines(img, params: HoughParams | None = None) -> list[LineRT]:
    """Horizontal and vertical rules in ``img``, strongest first within each class.

    Reported rho is the vote-weighted centre of the peak's neighbouring bins,
    so a thick rule resolves to its midline.
    """
    p = params or HoughParams()
    img = as_gray(img)
    rows, cols = img.shape
    mask = binarize_adaptive(img, p.window, p.offset)
    thetas = p.thetas_deg()
    acc, diag = hough_accumulator(mask, thetas)
    horiz = np.abs(thetas - 90) <= p.angle_span_deg
    need = np.where(horiz, p.vote_fraction * cols, p.vote_fraction * rows)
    ti, ri = np.nonzero(acc >= need[:, None])
    if len(ti) == 0:
        return []
    votes = acc[ti, ri]
    order = np.lexsort((ri, ti, -votes))
    accepted: list[LineRT] = []
    for k in order:
        t, r = int(ti[k]), int(ri[k])
        line = LineRT(float(r - diag), math.radians(float(thetas[t])), int(votes[k]))
        rho_c, _ = line.canonical()
        clash = False
        for other in accepted:
            if other.horizontal == line.horizontal and abs(other.canonical()[0] - rho_c) < p.merge_distance:
                clash = True
                break
        if clash:
            continue
        lo, hi = max(0, r - 2), min(acc.shape[1], r + 3)
        w = acc[t, lo:hi].astype(np.float64)
        w = np.where(w >= 0.5 * votes[k], w, 0.0)
        rho = float((w * (np.arange(lo, hi) - diag)).sum() / w.sum())
        accepted.append(LineRT(rho, line.theta, line.votes))
    return accepted


def line_intersections(horizontals, verticals, min_angle_deg: float = 1.0) -> np.ndarray:
    """(n_h, n_v, 2) grid of (x, y) crossings; rows ordered by y, columns by x.

    Pairs meeting at less than ``min_angle_deg`` are left as NaN.
    """
    hs = sorted(horizontals, key=lambda l: l.rho / max(math.sin(l.theta), 1e-12))
    vs = sorted(verticals, key=lambda l: l.canonical()[0] / max(math.cos(l.canonical()[1]), 1e-12))
    out = np.full((len(hs), len(vs), 2), np.nan)
    for i, h in enumerate(hs):
        for j, v in enumerate(vs):
            a = np.array([[math.cos(h.theta), math.sin(h.theta)], [math.cos(v.theta), math.sin(v.theta)]])
            if abs(math.sin(h.theta - v.theta)) < math.sin(math.radians(min_angle_deg)):
                continue
            out[i, j] = np.linalg.solve(a, [h.rho, v.rho])
    return out
