"""Robust homography estimation: seeded RANSAC over normalized 4-point DLT
hypotheses, followed by a least-squares DLT refit on the winning inliers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _accel
from ..errors import DegenerateConfigurationError, InsufficientCorrespondencesError
from ..imagecore import normalize_homography

COLLINEAR_EPS = 1e-5


@dataclass
class RansacResult:
    homography: np.ndarray
    inliers: np.ndarray
    mean_error: float
    hypotheses_tried: int


def hartley_transform(pts: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to the origin with mean distance sqrt(2)."""
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    s = np.sqrt(2.0) / d if d > 0 else 1.0
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def _to_h(pts, t):
    return pts @ t[:2, :2].T + t[:2, 2]


def _dlt_rows(src, dst):
    n = len(src)
    a = np.zeros((2 * n, 9))
    x, y = src[:, 0], src[:, 1]
    u, v = dst[:, 0], dst[:, 1]
    a[0::2, 0], a[0::2, 1], a[0::2, 2] = -x, -y, -1.0
    a[0::2, 6], a[0::2, 7], a[0::2, 8] = u * x, u * y, u
    a[1::2, 3], a[1::2, 4], a[1::2, 5] = -x, -y, -1.0
    a[1::2, 6], a[1::2, 7], a[1::2, 8] = v * x, v * y, v
    return a


def fit_homography_dlt(src, dst) -> np.ndarray:
    """Least-squares (algebraic) homography from >= 4 correspondences, Hartley-normalized."""
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    if len(src) < 4:
        raise InsufficientCorrespondencesError("need at least 4 correspondences")
    ts, td = hartley_transform(src), hartley_transform(dst)
    a = _dlt_rows(_to_h(src, ts), _to_h(dst, td))
    _, _, vt = np.linalg.svd(a)
    hn = vt[-1].reshape(3, 3)
    return normalize_homography(np.linalg.inv(td) @ hn @ ts)


def reprojection_errors(h, src, dst) -> np.ndarray:
    src = np.asarray(src, dtype=np.float64)
    proj = src @ h[:, :2].T + h[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        xy = proj[:, :2] / proj[:, 2:3]
    err = np.sqrt(((xy - dst) ** 2).sum(axis=1))
    return np.where(np.isfinite(err), err, np.inf)


# --------------------------------------------------------------------------
# hypothesis scoring kernels


@_accel.njit
def _ransac_nb(src_n, dst_n, src, dst, ts, td_inv, samples, thr, eps):
    iters = samples.shape[0]
    n = src.shape[0]
    best_count = -1
    best_sum = np.inf
    best_iter = -1
    tried = 0
    best_h = np.zeros((3, 3))
    a = np.zeros((8, 9))
    for it in range(iters):
        degenerate = False
        for pts_id in range(2):
            for drop in range(4):
                idx = np.empty(3, dtype=np.int64)
                c = 0
                for k in range(4):
                    if k != drop:
                        idx[c] = samples[it, k]
                        c += 1
                if pts_id == 0:
                    p0 = src_n[idx[0]]
                    p1 = src_n[idx[1]]
                    p2 = src_n[idx[2]]
                else:
                    p0 = dst_n[idx[0]]
                    p1 = dst_n[idx[1]]
                    p2 = dst_n[idx[2]]
                cr = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
                if abs(cr) < eps:
                    degenerate = True
        if degenerate:
            continue
        tried += 1
        for k in range(4):
            j = samples[it, k]
            x = src_n[j, 0]
            y = src_n[j, 1]
            u = dst_n[j, 0]
            v = dst_n[j, 1]
            r0 = 2 * k
            r1 = 2 * k + 1
            a[r0, 0] = -x
            a[r0, 1] = -y
            a[r0, 2] = -1.0
            a[r0, 3] = 0.0
            a[r0, 4] = 0.0
            a[r0, 5] = 0.0
            a[r0, 6] = u * x
            a[r0, 7] = u * y
            a[r0, 8] = u
            a[r1, 0] = 0.0
            a[r1, 1] = 0.0
            a[r1, 2] = 0.0
            a[r1, 3] = -x
            a[r1, 4] = -y
            a[r1, 5] = -1.0
            a[r1, 6] = v * x
            a[r1, 7] = v * y
            a[r1, 8] = v
        _, _, vt = np.linalg.svd(a)
        hn = np.empty((3, 3))
        for r in range(3):
            for c2 in range(3):
                hn[r, c2] = vt[8, 3 * r + c2]
        h = td_inv @ hn @ ts
        if h[2, 2] != 0.0:
            h = h / h[2, 2]
        count = 0
        total = 0.0
        for i in range(n):
            zx = h[0, 0] * src[i, 0] + h[0, 1] * src[i, 1] + h[0, 2]
            zy = h[1, 0] * src[i, 0] + h[1, 1] * src[i, 1] + h[1, 2]
            zz = h[2, 0] * src[i, 0] + h[2, 1] * src[i, 1] + h[2, 2]
            if zz == 0.0:
                continue
            ex = zx / zz - dst[i, 0]
            ey = zy / zz - dst[i, 1]
            e = np.sqrt(ex * ex + ey * ey)
            if e <= thr:
                count += 1
                total += e
        if count > best_count or (count == best_count and total < best_sum):
            best_count = count
            best_sum = total
            best_iter = it
            best_h[:, :] = h
    return best_iter, best_h, tried


def _ransac_np(src_n, dst_n, src, dst, ts, td_inv, samples, thr, eps):
    iters = samples.shape[0]
    degenerate = np.zeros(iters, dtype=bool)
    for pts in (src_n, dst_n):
        p = pts[samples]
        for drop in range(4):
            keep = [k for k in range(4) if k != drop]
            p0, p1, p2 = p[:, keep[0]], p[:, keep[1]], p[:, keep[2]]
            cr = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
            degenerate |= np.abs(cr) < eps
    ok = np.flatnonzero(~degenerate)
    if len(ok) == 0:
        return -1, np.zeros((3, 3)), 0
    s = src_n[samples[ok]]
    d = dst_n[samples[ok]]
    a = np.zeros((len(ok), 8, 9))
    x, y, u, v = s[..., 0], s[..., 1], d[..., 0], d[..., 1]
    a[:, 0::2, 0], a[:, 0::2, 1], a[:, 0::2, 2] = -x, -y, -1.0
    a[:, 0::2, 6], a[:, 0::2, 7], a[:, 0::2, 8] = u * x, u * y, u
    a[:, 1::2, 3], a[:, 1::2, 4], a[:, 1::2, 5] = -x, -y, -1.0
    a[:, 1::2, 6], a[:, 1::2, 7], a[:, 1::2, 8] = v * x, v * y, v
    _, _, vt = np.linalg.svd(a)
    hn = vt[:, 8, :].reshape(-1, 3, 3)
    h = td_inv[None] @ hn @ ts[None]
    h22 = h[:, 2, 2]
    scale = np.where(h22 != 0.0, h22, 1.0)
    h = h / scale[:, None, None]
    proj = np.einsum("kij,nj->kni", h[:, :, :2], src) + h[:, None, :, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.sqrt((proj[..., 0] / proj[..., 2] - dst[None, :, 0]) ** 2
                      + (proj[..., 1] / proj[..., 2] - dst[None, :, 1]) ** 2)
    err = np.where(np.isfinite(err), err, np.inf)
    inl = err <= thr
    counts = inl.sum(axis=1)
    sums = np.where(inl, err, 0.0).sum(axis=1)
    best = np.lexsort((np.arange(len(ok)), sums, -counts))[0]
    return int(ok[best]), h[best], len(ok)


def draw_samples(n: int, iterations: int, seed) -> np.ndarray:
    """Seeded (iterations, 4) index samples, each row without replacement."""
    rng = np.random.default_rng(seed)
    return np.argsort(rng.random((iterations, n)), axis=1)[:, :4].astype(np.int64)


def estimate_homography_ransac(src, dst, *, iterations: int = 2000, threshold: float = 6.0,
                               seed=0, policy=None) -> RansacResult:
    """Homography mapping ``src`` points onto ``dst`` points, robust to outliers.

    ``policy`` (an AlignmentPolicy) overrides iterations/threshold/seed when
    given. Inliers are the winning hypothesis' pairs with reprojection error
    <= threshold; the returned homography is the DLT refit on those inliers.
    """
    if policy is not None:
        iterations, threshold, seed = policy.ransac_iterations, policy.max_reprojection_error, policy.seed
    src = np.ascontiguousarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.ascontiguousarray(dst, dtype=np.float64).reshape(-1, 2)
    if len(src) != len(dst):
        raise ValueError("src and dst must pair up")
    if len(src) < 4:
        raise InsufficientCorrespondencesError(f"need at least 4 correspondences, got {len(src)}")
    ts, td = hartley_transform(src), hartley_transform(dst)
    src_n = np.ascontiguousarray(_to_h(src, ts))
    dst_n = np.ascontiguousarray(_to_h(dst, td))
    samples = draw_samples(len(src), iterations, seed)
    kernel = _accel.pick(_ransac_nb, _ransac_np)
    best_iter, best_h, tried = kernel(src_n, dst_n, src, dst, ts, np.linalg.inv(td), samples,
                                      float(threshold), COLLINEAR_EPS)
    if best_iter < 0 or tried == 0:
        raise DegenerateConfigurationError("every sampled 4-point set was degenerate")
    err = reprojection_errors(best_h, src, dst)
    inliers = np.flatnonzero(err <= threshold)
    if len(inliers) >= 4:
        h = fit_homography_dlt(src[inliers], dst[inliers])
    else:
        h = normalize_homography(best_h)
    mean_err = float(reprojection_errors(h, src[inliers], dst[inliers]).mean()) if len(inliers) else float("inf")
    return RansacResult(h, inliers, mean_err, int(tried))
