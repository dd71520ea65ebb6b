"""Raster primitives shared by the alignment and segmentation stages.

Images are plain ``numpy.uint8`` arrays of shape (height, width). Pixel
centres sit on integer coordinates; x runs along columns, y along rows.
Homographies are 3x3 float arrays acting on column vectors (x, y, 1).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import _accel
from .errors import DegenerateQuadError, DimensionError, SingularTransformError

WHITE = 255
DET_EPS = 1e-12
QUAD_TOLERANCE_PX = 2.0


def as_gray(img) -> np.ndarray:
    """Validate and return a GrayImage (2-D uint8, both sides >= 1)."""
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError("pixel values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def to_grayscale(rgb) -> np.ndarray:
    """Luma = round(0.299 R + 0.587 G + 0.114 B). 2-D input passes through."""
    arr = np.asarray(rgb)
    if arr.ndim == 2:
        return as_gray(arr)
    if arr.ndim != 3 or arr.shape[2] not in (3, 4) or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionError(f"expected an (h, w, 3) raster, got shape {arr.shape}")
    rgb_f = arr[..., :3].astype(np.float64)
    luma = 0.299 * rgb_f[..., 0] + 0.587 * rgb_f[..., 1] + 0.114 * rgb_f[..., 2]
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def brighten_dark_regions(img, threshold: int, target: int) -> np.ndarray:
    """Linearly stretch pixels below ``threshold`` onto [0, target)."""
    img = as_gray(img)
    if not 0 <= threshold <= target <= 255:
        raise ValueError("need 0 <= threshold <= target <= 255")
    if threshold == 0:
        return img.copy()
    out = img.copy()
    dark = img < threshold
    scaled = np.floor(img[dark].astype(np.float64) * target / threshold + 0.5)
    out[dark] = np.minimum(scaled, target - 1 if target > 0 else 0).astype(np.uint8)
    return out


def rotate90(img, quarter_turns: int = 1) -> np.ndarray:
    """Counter-clockwise rotation by ``quarter_turns`` x 90 degrees."""
    return np.ascontiguousarray(np.rot90(as_gray(img), quarter_turns))


def crop(img, x: int, y: int, w: int, h: int) -> np.ndarray:
    img = as_gray(img)
    x0, y0 = max(0, int(x)), max(0, int(y))
    x1, y1 = min(img.shape[1], int(x + w)), min(img.shape[0], int(y + h))
    if x1 <= x0 or y1 <= y0:
        raise DimensionError("crop window lies outside the image")
    return img[y0:y1, x0:x1].copy()


# --------------------------------------------------------------------------
# homography helpers


def normalize_homography(h) -> np.ndarray:
    m = np.array(h, dtype=np.float64).reshape(3, 3)
    if m[2, 2] != 0.0:
        m = m / m[2, 2]
    return m


def check_invertible(h) -> np.ndarray:
    m = normalize_homography(h)
    if not np.all(np.isfinite(m)) or abs(np.linalg.det(m)) <= DET_EPS:
        raise SingularTransformError("homography is singular")
    return m


def invert_homography(h) -> np.ndarray:
    return normalize_homography(np.linalg.inv(check_invertible(h)))


def apply_homography(h, pts) -> np.ndarray:
    """Map an (n, 2) array of points through ``h``."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    m = np.asarray(h, dtype=np.float64)
    hom = pts @ m[:, :2].T + m[:, 2]
    return hom[:, :2] / hom[:, 2:3]


def homography_from_points(src, dst) -> np.ndarray:
    """Exact homography taking 4 ``src`` points onto 4 ``dst`` points."""
    src = np.asarray(src, dtype=np.float64).reshape(4, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(4, 2)
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    try:
        sol = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        raise SingularTransformError("point configuration admits no unique homography") from None
    return np.append(sol, 1.0).reshape(3, 3)


def translation(dx: float, dy: float) -> np.ndarray:
    return np.array([[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]])


# --------------------------------------------------------------------------
# warping kernels


@_accel.njit
def _warp_nb(src, hinv, out_h, out_w):
    rows, cols = src.shape
    out = np.empty((out_h, out_w), dtype=np.uint8)
    xmax = cols - 1.0
    ymax = rows - 1.0
    for v in range(out_h):
        for u in range(out_w):
            zx = hinv[0, 0] * u + hinv[0, 1] * v + hinv[0, 2]
            zy = hinv[1, 0] * u + hinv[1, 1] * v + hinv[1, 2]
            zz = hinv[2, 0] * u + hinv[2, 1] * v + hinv[2, 2]
            if zz == 0.0:
                out[v, u] = 255
                continue
            x = zx / zz
            y = zy / zz
            if x < -1e-6 or y < -1e-6 or x > xmax + 1e-6 or y > ymax + 1e-6:
                out[v, u] = 255
                continue
            x = min(max(x, 0.0), xmax)
            y = min(max(y, 0.0), ymax)
            x0 = int(np.floor(x))
            y0 = int(np.floor(y))
            x1 = min(x0 + 1, cols - 1)
            y1 = min(y0 + 1, rows - 1)
            fx = x - x0
            fy = y - y0
            top = (1.0 - fx) * src[y0, x0] + fx * src[y0, x1]
            bot = (1.0 - fx) * src[y1, x0] + fx * src[y1, x1]
            val = (1.0 - fy) * top + fy * bot
            out[v, u] = np.uint8(min(max(np.floor(val + 0.5), 0.0), 255.0))
    return out


def _warp_np(src, hinv, out_h, out_w):
    rows, cols = src.shape
    vv, uu = np.mgrid[0:out_h, 0:out_w].astype(np.float64)
    zx = hinv[0, 0] * uu + hinv[0, 1] * vv + hinv[0, 2]
    zy = hinv[1, 0] * uu + hinv[1, 1] * vv + hinv[1, 2]
    zz = hinv[2, 0] * uu + hinv[2, 1] * vv + hinv[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        x = zx / zz
        y = zy / zz
    xmax, ymax = cols - 1.0, rows - 1.0
    valid = (zz != 0.0) & (x >= -1e-6) & (y >= -1e-6) & (x <= xmax + 1e-6) & (y <= ymax + 1e-6)
    x = np.clip(np.where(valid, x, 0.0), 0.0, xmax)
    y = np.clip(np.where(valid, y, 0.0), 0.0, ymax)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, cols - 1)
    y1 = np.minimum(y0 + 1, rows - 1)
    fx = x - x0
    fy = y - y0
    s = src.astype(np.float64)
    top = (1.0 - fx) * s[y0, x0] + fx * s[y0, x1]
    bot = (1.0 - fx) * s[y1, x0] + fx * s[y1, x1]
    val = np.clip(np.floor((1.0 - fy) * top + fy * bot + 0.5), 0.0, 255.0)
    return np.where(valid, val, 255.0).astype(np.uint8)


def warp_perspective(img, h, out_width: int, out_height: int) -> np.ndarray:
    """Resample ``img`` so output pixel (u, v) reads the source at h^-1 (u, v, 1).

    Bilinear interpolation; samples falling outside the source are white.
    """
    img = as_gray(img)
    if out_width < 1 or out_height < 1:
        raise DimensionError("output size must be positive")
    hinv = np.ascontiguousarray(invert_homography(h))
    kernel = _accel.pick(_warp_nb, _warp_np)
    return kernel(np.ascontiguousarray(img), hinv, int(out_height), int(out_width))


# --------------------------------------------------------------------------
# quads


def signed_area(quad) -> float:
    q = np.asarray(quad, dtype=np.float64).reshape(4, 2)
    x, y = q[:, 0], q[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def validate_quad(quad) -> np.ndarray:
    """Return the quad as a (4, 2) array, or raise DegenerateQuadError.

    Corners are ordered top-left, top-right, bottom-right, bottom-left in
    image coordinates (y down), which gives a positive shoelace area.
    """
    q = np.asarray(quad, dtype=np.float64).reshape(4, 2)
    if not np.all(np.isfinite(q)):
        raise DegenerateQuadError("quad has non-finite corners")
    area = signed_area(q)
    scale = max(1.0, float(np.ptp(q[:, 0]) * np.ptp(q[:, 1])))
    if area <= 1e-9 * scale:
        raise DegenerateQuadError("quad corners are collinear or wrongly ordered")
    for i in range(4):
        a, b, c = q[i], q[(i + 1) % 4], q[(i + 2) % 4]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if cross <= 1e-9 * scale:
            raise DegenerateQuadError("quad is not strictly convex")
    return q


def rect_quad(x: float, y: float, w: float, h: float) -> np.ndarray:
    return np.array([[x, y], [x + w, y], [x + w, y + h], [x, y + h]], dtype=np.float64)


def rectify_quad(img, quad, out_width: int, out_height: int) -> np.ndarray:
    """Stretch the region inside ``quad`` onto an out_width x out_height rectangle.

    The quad's corners map to (0, 0), (W, 0), (W, H), (0, H), so an
    axis-aligned quad of the output size is a plain crop.
    """
    img = as_gray(img)
    q = validate_quad(quad)
    rows, cols = img.shape
    tol = QUAD_TOLERANCE_PX
    if (q[:, 0].min() < -tol or q[:, 1].min() < -tol
            or q[:, 0].max() > cols + tol or q[:, 1].max() > rows + tol):
        raise DimensionError("quad extends beyond the image")
    q = q.copy()
    q[:, 0] = np.clip(q[:, 0], 0.0, cols)
    q[:, 1] = np.clip(q[:, 1], 0.0, rows)
    q = validate_quad(q)
    dst = rect_quad(0, 0, out_width, out_height)
    h = homography_from_points(q, dst)
    return warp_perspective(img, h, out_width, out_height)


# --------------------------------------------------------------------------
# file I/O


def read_image(path) -> np.ndarray:
    """Read a PNG or single-page TIFF as a GrayImage."""
    from PIL import Image

    path = Path(path)
    if path.suffix.lower() not in {".png", ".tif", ".tiff"}:
        raise ValueError(f"unsupported image format: {path.suffix}")
    with Image.open(path) as im:
        if getattr(im, "n_frames", 1) > 1:
            raise ValueError("multi-page TIFF is not supported")
        if im.mode in ("L", "1", "P", "I;16", "I"):
            arr = np.asarray(im.convert("L"))
        else:
            arr = to_grayscale(np.asarray(im.convert("RGB")))
    return as_gray(arr)


def write_png(path, img) -> None:
    from PIL import Image

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(as_gray(img)).save(path, format="PNG", optimize=False)
