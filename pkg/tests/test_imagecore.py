import numpy as np
import pytest

from ledgerlens.errors import DegenerateQuadError, DimensionError, SingularTransformError
from ledgerlens.imagecore import (
    apply_homography,
    as_gray,
    brighten_dark_regions,
    check_invertible,
    crop,
    homography_from_points,
    invert_homography,
    normalize_homography,
    read_image,
    rect_quad,
    rectify_quad,
    rotate90,
    signed_area,
    to_grayscale,
    translation,
    validate_quad,
    warp_perspective,
    write_png,
)


def test_luma_examples():
    assert to_grayscale(np.full((2, 2, 3), 255, np.uint8)).tolist() == [[255, 255], [255, 255]]
    assert to_grayscale(np.array([[[255, 0, 0]]], np.uint8))[0, 0] == 76
    assert to_grayscale(np.array([[[0, 255, 0]]], np.uint8))[0, 0] == 150


def test_luma_matches_formula(rng):
    rgb = rng.integers(0, 256, (7, 9, 3)).astype(np.uint8)
    want = np.floor(rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114 + 0.5)
    assert np.array_equal(to_grayscale(rgb), want.astype(np.uint8))


def test_gray_validation():
    with pytest.raises(DimensionError):
        as_gray(np.zeros((0, 3)))
    with pytest.raises(DimensionError):
        to_grayscale(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        as_gray(np.array([[300]]))


def test_brighten_examples():
    img = np.array([[0, 50, 64, 200]], np.uint8)
    assert np.array_equal(brighten_dark_regions(img, 0, 10), img)
    assert brighten_dark_regions(np.array([[64]], np.uint8), 128, 128)[0, 0] == 64
    assert brighten_dark_regions(np.array([[50]], np.uint8), 100, 150)[0, 0] == 75
    out = brighten_dark_regions(img, 100, 150)
    assert out[0, 3] == 200


def test_rotate_and_crop():
    img = np.arange(12, dtype=np.uint8).reshape(3, 4)
    assert np.array_equal(rotate90(img, 4), img)
    assert rotate90(img).shape == (4, 3)
    assert np.array_equal(crop(img, 1, 1, 2, 2), img[1:3, 1:3])
    with pytest.raises(DimensionError):
        crop(img, 5, 0, 2, 2)


def test_homography_helpers():
    h = np.diag([2.0, 2.0, 2.0])
    assert np.allclose(normalize_homography(h), np.eye(3))
    with pytest.raises(SingularTransformError):
        check_invertible(np.zeros((3, 3)))
    t = translation(7, -3)
    assert np.allclose(apply_homography(t, [[1, 1]]), [[8, -2]])
    assert np.allclose(invert_homography(t) @ t, np.eye(3))
    src = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    h2 = homography_from_points(src, src * 2)
    assert np.allclose(h2, np.diag([2, 2, 1]))


def test_warp_identity_and_constant():
    img = (np.arange(30 * 40) % 251).astype(np.uint8).reshape(30, 40)
    assert np.array_equal(warp_perspective(img, np.eye(3), 40, 30), img)
    assert np.array_equal(warp_perspective(img, np.eye(3), 20, 10), img[:10, :20])
    const = np.full((20, 20), 77, np.uint8)
    out = warp_perspective(const, translation(10, 0), 20, 20)
    assert np.all(out[:, 10:] == 77)


def test_warp_scale_checkerboard(kernel_path):
    board = np.array([[0, 255], [255, 0]], np.uint8)
    out = warp_perspective(board, np.diag([2.0, 2.0, 1.0]), 4, 4)
    assert out[0, 0] == board[0, 0]
    assert out[0, 2] == board[0, 1]
    assert out[2, 0] == board[1, 0]
    assert out[2, 2] == board[1, 1]


def test_warp_kernels_agree(rng):
    from ledgerlens import _accel

    img = rng.integers(0, 256, (50, 60)).astype(np.uint8)
    h = np.array([[1.01, 0.02, 3.3], [-0.015, 0.99, -2.1], [1e-5, -2e-5, 1.0]])
    with _accel.use_jit(True):
        a = warp_perspective(img, h, 55, 45)
    with _accel.use_jit(False):
        b = warp_perspective(img, h, 55, 45)
    assert np.array_equal(a, b)


def test_quads():
    q = rect_quad(0, 0, 4, 2)
    assert signed_area(q) == pytest.approx(8.0)
    validate_quad(q)
    with pytest.raises(DegenerateQuadError):
        validate_quad([[0, 0], [1, 1], [2, 2], [3, 3]])
    with pytest.raises(DegenerateQuadError):
        validate_quad(q[::-1])


def test_rectify_crop_and_rotation(rng, kernel_path):
    img = rng.integers(0, 256, (40, 50)).astype(np.uint8)
    crop_out = rectify_quad(img, rect_quad(10, 5, 20, 12), 20, 12)
    assert np.array_equal(crop_out, img[5:17, 10:30])
    yy, xx = np.mgrid[0:12, 0:20]
    patch = (40 + 6 * xx + 5 * yy).astype(np.uint8)
    rot = np.rot90(patch, -1).copy()  # 20 rows x 12 cols, turned clockwise
    quad = [[12, 0], [12, 20], [0, 20], [0, 0]]
    back = rectify_quad(rot, quad, 20, 12)
    # half-pixel shift from the turn costs at most one gradient step
    assert np.mean(np.abs(back[1:-1, 1:-1].astype(int) - patch[1:-1, 1:-1].astype(int))) <= 6.0


def test_png_roundtrip(tmp_path, rng):
    img = rng.integers(0, 256, (9, 11)).astype(np.uint8)
    p = tmp_path / "x.png"
    write_png(p, img)
    assert np.array_equal(read_image(p), img)
    with pytest.raises(ValueError):
        read_image(tmp_path / "x.bmp")
