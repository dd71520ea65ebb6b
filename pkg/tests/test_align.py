import itertools

import numpy as np
import pytest

from ledgerlens import _accel
from ledgerlens.align import (
    FLAGGED,
    AlignmentPolicy,
    FeatureMatch,
    FeatureSet,
    align_card,
    detect_and_describe,
    estimate_homography_ransac,
    fast_corners,
    hamming_nearest,
    match_descriptors,
    quadrant_filter,
)
from ledgerlens.errors import InsufficientCorrespondencesError, NoFeaturesError
from ledgerlens.imagecore import apply_homography, homography_from_points
from ledgerlens.synth.cards import random_card_spec, render_card


def _corner_error(h_est, h_true, w, hgt):
    corners = np.array([[0, 0], [w, 0], [w, hgt], [0, hgt]], float)
    return np.abs(apply_homography(h_est, corners) - apply_homography(h_true, corners)).max()


def test_constant_image_has_no_features():
    fs = detect_and_describe(np.full((120, 160), 200, np.uint8), 500)
    assert len(fs) == 0
    assert not fast_corners(np.full((64, 64), 9, np.uint8)).any()


def test_template_features_are_plentiful_and_deterministic(template):
    a = detect_and_describe(template, 5000)
    b = detect_and_describe(template, 5000)
    assert len(a) >= 100
    assert np.array_equal(a.descriptors, b.descriptors)
    assert np.array_equal(a.xy, b.xy)


def test_feature_kernels_agree(template):
    with _accel.use_jit(True):
        a = detect_and_describe(template, 2000)
    with _accel.use_jit(False):
        b = detect_and_describe(template, 2000)
    assert np.array_equal(a.xy, b.xy)
    assert np.array_equal(a.descriptors, b.descriptors)


def _fs(desc):
    n = len(desc)
    return FeatureSet(np.zeros((n, 2)), np.zeros(n), np.zeros(n), desc, (10, 10))


def test_match_retain_counts(rng):
    t = rng.integers(0, 256, (5000, 32)).astype(np.uint8)
    s = rng.integers(0, 256, (300, 32)).astype(np.uint8)
    assert len(match_descriptors(_fs(t), _fs(s), 0.05)) == 250
    full = match_descriptors(_fs(t[:200]), _fs(s), 1.0)
    assert len(full) == 200
    d = [m.distance for m in full]
    assert d == sorted(d)


def test_self_match_is_identity(rng):
    t = rng.integers(0, 256, (400, 32)).astype(np.uint8)
    got = match_descriptors(_fs(t), _fs(t.copy()), 0.5)
    assert all(m.distance == 0 and m.template_index == m.scan_index for m in got)
    with pytest.raises(NoFeaturesError):
        match_descriptors(_fs(t[:0]), _fs(t), 0.5)


def test_hamming_kernels_agree_with_bit_count(rng):
    q = rng.integers(0, 256, (40, 32)).astype(np.uint8)
    t = rng.integers(0, 256, (70, 32)).astype(np.uint8)
    bits = np.unpackbits(q[:, None, :] ^ t[None, :, :], axis=2).sum(axis=2)
    want_idx = bits.argmin(axis=1)
    for flag in (True, False):
        with _accel.use_jit(flag):
            idx, dist = hamming_nearest(q, t)
        assert np.array_equal(idx, want_idx)
        assert np.array_equal(dist, bits.min(axis=1))


def test_quadrant_filter(rng):
    dims = (200, 400)
    tl = FeatureMatch(0, 0, 0)
    txy = np.array([[10.0, 10.0]])
    assert quadrant_filter([tl], txy, np.array([[20.0, 30.0]]), dims, dims) == [tl]
    assert quadrant_filter([tl], txy, np.array([[390.0, 190.0]]), dims, dims) == []

    good_t = np.column_stack([rng.uniform(0, 400, 100), rng.uniform(0, 200, 100)])
    good_s = good_t + rng.uniform(-3, 3, good_t.shape)
    good_s = np.clip(good_s, 0, [399, 199])
    # keep jittered points on the same side of each centre line
    same = ((good_t[:, 0] >= 200) == (good_s[:, 0] >= 200)) & ((good_t[:, 1] >= 100) == (good_s[:, 1] >= 100))
    good_s[~same] = good_t[~same]
    bad_t = np.column_stack([rng.uniform(0, 190, 20), rng.uniform(0, 90, 20)])
    bad_s = np.column_stack([rng.uniform(210, 400, 20), rng.uniform(110, 200, 20)])
    txy = np.vstack([good_t, bad_t])
    sxy = np.vstack([good_s, bad_s])
    matches = [FeatureMatch(i, i, 0) for i in range(120)]
    kept = quadrant_filter(matches, txy, sxy, dims, dims)
    assert [m.template_index for m in kept] == list(range(100))


def test_ransac_exact_scaling(kernel_path):
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    res = estimate_homography_ransac(sq, sq * 2, iterations=50)
    assert np.allclose(res.homography, np.diag([2.0, 2.0, 1.0]), atol=1e-9)
    assert len(res.inliers) == 4


def test_ransac_rejects_outliers(rng, kernel_path):
    src = rng.uniform(0, 500, (20, 2))
    outs = rng.uniform(0, 500, (5, 2))
    bad = outs + rng.choice([-1, 1], (5, 2)) * rng.uniform(60, 120, (5, 2))
    res = estimate_homography_ransac(np.vstack([src, outs]), np.vstack([src, bad]), seed=3)
    assert sorted(res.inliers.tolist()) == list(range(20))
    assert np.allclose(res.homography, np.eye(3), atol=1e-8)
    assert res.mean_error < 1e-6


def test_ransac_needs_four_pairs():
    p = np.zeros((3, 2))
    with pytest.raises(InsufficientCorrespondencesError):
        estimate_homography_ransac(p, p)


def test_ransac_kernels_agree(rng):
    src = rng.uniform(0, 300, (40, 2))
    h = homography_from_points([[0, 0], [1, 0], [1, 1], [0, 1]], [[3, 2], [1.1, 0.05], [1.05, 1.1], [0.02, 0.95]])
    dst = apply_homography(h, src) + rng.normal(0, 0.5, src.shape)
    dst[:8] += rng.uniform(30, 80, (8, 2))
    out = []
    for flag in (True, False):
        with _accel.use_jit(flag):
            out.append(estimate_homography_ransac(src, dst, seed=11, iterations=500))
    assert np.array_equal(out[0].inliers, out[1].inliers)
    assert np.allclose(out[0].homography, out[1].homography, rtol=1e-9, atol=1e-12)


def test_policy_validation():
    with pytest.raises(ValueError):
        AlignmentPolicy(feature_counts=(7000, 5000))
    with pytest.raises(ValueError):
        AlignmentPolicy(retain_fraction=0.0)
    with pytest.raises(ValueError):
        AlignmentPolicy(min_inliers=3)


def test_self_alignment(template):
    res = align_card(template, template)
    assert res.aligned and res.attempts_used == 1
    hgt, w = template.shape
    assert _corner_error(res.homography, np.eye(3), w, hgt) < 0.5


def test_warped_noisy_card_aligns(aligner):
    spec = random_card_spec(7, max_rotation_deg=2.0, perspective_jitter=0.01, max_translation=20, noise_sigma=4)
    scan, truth = render_card(spec)
    res = aligner.align(scan)
    assert res.aligned
    g = np.array(truth["template_to_scan"]).reshape(3, 3)
    d = spec.design
    # the result maps scan -> template, so its inverse should track g
    assert _corner_error(np.linalg.inv(res.homography), g, d.width, d.height) <= 2.0


def test_uniform_noise_is_flagged(template):
    noise = np.random.default_rng(0).integers(0, 256, template.shape).astype(np.uint8)
    res = align_card(noise, template)
    assert res.status == FLAGGED
    assert res.attempts_used == 3
    assert len(res.attempts) == 3
    rec = res.to_record("n")
    assert rec["status"] == FLAGGED and rec["attempts"] == 3


def test_alignment_is_seed_deterministic(aligner):
    scan, _ = render_card(random_card_spec(2, max_rotation_deg=1.5, max_translation=10))
    a, b = aligner.align(scan), aligner.align(scan)
    assert np.array_equal(a.homography, b.homography)
