"""Time every hot kernel on its numba path and its numpy path.

    python benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Each kernel is called once per path before timing so JIT compilation (or the
on-disk cache load) is excluded. The reported figure is the best of N runs.
Outputs of the two paths are compared as a sanity check.
"""

from __future__ import annotations

import argparse
import json
import platform
import time

import numpy as np

from ledgerlens import _accel
from ledgerlens.align import Aligner, estimate_homography_ransac
from ledgerlens.align.features import detect_and_describe, fast_corners
from ledgerlens.align.matching import hamming_nearest
from ledgerlens.imagecore import apply_homography, warp_perspective
from ledgerlens.model.tree import build_tree, pack_trees, predict_trees
from ledgerlens.segment.hough import HoughParams, hough_accumulator
from ledgerlens.synth.cards import DEFAULT_DESIGN, random_card_spec, render_card, render_template


def _cases():
    rng = np.random.default_rng(0)
    scan, _ = render_card(random_card_spec(3, "bench", max_rotation_deg=2.0, perspective_jitter=0.01,
                                           max_translation=20, noise_sigma=4))
    h = np.array([[1.01, 0.02, 5.0], [-0.015, 0.99, -3.0], [1e-5, -2e-5, 1.0]])
    feats = detect_and_describe(scan, 5000)
    other = detect_and_describe(render_template(DEFAULT_DESIGN), 5000)

    src = rng.uniform(0, 900, (300, 2))
    dst = apply_homography(h, src) + rng.normal(0, 0.7, src.shape)
    dst[:90] = rng.uniform(0, 900, (90, 2))

    x = rng.normal(size=(4000, 12))
    y = x[:, 0] * 3 + np.sin(x[:, 1]) + rng.normal(0, 0.3, 4000)
    packed = pack_trees([build_tree(x, y, rng.integers(0, 4000, 4000), max_features="sqrt", seed=s)
                         for s in range(20)])
    mask = np.zeros((740, 1080), bool)
    mask[rng.integers(0, 740, 30000), rng.integers(0, 1080, 30000)] = True
    thetas = HoughParams().thetas_deg()
    aligner = Aligner(render_template(DEFAULT_DESIGN))

    return {
        "warp_perspective 1080x740": lambda: warp_perspective(scan, h, 1080, 740),
        "fast_corners 1080x740": lambda: fast_corners(scan),
        "detect_and_describe 5000": lambda: detect_and_describe(scan, 5000).descriptors,
        "hamming_nearest": lambda: hamming_nearest(other.descriptors, feats.descriptors),
        "ransac 300 pts x 2000 iters": lambda: estimate_homography_ransac(src, dst, seed=1).homography,
        "hough accumulator": lambda: hough_accumulator(mask, thetas)[0],
        "build_tree 4000x12": lambda: build_tree(x, y, max_features="sqrt", seed=7).value,
        "predict 20 trees x 4000": lambda: predict_trees(packed, x),
        "align one card": lambda: aligner.align(scan).homography,
    }


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(p, q) for p, q in zip(a, b))
    return np.allclose(np.asarray(a, float), np.asarray(b, float), rtol=1e-9, atol=1e-9)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write the results here")
    args = ap.parse_args(argv)

    cases = _cases()
    rows = []
    for name, fn in cases.items():
        out = {}
        for label, flag in (("numba", True), ("numpy", False)):
            with _accel.use_jit(flag):
                ref = fn()
                out[label] = (_best(fn, args.repeat), ref)
        rows.append({"kernel": name, "numba_s": out["numba"][0], "numpy_s": out["numpy"][0],
                     "speedup": out["numpy"][0] / out["numba"][0],
                     "outputs_match": bool(_same(out["numba"][1], out["numpy"][1]))})

    w = max(len(r["kernel"]) for r in rows)
    print(f"python {platform.python_version()}, numba available: {_accel.HAS_NUMBA}")
    print(f"{'kernel'.ljust(w)}  {'numba s':>9}  {'numpy s':>9}  {'speedup':>8}  match")
    for r in rows:
        print(f"{r['kernel'].ljust(w)}  {r['numba_s']:9.4f}  {r['numpy_s']:9.4f}  {r['speedup']:7.1f}x  {r['outputs_match']}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
