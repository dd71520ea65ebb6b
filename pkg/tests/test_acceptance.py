"""Acceptance suite. Each test prints one PASS/FAIL line with its pinned tolerance."""

import itertools
import json
import math
import time

import numpy as np
import pytest

from helpers import check_tree_against_oracle, quad_iou, truth_quad
from ledgerlens.align import FLAGGED, Aligner, AlignmentPolicy, estimate_homography_ransac
from ledgerlens.cli import doc_seed, main
from ledgerlens.eval import REFERENCE_SCENARIO, c2st_mar_test, compute_metrics, cost_estimate
from ledgerlens.imagecore import apply_homography, homography_from_points
from ledgerlens.ingest import clean_records, default_schema, fit_encoder, train_test_split
from ledgerlens.ingest.records import attach_labels
from ledgerlens.ingest.clean import ParcelRecord
from ledgerlens.model import AdjustmentParams, adjust_distribution, fit_forest, preset
from ledgerlens.model.tree import build_tree
from ledgerlens.ocr import GlyphCorrelationBackend, OcrPrediction, confidence_filter, normalize_text, recognize
from ledgerlens.segment import extract_first_cell
from ledgerlens.synth.cards import random_card_spec, render_card, render_cell_text
from ledgerlens.synth.parcels import SynthParcelSpec, generate_parcels

SUITE_T0 = time.perf_counter()

WARP = dict(max_rotation_deg=2.0, perspective_jitter=0.01, max_translation=20, noise_sigma=4,
            salt_pepper=0.002, gradient=0.15)


# ---------------------------------------------------------------- 1


def test_alignment_policy(template, criterion):
    pol = AlignmentPolicy()
    assert (pol.retain_fraction, pol.min_inliers, pol.max_reprojection_error, pol.feature_counts) == \
        (0.05, 15, 6.0, (5000, 7000, 10000))
    aligner = Aligner(template, pol)
    t0 = time.perf_counter()
    good = 0
    worst = 0.0
    for i in range(200):
        spec = random_card_spec(doc_seed(11, f"acc{i}"), f"acc{i}", **WARP)
        scan, truth = render_card(spec)
        res = aligner.align(scan)
        if not res.aligned:
            continue
        g = np.array(truth["template_to_scan"]).reshape(3, 3)
        w, h = spec.design.width, spec.design.height
        corners = np.array([[0, 0], [w, 0], [w, h], [0, h]], float)
        err = np.abs(apply_homography(np.linalg.inv(res.homography), corners) - apply_homography(g, corners))
        e = float(np.sqrt((err ** 2).sum(axis=1)).max())
        worst = max(worst, e)
        good += e <= 2.0
    flagged = []
    for k in range(3):
        noise = np.random.default_rng(k).integers(0, 256, (740, 1080)).astype(np.uint8)
        r = aligner.align(noise)
        flagged.append(r.status == FLAGGED and r.attempts_used == 3)
    elapsed = time.perf_counter() - t0
    ok = good >= 198 and all(flagged) and elapsed <= 300
    criterion("AC1 alignment", ok,
              f"{good}/200 aligned within 2 px (need >= 198, worst {worst:.2f} px); "
              f"noise flagged after 3 attempts {sum(flagged)}/3; {elapsed:.0f} s (limit 300 s)")


# ---------------------------------------------------------------- 2


def _oracle_dlt(src, dst):
    """Hartley-normalized DLT solved through the eigen-decomposition of AᵀA."""

    def norm(p):
        c = p.mean(axis=0)
        s = math.sqrt(2) / np.mean(np.hypot(*(p - c).T))
        return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])

    ts, td = norm(src), norm(dst)
    rows = []
    for (x, y), (u, v) in zip(src @ ts[:2, :2].T + ts[:2, 2], dst @ td[:2, :2].T + td[:2, 2]):
        rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y, -u])
        rows.append([0, 0, 0, x, y, 1, -v * x, -v * y, -v])
    a = np.array(rows)
    w, vecs = np.linalg.eigh(a.T @ a)
    h = np.linalg.inv(td) @ vecs[:, 0].reshape(3, 3) @ ts
    return h / h[2, 2]


def _proj_err(h, src, dst):
    p = np.c_[src, np.ones(len(src))] @ h.T
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.hypot(p[:, 0] / p[:, 2] - dst[:, 0], p[:, 1] / p[:, 2] - dst[:, 1])
    return np.where(np.isfinite(e), e, np.inf)


def _cross(u, v):
    return u[0] * v[1] - u[1] * v[0]


def _bruteforce_ransac(src, dst, thr):
    best = None
    for combo in itertools.combinations(range(len(src)), 4):
        c = list(combo)
        s4, d4 = src[c], dst[c]
        if any(abs(_cross(p[j] - p[i], p[k] - p[i])) < 1e-6
               for p in (s4, d4) for i, j, k in itertools.combinations(range(4), 3)):
            continue
        h = homography_from_points(s4, d4)
        e = _proj_err(h, src, dst)
        inl = e <= thr
        key = (int(inl.sum()), -float(e[inl].sum()))
        if best is None or key > best[0]:
            best = (key, np.flatnonzero(inl))
    inliers = best[1]
    return inliers, _oracle_dlt(src[inliers], dst[inliers])


def test_ransac_oracle(criterion):
    rng = np.random.default_rng(2024)
    set_ok = fit_ok = 0
    worst = 0.0
    for inst in range(50):
        n = int(rng.integers(8, 13))
        n_out = int(rng.integers(0, 4))
        quad = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
        h_true = homography_from_points(quad * 400, quad * 400 + rng.normal(0, 25, (4, 2)))
        src = rng.uniform(0, 400, (n, 2))
        dst = apply_homography(h_true, src) + rng.normal(0, 0.5, (n, 2))
        out = rng.choice(n, n_out, replace=False)
        dst[out] += rng.choice([-1, 1], (n_out, 2)) * rng.uniform(40, 120, (n_out, 2))
        res = estimate_homography_ransac(src, dst, iterations=2000, threshold=6.0, seed=inst)
        o_inl, o_h = _bruteforce_ransac(src, dst, 6.0)
        same = np.array_equal(np.sort(res.inliers), o_inl)
        set_ok += same
        rel = np.linalg.norm(res.homography - o_h) / np.linalg.norm(o_h)
        worst = max(worst, rel)
        fit_ok += same and rel <= 1e-6
    criterion("AC2 RANSAC oracle", set_ok == 50 and fit_ok == 50,
              f"inlier sets equal {set_ok}/50; refit within rel. Frobenius 1e-6 {fit_ok}/50 (worst {worst:.1e})")


# ---------------------------------------------------------------- 3


def test_single_cell_segmentation(criterion):
    ok = attempted = failed = 0
    failures = []
    for i in range(200):
        doc = f"sc{i}"
        scan, truth = render_card(random_card_spec(doc_seed(5, doc), doc))
        attempted += 1
        try:
            fc = extract_first_cell(scan, "BUILDINGS", doc_id=doc)
        except Exception as exc:  # noqa: BLE001 - counted, never hidden
            failed += 1
            failures.append((doc, type(exc).__name__))
            continue
        iou = quad_iou(fc.region.quad, truth_quad(truth, "BUILDINGS", 0))
        if iou >= 0.9:
            ok += 1
        else:
            failures.append((doc, f"IoU {iou:.3f}"))
    accounted = ok + len(failures) == attempted
    criterion("AC3 single-cell", ok >= 198 and accounted,
              f"{ok}/200 first cells with IoU >= 0.9 (need >= 198); {failed} errors, "
              f"{len(failures) - failed} low-IoU, accounting exact={accounted}")


# ---------------------------------------------------------------- 4


def test_ocr_plumbing(criterion):
    checks = [normalize_text("") == 0, normalize_text("1,250") == 1250, normalize_text("$12.345") == 12345]
    counts_ok = True
    for n in (1, 10, 37, 100, 353, 1000, 12423):
        preds = [OcrPrediction("d", "C", i, "1", (i * 7919 % 1000) / 1000) for i in range(n)]
        for f, pct in ((0.90, 90), (0.95, 95), (0.99, 99), (1.0, 100)):
            kept, dropped = confidence_filter(preds, f)
            counts_ok &= len(kept) == -(-pct * n // 100) and len(kept) + len(dropped) == n
    rng = np.random.default_rng(77)
    be = GlyphCorrelationBackend()
    exact = 0
    for i in range(500):
        text = str(int(rng.integers(1, 10))) + "".join(str(d) for d in rng.integers(0, 10, int(rng.integers(0, 5))))
        cell = render_cell_text(text, salt_pepper=0.002, seed=i, perturb=True)
        noisy = np.clip(cell.astype(float) + rng.normal(0, 6, cell.shape), 0, 255).astype(np.uint8)
        exact += recognize(be, noisy).text == text
    ok = all(checks) and counts_ok and exact >= 475
    criterion("AC4 OCR plumbing", ok,
              f"normalization {sum(checks)}/3, ceil counts exact={counts_ok}, "
              f"built-in exact {exact}/500 (need >= 475)")


# ---------------------------------------------------------------- 5


def _valuation_split(seed):
    sp = generate_parcels(SynthParcelSpec(seed=seed, n=5000, noise_frac=0.10, missing_fraction=0.0))
    schema = default_schema()
    recs = [ParcelRecord("".join(c for c in pid if c.isalnum()).upper(), "hamilton", row)
            for pid, row in zip(sp.parcel_ids, sp.rows)]
    recs = clean_records(attach_labels(recs, sp.labels), schema)
    train, test = train_test_split([r for r in recs if r.label is not None], 0.2, seed)
    enc = fit_encoder(train, schema)
    return enc.transform(train), enc.transform(test)


def _r2_mape(forest, test):
    m = compute_metrics(np.column_stack([forest.predict(test), test.target]))
    return m.r2, m.mape


def test_forest_correctness(criterion):
    rng = np.random.default_rng(5)
    nodes = 0
    for _ in range(400):
        n, d = int(rng.integers(1, 9)), int(rng.integers(1, 4))
        x = rng.integers(0, 5, (n, d)).astype(float)
        y = rng.normal(size=n) if rng.random() < 0.5 else rng.integers(0, 4, n).astype(float)
        nodes += check_tree_against_oracle(build_tree(x, y, max_features="all"), x, y)
    t4 = preset("table4")
    t4_ok = (t4.n_estimators, t4.max_depth, t4.min_samples_split, t4.max_features) == (2500, 200, 4, "sqrt")

    train, test = _valuation_split(1)
    forest = fit_forest(train, preset("desk", seed=1))
    r2, mape = _r2_mape(forest, test)
    curve = []
    for size in (500, 1000, 2000, 4000):
        sub = train.take(np.arange(size))
        curve.append(_r2_mape(fit_forest(sub, preset("desk", seed=1)), test)[1])
    mono = all(b <= a for a, b in zip(curve, curve[1:]))
    ok = t4_ok and r2 >= 0.85 and mape <= 12.0 and mono
    criterion("AC5 forest", ok,
              f"tree oracle {nodes} nodes OK; table4 preset exact={t4_ok}; desk R2 {r2:.3f} (>= 0.85), "
              f"MAPE {mape:.2f}% (<= 12%); curve {[round(c, 2) for c in curve]} non-increasing={mono}")


# ---------------------------------------------------------------- 6


def test_metrics_oracle(criterion):
    r = compute_metrics([(110, 100), (190, 200), (330, 300)])
    hand = abs(r.mape - 25 / 3) <= 1e-9 and abs(r.r2 - 0.945) <= 1e-9 and abs(r.mpe - 5.0) <= 1e-9
    rng = np.random.default_rng(6)
    scale_ok = perm_ok = 0
    for _ in range(1000):
        n = int(rng.integers(2, 40))
        t = rng.uniform(1, 1e5, n)
        p = t * rng.uniform(0.5, 1.5, n)
        base = compute_metrics(np.column_stack([p, t]))
        c = rng.uniform(0.01, 100)
        sc = compute_metrics(np.column_stack([p * c, t * c]))
        perm = rng.permutation(n)
        pm = compute_metrics(np.column_stack([p[perm], t[perm]]))
        keys = ("mape", "rmspe", "mpe", "median_pe", "within_5", "within_10", "within_20")
        scale_ok += all(math.isclose(getattr(sc, k), getattr(base, k), rel_tol=1e-9, abs_tol=1e-9) for k in keys)
        perm_ok += all(math.isclose(getattr(pm, k), getattr(base, k), rel_tol=1e-9, abs_tol=1e-9) for k in keys)
    criterion("AC6 metrics", hand and scale_ok == 1000 and perm_ok == 1000,
              f"3-point MAPE {r.mape:.6f} R2 {r.r2:.6f} MPE {r.mpe:+.6f} (tol 1e-9, match={hand}); "
              f"scale-invariant {scale_ok}/1000, permutation-invariant {perm_ok}/1000")


# ---------------------------------------------------------------- 7


def test_adjustment(criterion):
    p = AdjustmentParams(3000, 1000, 2300, 800)
    ex = float(adjust_distribution([3085], p)[0])
    y = np.random.default_rng(7).uniform(50, 50000, 1000)
    rt = float(np.abs(adjust_distribution(adjust_distribution(y, p), p.inverse()) - y).max())
    ident = np.array_equal(adjust_distribution(y, AdjustmentParams(3000, 1000, 3000, 1000)), y)
    criterion("AC7 adjustment", ex == 2368.0 and rt <= 1e-9 and ident,
              f"3085 -> {ex!r} (exact 2368.0); round trip max err {rt:.1e} (<= 1e-9); equal-moment identity={ident}")


# ---------------------------------------------------------------- 8


def test_c2st_calibration(criterion):
    t0 = time.perf_counter()
    null_pass = 0
    alt_max = 0.0
    for seed in range(50):
        rng = np.random.default_rng([seed, 8])
        a = rng.normal(size=(150, 6))
        b = rng.normal(size=(150, 6))
        null_pass += c2st_mar_test(a, b, seed=seed).p_value > 0.05
        b[:, 0] += 3.0
        alt_max = max(alt_max, c2st_mar_test(a, b, seed=seed).p_value)
    elapsed = time.perf_counter() - t0
    ok = null_pass >= 45 and alt_max < 1e-6 and elapsed <= 180
    criterion("AC8 C2ST", ok,
              f"null p > 0.05 in {null_pass}/50 (need >= 45); shifted max p {alt_max:.1e} (< 1e-6); "
              f"{elapsed:.0f} s (limit 180 s)")


# ---------------------------------------------------------------- 9


def test_cost_model(criterion):
    r = cost_estimate(REFERENCE_SCENARIO)
    want = {"manual_entry_total": 24789.22, "scan_total": 35570.42, "ocr_method_total": 5568.10,
            "regression_method_total": 6816.49, "remote_ocr_total": 71.0}
    diffs = {k: getattr(r, k) - v for k, v in want.items()}
    ok = all(abs(d) <= 1.0 for d in diffs.values())
    criterion("AC9 cost", ok, "; ".join(f"{k} {getattr(r, k):,.2f} ({d:+.2f})" for k, d in diffs.items())
              + " (each within +/-1)")


# ---------------------------------------------------------------- 10


def _pipeline(src, out, retain):
    return main(["pipeline", "--in", str(src / "cards"), "--template", str(src / "template.png"),
                 "--layout", str(src / "layout.json"), "--retain", str(retain), "--truth", str(src / "truth"),
                 "--out", str(out), "--seed", "0"])


def _artifacts(out):
    blobs = {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.is_file() and p.name != "manifest.json"}
    man = json.loads((out / "manifest.json").read_text())
    man.pop("wall_time_s")
    man["artifacts"] = [a.replace(str(out), "<out>") for a in man["artifacts"]]
    blobs["manifest.json"] = json.dumps(man, sort_keys=True).encode()
    return blobs


def test_end_to_end(tmp_path, criterion):
    src = tmp_path / "src"
    assert main(["synth", "cards", "--n", "50", "--seed", "10", "--out", str(src)]) == 0
    rc = _pipeline(src, tmp_path / "r100", 1.0)
    man = json.loads((tmp_path / "r100/manifest.json").read_text())
    rate = man["extra"]["truth_check"]["exact_rate"]
    n_good = man["stages"]["filter"]["inputs"]
    counts = {}
    for f in (0.9, 0.99):
        out = tmp_path / f"r{f}"
        _pipeline(src, out, f)
        with (out / "predictions.csv").open() as fh:
            counts[f] = sum(1 for _ in fh) - 1
    counts_ok = all(counts[f] == math.ceil(round(f * 100) * n_good / 100) for f in counts)
    _pipeline(src, tmp_path / "rerun", 1.0)
    same = _artifacts(tmp_path / "r100") == _artifacts(tmp_path / "rerun")
    suite = time.perf_counter() - SUITE_T0
    ok = rc == 0 and rate >= 0.95 and counts_ok and same and suite <= 900
    criterion("AC10 end-to-end", ok,
              f"exact {rate:.4f} of {man['extra']['truth_check']['truth_cells']} cells (>= 0.95); kept "
              f"{counts[0.9]}/{counts[0.99]} of {n_good} at 0.9/0.99 (ceil match={counts_ok}); "
              f"rerun byte-identical={same}; suite so far {suite:.0f} s (limit 900 s)")
