import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ledgerlens.errors import DomainError, InsufficientDataError, JoinError, ParameterError
from ledgerlens.eval import (
    REFERENCE_SCENARIO,
    CostScenario,
    bias_audit,
    c2st_mar_test,
    compute_metrics,
    cost_estimate,
    format_metrics_table,
    metrics_full_and_trimmed,
    normal_p_value,
    pearson,
    trim_middle_90,
)


def oracle_metrics(pairs):
    """Plain-Python reference for the percent metrics."""
    p = [a for a, _ in pairs]
    t = [b for _, b in pairs]
    rel = [(a - b) / b for a, b in pairs]
    mean_t = sum(t) / len(t)
    ss_tot = sum((b - mean_t) ** 2 for b in t)
    return {
        "mape": 100 * sum(abs(r) for r in rel) / len(rel),
        "rmspe": 100 * math.sqrt(sum(r * r for r in rel) / len(rel)),
        "mpe": 100 * sum(rel) / len(rel),
        "median_pe": 100 * statistics.median(rel),
        "r2": None if ss_tot == 0 else 1 - sum((a - b) ** 2 for a, b in zip(p, t)) / ss_tot,
        "mae": sum(abs(a - b) for a, b in zip(p, t)) / len(t),
    }


def test_perfect_predictions():
    r = compute_metrics([(100, 100), (250, 250), (400, 400)])
    assert r.mape == 0 and r.r2 == 1 and r.within_5 == 1


def test_three_point_fixture():
    r = compute_metrics([(110, 100), (190, 200), (330, 300)])
    assert r.mape == pytest.approx(25 / 3, abs=1e-9)
    assert r.r2 == pytest.approx(0.945, abs=1e-9)
    assert r.mpe == pytest.approx(5.0, abs=1e-9)
    assert r.median_pe == pytest.approx(10.0, abs=1e-9)
    # |error| of 10%, 5% and 10%; the band is closed
    assert r.within_10 == 1.0
    assert r.within_5 == pytest.approx(1 / 3)


def test_metric_errors():
    with pytest.raises(InsufficientDataError):
        compute_metrics([])
    with pytest.raises(DomainError):
        compute_metrics([(1, 0)])
    assert compute_metrics([(1, 5), (2, 5)]).r2 is None


def test_trim_examples():
    pairs = [(v, v) for v in range(1, 101)]
    kept, (lo, hi) = trim_middle_90(pairs)
    assert lo == pytest.approx(5.95) and hi == pytest.approx(95.05)
    assert len(kept) == 90
    same = [(1, 7)] * 30
    assert len(trim_middle_90(same)[0]) == 30
    with pytest.raises(InsufficientDataError):
        trim_middle_90(pairs[:10])
    both = metrics_full_and_trimmed(pairs)
    assert both["middle_90"].n == 90 and both["middle_90"].trim_bounds == (lo, hi)
    assert "Median PE" in format_metrics_table(both)


def test_trim_fraction_on_continuous_data():
    rng = np.random.default_rng(8)
    for _ in range(200):
        n = int(rng.integers(200, 2000))
        t = rng.lognormal(8, 1, n)
        kept, _ = trim_middle_90(np.column_stack([t, t]))
        assert 0.89 * n <= len(kept) <= 0.91 * n


pair = st.tuples(st.floats(1.0, 1e6), st.floats(1.0, 1e6))


@settings(max_examples=1000, deadline=None)
@given(st.lists(pair, min_size=2, max_size=40), st.floats(0.01, 100.0))
def test_scale_invariance(pairs, c):
    a = compute_metrics(pairs)
    b = compute_metrics([(p * c, t * c) for p, t in pairs])
    for k in ("mape", "rmspe", "mpe", "median_pe"):
        assert getattr(b, k) == pytest.approx(getattr(a, k), rel=1e-9, abs=1e-9)
    if a.r2 is not None and b.r2 is not None:
        assert b.r2 == pytest.approx(a.r2, rel=1e-6, abs=1e-6)


@settings(max_examples=1000, deadline=None)
@given(st.lists(pair, min_size=1, max_size=40), st.randoms(use_true_random=False))
def test_permutation_invariance_and_oracle(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    a, b = compute_metrics(pairs), compute_metrics(shuffled)
    want = oracle_metrics(pairs)
    for k in ("mape", "rmspe", "mpe", "median_pe", "mae"):
        assert getattr(b, k) == pytest.approx(getattr(a, k), rel=1e-9, abs=1e-9)
        assert getattr(a, k) == pytest.approx(want[k], rel=1e-9, abs=1e-9)
    for k in ("within_5", "within_10", "within_20"):
        assert getattr(a, k) == getattr(b, k)


def _audit_fixture(n, rng):
    pids = [f"P{i}" for i in range(n)]
    truths = rng.uniform(1000, 5000, n)
    return pids, truths


def test_bias_independent_and_linear():
    rng = np.random.default_rng(0)
    pids, truths = _audit_fixture(500, rng)
    preds = truths * (1 + rng.normal(0, 0.1, 500))
    tracts = {f"T{i}": {"income": float(rng.normal()), "flat": 1.0} for i in range(500)}
    pt = {p: f"T{i}" for i, p in enumerate(pids)}
    rep = bias_audit(pids, preds, truths, pt, tracts)
    assert abs(rep.correlations["income"]) < 0.1
    assert rep.correlations["flat"] is None
    ape = np.abs(preds - truths) / truths
    lin = {f"T{i}": {"v": float(3 * ape[i] + 2)} for i in range(500)}
    assert bias_audit(pids, preds, truths, pt, lin).correlations["v"] == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(JoinError):
        bias_audit(["ZZ"], [1.0], [1.0], pt, tracts)


def test_pearson_zero_variance():
    assert pearson([1, 1, 1], [1, 2, 3]) is None
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)


def test_c2st_p_value_formula():
    assert normal_p_value(0.5, 100) == 0.5
    assert normal_p_value(0.6, 100) == pytest.approx(0.5 * math.erfc(2 / math.sqrt(2)))


def test_c2st_separates_and_balances():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(150, 4))
    b = rng.normal(size=(150, 4))
    b[:, 0] += 3
    hp_small = None
    res = c2st_mar_test(a, b, seed=0, hp=hp_small)
    assert res.p_value < 1e-6 and res.n_test == 150
    null = c2st_mar_test(a, rng.normal(size=(400, 4)), seed=0)
    assert null.n_test == 150  # larger group subsampled to the smaller
    with pytest.raises(InsufficientDataError):
        c2st_mar_test(a[:10], b)
    with pytest.raises(ValueError):
        c2st_mar_test(a, b, method="bogus")


def test_c2st_permutation_method():
    from ledgerlens.model import HyperParams

    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(60, 3)), rng.normal(size=(60, 3)) + [4, 0, 0]
    res = c2st_mar_test(a, b, method="permutation", n_permutations=19, hp=HyperParams(n_estimators=20))
    assert res.method == "permutation" and res.p_value == pytest.approx(1 / 20)


def test_cost_reference_scenario():
    r = cost_estimate(REFERENCE_SCENARIO)
    assert r.manual_entry_total == pytest.approx(24789.22, abs=1)
    assert r.scan_total == pytest.approx(35570.42, abs=0.01)
    assert r.per_doc_scan == pytest.approx(0.10049, abs=5e-6)
    assert r.development == pytest.approx(4698.12, abs=0.01)
    assert r.ocr_labeling == pytest.approx(869.98, abs=1)
    assert r.ocr_method_total == pytest.approx(5568.10, abs=1)
    assert r.regression_method_total == pytest.approx(6816.49, abs=1)
    assert r.remote_ocr_total == pytest.approx(71, abs=1)
    assert "Manual entry, total" in r.to_text()


def test_cost_scenario_validation_and_roundtrip():
    with pytest.raises(ParameterError):
        CostScenario(labeled_per_hour_basis=(0, 1.0))
    with pytest.raises(ParameterError):
        CostScenario(entry_wage=-1)
    s = CostScenario(n_documents=10, n_cells=40)
    assert CostScenario.from_dict(s.to_dict()) == s
    assert cost_estimate(s).remote_ocr_total == pytest.approx(40 * 0.0002)
