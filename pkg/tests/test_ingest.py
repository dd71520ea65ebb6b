import numpy as np
import pytest

from ledgerlens.errors import InsufficientDataError, InvalidIdentifierError, SchemaError
from ledgerlens.ingest import (
    CATEGORICAL,
    MISSING,
    NUMERIC,
    DesignMatrix,
    Encoder,
    FeatureDef,
    FeatureSchema,
    Label,
    ParcelRecord,
    attic_category,
    clean_record,
    default_schema,
    group_categories,
    harmonize,
    impute_total_sqft,
    load_features_csv,
    load_labels_csv,
    normalize_parcel_id,
    one_hot_encode,
    standardize_nulls,
    train_test_split,
    write_labels_csv,
)


def test_parcel_ids():
    assert normalize_parcel_id("12", "a-3", "045", "") == "12A3045"
    assert normalize_parcel_id("ABC123") == "ABC123"
    with pytest.raises(InvalidIdentifierError):
        normalize_parcel_id("--", "..")
    with pytest.raises(InvalidIdentifierError):
        ParcelRecord("ab-1", "hamilton")


def test_nulls():
    out = standardize_nulls({"grade": "  ", "value": "New", "other": "A"})
    assert out == {"grade": None, "value": None, "other": "A"}


def test_impute_total():
    comps = ("sqft_attic", "sqft_floor1", "sqft_floor2")
    got = impute_total_sqft({"sqft_total": 0.0, "sqft_floor1": 800.0, "sqft_attic": 200.0, "sqft_floor2": None}, comps)
    assert got["sqft_total"] == 1000.0
    same = {"sqft_total": 1500.0, "sqft_floor1": 800.0}
    assert impute_total_sqft(same, comps) == same
    assert impute_total_sqft({"sqft_total": 0.0, "sqft_floor1": 0.0, "sqft_attic": 0.0}, comps) is None


def test_grouping_and_attic():
    g = {"grade": {"Outstanding": "Exceptional"}}
    assert group_categories({"grade": "Outstanding"}, g)["grade"] == "Exceptional"
    assert group_categories({"grade": "Average"}, g)["grade"] == "Average"
    assert attic_category(0, None) == "No attic"
    assert attic_category(100, None) == "Partial attic"
    assert attic_category(100, "1") == "Full attic"


def _hamilton_fields(**kw):
    base = {
        "sqft_attic": "0", "sqft_basement": "400", "sqft_floor1": "900", "sqft_floor2": "600",
        "sqft_half_floor": "0", "sqft_total": "1500", "stories": "2", "style": "Colonial",
        "grade": "Outstanding", "exterior_wall": "Brick", "basement_type": "Full", "heating": "Forced Air",
        "air_conditioning": "None", "total_rooms": "7", "full_baths": "1", "half_baths": "1",
        "fireplaces": "1", "garage_type": "Attached", "garage_capacity": "2", "land_use": "510",
        "neighborhood": "N03", "n_subparcels": "1", "year_built": "1921",
    }
    base.update(kw)
    return base


def test_clean_record_is_idempotent():
    schema = default_schema()
    rec = ParcelRecord("P1", "hamilton", _hamilton_fields())
    once = clean_record(rec, schema)
    assert once.features["grade"] == "Exceptional"
    assert once.features["grade_numeric"] == 9.0
    assert once.features["attic_category"] == "No attic"
    assert clean_record(once, schema) == once
    torn = ParcelRecord("P2", "hamilton", _hamilton_fields(
        sqft_total="0", sqft_floor1="0", sqft_floor2="0", sqft_basement="0"))
    assert clean_record(torn, schema) is None


def test_harmonize_shared_tier():
    schema = default_schema()
    ham = clean_record(ParcelRecord("P1", "hamilton", _hamilton_fields()), schema)
    [h] = harmonize([ham], schema, "shared")
    assert "sqft_floor2" not in h.features
    assert list(h.features) == [n for n in schema.names if n in schema.tiers["shared"]]
    fr = ParcelRecord("F1", "franklin", {**{k: ham.features[k] for k in schema.tiers["shared"]}, "grade": "A+2"})
    [f] = harmonize([fr], schema, "shared")
    assert f.features["grade"] == "Exceptional"
    assert harmonize([h], schema, "shared") == [h]
    with pytest.raises(SchemaError):
        harmonize([ParcelRecord("X1", "hamilton", {"grade": "Average"})], schema, "shared")


def _tiny_schema():
    return FeatureSchema((FeatureDef("g", CATEGORICAL, ("A", "B", MISSING)), FeatureDef("sqft", NUMERIC)))


def test_one_hot_examples():
    schema = _tiny_schema()
    train = [ParcelRecord(f"R{i}", "h", {"g": "A", "sqft": v}) for i, v in enumerate([1000.0, 1200.0, 1400.0])]
    mat, enc = one_hot_encode(train, schema)
    assert mat.columns == ("g=A", "g=B", "g=missing", "sqft")
    assert mat.values[0].tolist() == [1, 0, 0, 1000]
    test = [ParcelRecord("T1", "h", {"g": "Z", "sqft": None})]
    row = enc.transform(test).values[0]
    assert row.tolist() == [0, 0, 1, 1200]
    assert mat.groups == ("g", "g", "g", "sqft")


def test_encoder_sidecar_roundtrip(tmp_path):
    schema = _tiny_schema()
    recs = [ParcelRecord("R1", "h", {"g": "B", "sqft": 5.0}, Label(10))]
    mat, enc = one_hot_encode(recs, schema)
    again = Encoder.from_sidecar(enc.sidecar())
    assert np.array_equal(again.transform(recs).values, mat.values)
    p = tmp_path / "m.csv"
    mat.save_csv(p)
    back = DesignMatrix.load_csv(p, enc.sidecar())
    assert np.array_equal(back.values, mat.values) and np.array_equal(back.target, mat.target)


def test_split_sizes_and_determinism():
    ids = [f"P{i}" for i in range(10452)]
    m = DesignMatrix(tuple(ids), ("x",), np.zeros((10452, 1)))
    tr, te = train_test_split(m, 0.20, seed=3)
    assert (tr.n, te.n) == (8361, 2091)
    assert not set(tr.row_ids) & set(te.row_ids)
    tr2, _ = train_test_split(m, 0.20, seed=3)
    assert tr2.row_ids == tr.row_ids
    with pytest.raises(InsufficientDataError):
        train_test_split(list(range(4)))


def test_design_matrix_rejects_nan():
    with pytest.raises(SchemaError):
        DesignMatrix(("a",), ("x",), np.array([[np.nan]]))


def test_csv_loaders(tmp_path):
    f = tmp_path / "features.csv"
    f.write_text("parcel_id,grade,sqft_total\n012-0001-0003-00,  ,1200\n012-0001-0003-00,A,1\n,B,3\n")
    recs = load_features_csv(f)
    assert [r.parcel_id for r in recs] == ["0120001000300"]
    assert recs[0].features["grade"] == "  "
    lab = tmp_path / "labels.csv"
    lab.write_text("parcel_id,value_dollars,year\nA1,3000,\nA2,New,\nA3,0,\nA4,1500,1940\n")
    got = load_labels_csv(lab)
    assert got == {"A1": Label(3000, 1933)}
    out = tmp_path / "round.csv"
    write_labels_csv(out, got)
    assert load_labels_csv(out) == got
    bad = tmp_path / "bad.csv"
    bad.write_text("id,grade\n")
    with pytest.raises(SchemaError):
        load_features_csv(bad)
