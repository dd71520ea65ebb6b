from .clean import (
    Label,
    ParcelRecord,
    attic_category,
    clean_record,
    clean_records,
    coerce_types,
    derive_features,
    group_categories,
    harmonize,
    impute_total_sqft,
    normalize_parcel_id,
    standardize_nulls,
)
from .design import DesignMatrix, Encoder, fit_encoder, one_hot_encode, split_indices, train_test_split
from .records import attach_labels, load_features_csv, load_labels_csv, write_features_csv, write_labels_csv
from .schema import CATEGORICAL, MISSING, NUMERIC, FeatureDef, FeatureSchema, default_schema

__all__ = [
    "Label", "ParcelRecord", "attic_category", "clean_record", "clean_records", "coerce_types",
    "derive_features", "group_categories", "harmonize", "impute_total_sqft", "normalize_parcel_id",
    "standardize_nulls", "DesignMatrix", "Encoder", "fit_encoder", "one_hot_encode", "split_indices",
    "train_test_split", "attach_labels", "load_features_csv", "load_labels_csv", "write_features_csv",
    "write_labels_csv", "CATEGORICAL", "MISSING", "NUMERIC", "FeatureDef", "FeatureSchema", "default_schema",
]
