"""Schema inference and the row <-> ambient-vector codec."""

import math

import numpy as np
import pandas as pd
import pytest
from sklearn.base import clone

from tabguide.encoding import TabularEncoder
from tabguide.errors import ConfigError, DecodeError, EncodeError, FitError
from tabguide.schema import (CATEGORICAL, CONTINUOUS, Column, TabularSchema,
                             infer_schema)


def _mixed_frame():
    return pd.DataFrame({
        "age": [20.0, 30.0, 40.0, 50.0],
        "job": ["a", "b", "a", "c"],
        "score": [1.0, 1.0, 3.0, 3.0],
    })


def test_schema_validation():
    with pytest.raises(ConfigError):
        Column("x", "text")
    with pytest.raises(ConfigError):
        Column("x", CATEGORICAL, cardinality=1)
    with pytest.raises(ConfigError):
        Column("x", CONTINUOUS, cardinality=3)
    with pytest.raises(ConfigError):
        TabularSchema((Column("x", CONTINUOUS), Column("x", CONTINUOUS)))


def test_schema_json_round_trip():
    schema = TabularSchema(
        (Column("a", CONTINUOUS), Column("b", CATEGORICAL, 3)),
        target_column="a")
    doc = schema.to_json_dict()
    assert TabularSchema.from_json_dict(doc) == schema


def test_infer_schema_kinds():
    schema = infer_schema(_mixed_frame())
    kinds = {c.name: c.kind for c in schema.columns}
    assert kinds == {"age": CONTINUOUS, "job": CATEGORICAL,
                     "score": CONTINUOUS}
    assert schema.column("job").cardinality == 3


def test_fit_population_statistics():
    frame = pd.DataFrame({"x": [1.0, 2.0, 3.0]})
    enc = TabularEncoder().fit(frame)
    assert enc.means_["x"] == 2.0
    assert enc.stds_["x"] == pytest.approx(math.sqrt(2.0 / 3.0), abs=1e-15)


def test_category_dictionary_sorted_and_deduplicated():
    frame = pd.DataFrame({"c": ["a", "b", "a"], "x": [1.0, 2.0, 3.0]})
    enc = TabularEncoder().fit(frame)
    assert enc.categories_["c"] == ("a", "b")


def test_constant_column_rejected():
    frame = pd.DataFrame({"x": [5.0, 5.0, 5.0]})
    with pytest.raises(FitError, match="'x'"):
        TabularEncoder().fit(frame)


def test_non_numeric_in_continuous_rejected():
    schema = TabularSchema((Column("x", CONTINUOUS),))
    frame = pd.DataFrame({"x": ["1.0", "oops", "3.0"]})
    with pytest.raises(FitError, match="oops"):
        TabularEncoder(schema=schema).fit(frame)


def test_encode_standardizes_and_one_hots():
    enc = TabularEncoder().fit(_mixed_frame())
    row = pd.DataFrame({"age": [35.0], "job": ["b"], "score": [2.0]})
    vec = enc.transform(row)
    assert vec.shape == (1, 1 + 3 + 1)
    # score has mean 2 and population std 1 -> 2.0 encodes to 0.0
    assert vec[0, enc.block_slice("score")][0] == 0.0
    assert np.array_equal(vec[0, enc.block_slice("job")], [0.0, 1.0, 0.0])


def test_round_trip_identity():
    frame = _mixed_frame()
    enc = TabularEncoder().fit(frame)
    back = enc.inverse_transform(enc.transform(frame))
    pd.testing.assert_frame_equal(back, frame[back.columns],
                                  check_dtype=False)


def test_encoded_training_split_is_standardized():
    frame = _mixed_frame()
    enc = TabularEncoder().fit(frame)
    Z = enc.transform(frame)
    cont = enc.continuous_ambient_mask()
    assert np.abs(Z[:, cont].mean(axis=0)).max() <= 1e-9
    assert np.abs(Z[:, cont].std(axis=0) - 1.0).max() <= 1e-9
    block = Z[:, enc.block_slice("job")]
    assert np.array_equal(np.unique(block), [0.0, 1.0])
    assert np.array_equal(block.sum(axis=1), np.ones(len(frame)))


def test_unseen_category_errors_with_column_and_value():
    enc = TabularEncoder().fit(_mixed_frame())
    bad = pd.DataFrame({"age": [25.0], "job": ["zz"], "score": [2.0]})
    with pytest.raises(EncodeError, match=r"'job'.*'zz'"):
        enc.transform(bad)


def test_missing_value_at_encode_time_errors():
    enc = TabularEncoder().fit(_mixed_frame())
    bad = pd.DataFrame({"age": [np.nan], "job": ["a"], "score": [2.0]})
    with pytest.raises(EncodeError, match="age"):
        enc.transform(bad)


def test_decode_argmax_and_tie_break():
    frame = pd.DataFrame({"c": ["a", "b", "c"], "x": [1.0, 2.0, 3.0]})
    enc = TabularEncoder().fit(frame)
    vec = np.zeros((2, 4))
    vec[0, enc.block_slice("c")] = [0.2, 0.7, 0.1]
    vec[1, enc.block_slice("c")] = [0.5, 0.5, 0.0]
    out = enc.inverse_transform(vec)
    assert out["c"].tolist() == ["b", "a"]


def test_decode_destandardizes():
    frame = pd.DataFrame({"x": [8.0, 10.0, 12.0, 10.0]})
    enc = TabularEncoder().fit(frame)
    # mean 10, population std sqrt(2); feed value scaled for std 2 oracle
    enc.stds_["x"] = 2.0
    enc.means_["x"] = 10.0
    out = enc.inverse_transform(np.array([[1.5]]))
    assert out["x"].iloc[0] == pytest.approx(13.0)


def test_decode_rejects_non_finite_and_bad_width():
    enc = TabularEncoder().fit(_mixed_frame())
    with pytest.raises(DecodeError):
        enc.inverse_transform(np.full((1, enc.dim_), np.nan))
    with pytest.raises(DecodeError):
        enc.inverse_transform(np.zeros((1, enc.dim_ + 1)))


def test_mask_to_ambient_examples():
    frame = pd.DataFrame({"x": [1.0, 2.0, 3.0], "c": ["a", "b", "c"]})
    enc = TabularEncoder().fit(frame)
    assert np.array_equal(enc.mask_to_ambient([1, 0])[0], [1, 0, 0, 0])
    assert np.array_equal(enc.mask_to_ambient([0, 0])[0], np.zeros(4))
    assert np.array_equal(enc.mask_to_ambient([1, 1])[0], np.ones(4))
    with pytest.raises(EncodeError):
        enc.mask_to_ambient([1, 0, 1])


def test_rows_with_missing_values_dropped_before_fit():
    frame = pd.DataFrame({
        "x": [1.0, np.nan, 3.0, 5.0],
        "c": ["a", "b", None, "b"],
    })
    enc = TabularEncoder().fit(frame)
    # only rows 0 and 3 survive
    assert enc.means_["x"] == 3.0
    assert enc.categories_["c"] == ("a", "b")


def test_fit_requires_two_complete_rows():
    frame = pd.DataFrame({"x": [1.0, np.nan], "c": ["a", "b"]})
    with pytest.raises(FitError):
        TabularEncoder().fit(frame)


def test_target_column_excluded_from_encoding():
    schema = TabularSchema(
        (Column("x", CONTINUOUS), Column("y", CATEGORICAL, 2)),
        target_column="y")
    frame = pd.DataFrame({"x": [1.0, 2.0], "y": ["p", "q"]})
    enc = TabularEncoder(schema=schema).fit(frame)
    assert enc.dim_ == 1
    assert enc.column_names() == ["x"]


def test_declared_cardinality_wider_than_observed():
    schema = TabularSchema(
        (Column("c", CATEGORICAL, 4), Column("x", CONTINUOUS)))
    frame = pd.DataFrame({"c": ["a", "b", "a"], "x": [1.0, 2.0, 3.0]})
    enc = TabularEncoder(schema=schema).fit(frame)
    assert enc.dim_ == 5
    vec = np.zeros((1, 5))
    vec[0, 3] = 1.0  # padding slot -> clamped to last observed category
    assert enc.inverse_transform(vec)["c"].iloc[0] == "b"


def test_observed_exceeding_declared_cardinality_rejected():
    schema = TabularSchema(
        (Column("c", CATEGORICAL, 2), Column("x", CONTINUOUS)))
    frame = pd.DataFrame({"c": ["a", "b", "z"], "x": [1.0, 2.0, 3.0]})
    with pytest.raises(FitError, match="'c'"):
        TabularEncoder(schema=schema).fit(frame)


def test_encoder_json_round_trip():
    enc = TabularEncoder().fit(_mixed_frame())
    doc = enc.to_json_dict()
    back = TabularEncoder.from_json_dict(doc)
    frame = _mixed_frame()
    assert np.array_equal(back.transform(frame), enc.transform(frame))


def test_sklearn_clone_compatibility():
    schema = infer_schema(_mixed_frame())
    enc = TabularEncoder(schema=schema)
    cloned = clone(enc)
    assert cloned.schema == schema
