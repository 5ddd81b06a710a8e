import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spike_spectra import io

json_values = st.recursive(st.none() | st.booleans() | st.integers() | st.floats(allow_nan=False, allow_infinity=False)
                           | st.text(max_size=5), lambda inner: st.lists(inner, max_size=4)
                           | st.dictionaries(st.text(max_size=4), inner, max_size=4), max_leaves=15)


@given(st.dictionaries(st.text(max_size=4), json_values, max_size=6))
def test_hash_independent_of_key_order(d):
    reordered = dict(reversed(list(d.items())))
    assert io.content_hash(d) == io.content_hash(reordered)


def test_numpy_and_nonfinite_values():
    doc = {"a": np.float64(1.5), "b": np.arange(3), "c": float("nan"), "d": np.bool_(True), "e": -math.inf}
    assert io.canonical_json(doc) == '{"a":1.5,"b":[0,1,2],"c":null,"d":true,"e":null}'


def test_json_roundtrip_and_schema(tmp_path):
    path = tmp_path / "x.json"
    io.write_json(path, {"v": [1.0, 2.0]}, "thing", config_hash="abc")
    doc = io.read_json(path, "thing")
    assert doc["v"] == [1.0, 2.0] and doc["config_hash"] == "abc"
    with pytest.raises(ValueError):
        io.read_json(path, "other")
    path.write_text(path.read_text().replace('"schema_version": 1', '"schema_version": 99'))
    with pytest.raises(ValueError):
        io.read_json(path)


def test_matrix_csv_is_exact(tmp_path):
    A = np.random.default_rng(2).standard_normal((5, 4)) * 1e-7
    path = tmp_path / "m.csv"
    io.write_matrix_csv(path, A)
    assert np.array_equal(io.read_matrix_csv(path), A)
    assert io.sidecar(path).name == "m.meta.json"
    assert io.file_hash(path) == io.file_hash(path)
