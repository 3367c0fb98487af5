import numpy as np
import pytest

from linkfuse.dataset import PairSample
from linkfuse.errors import DataError
from linkfuse.tables import FeatureTable, read_features_csv, write_features_csv


def _pairs(n):
    return [PairSample(2 * i, 2 * i + 1, i % 2,
                       {m: True for m in "HTILE"}) for i in range(n)]


def test_shape_validation():
    with pytest.raises(DataError):
        FeatureTable("H", ("a",), np.zeros((3, 2)), np.ones(3, dtype=bool))
    with pytest.raises(DataError):
        FeatureTable("H", ("a", "b"), np.zeros((3, 2)), np.ones(4, dtype=bool))


def test_csv_round_trip_preserves_bits(tmp_path):
    rng = np.random.default_rng(0)
    pairs = _pairs(6)
    values = rng.normal(size=(6, 3))
    available = np.array([True, True, False, True, False, True])
    table = FeatureTable("T", ("x", "y", "z"), values, available)
    path = tmp_path / "feat.csv"
    write_features_csv(table, pairs, path)
    loaded = read_features_csv(path, pairs, "T")
    np.testing.assert_array_equal(loaded.available, available)
    np.testing.assert_array_equal(loaded.values[available], values[available])
    assert np.all(loaded.values[~available] == 0.0)
    assert loaded.names == ("x", "y", "z")


def test_read_rejects_unknown_pair(tmp_path):
    pairs = _pairs(2)
    table = FeatureTable("H", ("a",), np.ones((2, 1)), np.ones(2, dtype=bool))
    path = tmp_path / "feat.csv"
    write_features_csv(table, pairs, path)
    with pytest.raises(DataError, match="unknown pair"):
        read_features_csv(path, _pairs(1), "H")
