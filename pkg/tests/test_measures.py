import numpy as np
import pytest

from wassreg.errors import DataError
from wassreg.measures import (
    DiscreteMeasure,
    MeasureDataset,
    PairIndex,
    load_dataset,
    load_measure,
    read_pairs,
    sample_pairs,
    write_dataset,
)


def _write(path, rows):
    path.write_text("\n".join(",".join(str(v) for v in r) for r in rows) + "\n")


def test_uniform_default_and_line_input():
    m = DiscreteMeasure([0.0, 1.0, 3.0])
    assert m.supports.shape == (3, 1)
    np.testing.assert_array_equal(m.weights, np.full(3, 1 / 3))
    assert m.is_uniform


def test_weights_renormalized_within_tolerance():
    m = DiscreteMeasure([[0.0], [1.0]], [0.5 + 4e-7, 0.5])
    assert abs(m.weights.sum() - 1.0) <= 1e-12


@pytest.mark.parametrize(
    "supports, weights",
    [
        ([[0.0], [1.0]], [0.6, 0.6]),
        ([[0.0], [1.0]], [1.5, -0.5]),
        ([[0.0], [np.nan]], None),
        ([[0.0], [1.0]], [1.0]),
        (np.zeros((0, 2)), None),
    ],
)
def test_invalid_measures_rejected(supports, weights):
    with pytest.raises(DataError):
        DiscreteMeasure(supports, weights)


def test_arrays_are_read_only():
    m = DiscreteMeasure([[0.0, 1.0]])
    with pytest.raises(ValueError):
        m.supports[0, 0] = 5.0


def test_from_masses_normalizes():
    m = DiscreteMeasure.from_masses([[0, 0], [1, 1]], [2, 2])
    np.testing.assert_array_equal(m.weights, [0.5, 0.5])


def test_dataset_dimension_and_labels():
    a = DiscreteMeasure(np.zeros((2, 2)))
    b = DiscreteMeasure(np.zeros((2, 3)))
    with pytest.raises(DataError):
        MeasureDataset((a, b))
    with pytest.raises(DataError):
        MeasureDataset((a, a), labels=(1,))
    ds = MeasureDataset((a, a), labels=(0, 1))
    assert ds.dim == 2 and len(ds) == 2
    with pytest.raises(DataError):
        ds.check_pairs([PairIndex(0, 2)])
    with pytest.raises(DataError):
        ds.check_pairs([PairIndex(1, 1)], allow_self=False)


def test_load_two_clouds_uniform(tmp_path):
    _write(tmp_path / "a.csv", [(0, 0), (1, 0), (0, 1)])
    _write(tmp_path / "b.csv", [(2, 2), (3, 2), (2, 3)])
    (tmp_path / "m.csv").write_text("path,label\na.csv,x\nb.csv,y\n")
    ds = load_dataset(tmp_path / "m.csv")
    assert len(ds) == 2 and ds.dim == 2
    for m in ds.measures:
        np.testing.assert_allclose(m.weights, [1 / 3] * 3)
    assert ds.labels == ("x", "y")


def test_load_weights_file_normalized(tmp_path):
    _write(tmp_path / "a.csv", [(0, 0), (1, 1)])
    (tmp_path / "a.csv.w").write_text("2\n2\n")
    np.testing.assert_array_equal(load_measure(tmp_path / "a.csv").weights, [0.5, 0.5])


def test_load_mixed_dimension_rejected(tmp_path):
    _write(tmp_path / "a.csv", [(0, 0), (1, 1)])
    _write(tmp_path / "b.csv", [(0, 0, 0)])
    (tmp_path / "m.csv").write_text("path,label\na.csv,\nb.csv,\n")
    with pytest.raises(DataError, match="dimension"):
        load_dataset(tmp_path / "m.csv")


@pytest.mark.parametrize(
    "cloud, weights",
    [
        ("0,0\n1,x\n", None),
        ("0,0\n1\n", None),
        ("0,0\n1,1\n", "1\n"),
        ("0,0\n1,1\n", "0\n0\n"),
        ("0,0\n1,1\n", "1\n-1\n"),
    ],
)
def test_load_bad_files(tmp_path, cloud, weights):
    (tmp_path / "a.csv").write_text(cloud)
    if weights is not None:
        (tmp_path / "a.csv.w").write_text(weights)
    with pytest.raises(DataError):
        load_measure(tmp_path / "a.csv")


def test_load_missing_file(tmp_path):
    (tmp_path / "m.csv").write_text("path,label\nnope.csv,\n")
    with pytest.raises(DataError):
        load_dataset(tmp_path / "m.csv")


def test_write_then_load_is_bit_identical(tmp_path, rng):
    ms = (
        DiscreteMeasure(rng.normal(size=(4, 3))),
        DiscreteMeasure.from_masses(rng.normal(size=(5, 3)), rng.uniform(0.1, 1, 5)),
    )
    manifest = write_dataset(MeasureDataset(ms, ("a", "b")), tmp_path)
    first, second = load_dataset(manifest), load_dataset(manifest)
    for orig, a, b in zip(ms, first.measures, second.measures):
        assert a.same_as(b)
        np.testing.assert_array_equal(a.supports, orig.supports)
        np.testing.assert_allclose(a.weights, orig.weights, rtol=0, atol=1e-15)


def test_sample_pairs_all_unordered():
    assert len(sample_pairs(5, 5, 0, "all-unordered")) == 10
    assert len(sample_pairs(7, 2, 3, "all-unordered")) == 1
    pairs = sample_pairs(20, 6, 9, "all-unordered")
    keys = {(q.i, q.j) for q in pairs}
    assert len(keys) == 15 and all(i < j for i, j in keys)


def test_sample_pairs_deterministic_and_distinct():
    a = sample_pairs(30, 50, 4, "uniform-random")
    b = sample_pairs(30, 50, 4, "uniform-random")
    assert a == b
    assert len({(q.i, q.j) for q in a}) == 50
    assert all(0 <= q.i < q.j < 30 for q in a)


@pytest.mark.parametrize("m, mode", [(0, "all-unordered"), (6, "all-unordered"), (11, "uniform-random"), (2, "bogus")])
def test_sample_pairs_errors(m, mode):
    with pytest.raises(DataError):
        sample_pairs(5, m, 0, mode)


def test_read_pairs(tmp_path):
    (tmp_path / "p.csv").write_text("# comment\ni,j\n0,1\n2,3\n")
    assert read_pairs(tmp_path / "p.csv") == [PairIndex(0, 1), PairIndex(2, 3)]
    (tmp_path / "bad.csv").write_text("a,b\n0,1\n")
    with pytest.raises(DataError):
        read_pairs(tmp_path / "bad.csv")


def test_pair_key_unique():
    assert PairIndex(1, 2).key != PairIndex(2, 1).key
    assert PairIndex(0, 5).key == 5 and PairIndex(1, 0).key == 1 << 32
