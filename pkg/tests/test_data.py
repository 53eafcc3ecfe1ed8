import gzip
import struct

import numpy as np
import pytest

from dsbo.exceptions import BadMagic, CountMismatch, DimensionMismatch, TruncatedFile
from dsbo.problems import (
    Dataset,
    generate_synthetic,
    load_idx,
    read_dataset_csv,
    write_dataset_csv,
    write_idx,
)


def _fixture(tmp_path, gz=False):
    images = np.array([[[0, 0], [0, 0]], [[255, 255], [255, 255]]], dtype=np.uint8)
    labels = np.array([3, 7], dtype=np.uint8)
    suffix = ".gz" if gz else ""
    pi, pl = tmp_path / f"img{suffix}", tmp_path / f"lab{suffix}"
    write_idx(images, labels, pi, pl)
    return pi, pl


def _hand_written(tmp_path):
    """The same two-image fixture written byte by byte, independent of write_idx."""
    pi, pl = tmp_path / "hand-img", tmp_path / "hand-lab"
    pi.write_bytes(struct.pack(">IIII", 0x803, 2, 2, 2) + bytes([0] * 4 + [255] * 4))
    pl.write_bytes(struct.pack(">II", 0x801, 2) + bytes([3, 7]))
    return pi, pl


def test_idx_fixture_values(tmp_path):
    ds = load_idx(*_hand_written(tmp_path))
    np.testing.assert_array_equal(ds.features, [[0, 0, 0, 0], [1, 1, 1, 1]])
    np.testing.assert_array_equal(ds.labels, [3, 7])


@pytest.mark.parametrize("gz", [False, True])
def test_idx_writer_round_trip(tmp_path, gz):
    ds = load_idx(*_fixture(tmp_path, gz))
    np.testing.assert_array_equal(ds.features, [[0, 0, 0, 0], [1, 1, 1, 1]])
    hand = _hand_written(tmp_path)
    if not gz:
        assert _fixture(tmp_path)[0].read_bytes() == hand[0].read_bytes()


def test_idx_max_samples(tmp_path):
    assert len(load_idx(*_hand_written(tmp_path), max_samples=1)) == 1


def test_idx_swapped_magic(tmp_path):
    pi, pl = _hand_written(tmp_path)
    with pytest.raises(BadMagic):
        load_idx(pl, pi)


def test_idx_count_mismatch(tmp_path):
    pi, _ = _hand_written(tmp_path)
    pl = tmp_path / "short-lab"
    pl.write_bytes(struct.pack(">II", 0x801, 3) + bytes([1, 2, 3]))
    with pytest.raises(CountMismatch):
        load_idx(pi, pl)


def test_idx_truncated(tmp_path):
    pi, pl = _hand_written(tmp_path)
    pi.write_bytes(pi.read_bytes()[:-2])
    with pytest.raises(TruncatedFile):
        load_idx(pi, pl)


def test_idx_gzip_detected_by_suffix(tmp_path):
    pi, pl = _hand_written(tmp_path)
    gi = tmp_path / "img.gz"
    gi.write_bytes(gzip.compress(pi.read_bytes()))
    np.testing.assert_array_equal(load_idx(gi, pl).features, load_idx(pi, pl).features)


def test_dataset_validation():
    with pytest.raises(DimensionMismatch):
        Dataset(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(DimensionMismatch):
        Dataset(np.zeros(3), np.zeros(3))


def test_synthetic_deterministic():
    a = generate_synthetic(5, 3, 4, (20, 20, 10))
    b = generate_synthetic(5, 3, 4, (20, 20, 10))
    for sa, sb in zip(a, b):
        for da, db in zip(sa, sb):
            np.testing.assert_array_equal(da.features, db.features)
            np.testing.assert_array_equal(da.labels, db.labels)


def test_synthetic_separable_case():
    e1 = np.eye(4)[0]
    for train, val, test in generate_synthetic(0, 3, 4, (50, 50, 50), true_w=e1, noise=0.0):
        for ds in (train, val, test):
            np.testing.assert_array_equal(ds.labels, np.where(ds.features[:, 0] > 0, 1, -1))


def test_synthetic_feature_scale_grows_with_agent():
    splits = generate_synthetic(1, 4, 10, (2000, 10, 10))
    stds = [s[0].features.std() for s in splits]
    np.testing.assert_allclose(stds, [1, 2, 3, 4], rtol=0.05)


@pytest.mark.parametrize("seed", range(5))
def test_synthetic_label_balance(seed):
    train = generate_synthetic(seed, 1, 10, (1000, 1, 1))[0][0]
    assert 0.3 <= np.mean(train.labels == 1) <= 0.7


def test_csv_round_trip(tmp_path):
    ds = generate_synthetic(2, 1, 3, (15, 5, 5))[0][0]
    path = tmp_path / "agent.csv"
    write_dataset_csv(ds, path)
    assert path.read_text().splitlines()[0] == "x0,x1,x2,label"
    back = read_dataset_csv(path)
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.labels, ds.labels)
