import numpy as np
import pytest

from onebit_gc.errors import IngestionError
from onebit_gc.idx import IMAGES_MAGIC, LABELS_MAGIC, load_idx_subset, read_idx, write_idx


@pytest.fixture
def idx_pair(tmp_path):
    rng = np.random.default_rng(0)
    labels = np.array([0, 1, 2, 2, 0, 3, 2, 0, 1, 2] * 3, dtype=np.uint8)
    images = rng.integers(0, 256, (labels.size, 4, 3), dtype=np.uint8)
    write_idx(tmp_path / "img.idx", images)
    write_idx(tmp_path / "lab.idx", labels)
    return tmp_path / "img.idx", tmp_path / "lab.idx", images, labels


def test_header_layout_is_big_endian(tmp_path):
    write_idx(tmp_path / "a", np.zeros((2, 3, 1), dtype=np.uint8))
    raw = (tmp_path / "a").read_bytes()
    assert raw[:16] == bytes.fromhex("00000803" "00000002" "00000003" "00000001")
    assert read_idx(tmp_path / "a", IMAGES_MAGIC).shape == (2, 3, 1)


def test_subset_selection(idx_pair):
    img, lab, images, labels = idx_pair
    ds = load_idx_subset(img, lab, 0, 2, 10, seed=3)
    assert ds.m == 10 and ds.feature_dim == 12
    assert set(np.unique(ds.y)) <= {-1.0, 1.0}
    assert 0.0 <= ds.X.min() and ds.X.max() <= 1.0
    eligible = np.flatnonzero((labels == 0) | (labels == 2))
    # every row is a scaled, row-major flattened eligible image with the right label
    for x, y in zip(ds.X, ds.y):
        hits = [i for i in eligible if np.array_equal(images[i].reshape(-1) / 255.0, x)]
        assert hits and (labels[hits[0]] == 0) == (y == -1.0)
    again = load_idx_subset(img, lab, 0, 2, 10, seed=3)
    np.testing.assert_array_equal(ds.X, again.X)
    other = load_idx_subset(img, lab, 0, 2, 10, seed=4)
    assert not np.array_equal(ds.X, other.X)


def test_whole_class_pair_keeps_file_order(idx_pair):
    img, lab, images, labels = idx_pair
    eligible = np.flatnonzero((labels == 1) | (labels == 3))
    ds = load_idx_subset(img, lab, 3, 1, eligible.size, seed=0)
    np.testing.assert_array_equal(ds.X, images[eligible].reshape(eligible.size, -1) / 255.0)
    np.testing.assert_array_equal(ds.y, np.where(labels[eligible] == 3, -1.0, 1.0))


def test_ingestion_errors(idx_pair, tmp_path):
    img, lab, _, _ = idx_pair
    with pytest.raises(IngestionError, match="magic"):
        load_idx_subset(lab, lab, 0, 2, 5, 0)
    with pytest.raises(IngestionError, match="does not occur"):
        load_idx_subset(img, lab, 0, 9, 5, 0)
    with pytest.raises(IngestionError, match="subset_m"):
        load_idx_subset(img, lab, 0, 2, 10**4, 0)
    with pytest.raises(IngestionError):
        load_idx_subset(img, lab, 2, 2, 5, 0)
    truncated = tmp_path / "t.idx"
    truncated.write_bytes(img.read_bytes()[:-1])
    with pytest.raises(IngestionError, match="payload"):
        read_idx(truncated, IMAGES_MAGIC)
    (tmp_path / "s").write_bytes(b"\x00\x00")
    with pytest.raises(IngestionError):
        read_idx(tmp_path / "s", LABELS_MAGIC)
    (tmp_path / "h").write_bytes(bytes.fromhex("00000803000000"))
    with pytest.raises(IngestionError, match="header"):
        read_idx(tmp_path / "h", IMAGES_MAGIC)
    short = tmp_path / "short_labels.idx"
    write_idx(short, np.zeros(3, dtype=np.uint8))
    with pytest.raises(IngestionError, match="labels"):
        load_idx_subset(img, short, 0, 2, 2, 0)
