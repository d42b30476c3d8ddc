import gzip
import os
import struct

import numpy as np
import pytest

from gfcn.mnist import (
    IDXError,
    IMAGES_MAGIC,
    LABELS_MAGIC,
    default_dir,
    find_split,
    lattice_cover,
    load_idx,
    load_split,
    read_idx,
    subset,
)


def write_idx(path, arr, magic, compress=False, drop=0):
    arr = np.asarray(arr, dtype=np.uint8)
    raw = struct.pack(">I", magic) + struct.pack(f">{arr.ndim}I", *arr.shape) + arr.tobytes()
    raw = raw[: len(raw) - drop]
    opener = gzip.open if compress else open
    with opener(path, "wb") as fh:
        fh.write(raw)


@pytest.fixture
def tiny(tmp_path):
    imgs = np.arange(3 * 28 * 28).reshape(3, 28, 28) % 256
    labels = np.array([7, 0, 9])
    ip, lp = str(tmp_path / "i"), str(tmp_path / "l")
    write_idx(ip, imgs, IMAGES_MAGIC)
    write_idx(lp, labels, LABELS_MAGIC)
    return ip, lp, imgs, labels


def test_read_synthetic(tiny):
    ip, lp, imgs, labels = tiny
    X, y = load_idx(ip, lp)
    assert X.shape == (3, 784)
    np.testing.assert_allclose(X[1], imgs[1].ravel() / 255.0)
    np.testing.assert_array_equal(y, labels)


def test_gzip(tmp_path):
    p = str(tmp_path / "l.gz")
    write_idx(p, [1, 2, 3], LABELS_MAGIC, compress=True)
    np.testing.assert_array_equal(read_idx(p, LABELS_MAGIC), [1, 2, 3])


def test_bad_magic(tiny):
    ip, lp, *_ = tiny
    with pytest.raises(IDXError, match="magic"):
        read_idx(lp, IMAGES_MAGIC)


def test_truncated(tmp_path):
    p = str(tmp_path / "i")
    write_idx(p, np.zeros((2, 28, 28)), IMAGES_MAGIC, drop=5)
    with pytest.raises(IDXError, match="data bytes"):
        read_idx(p, IMAGES_MAGIC)


def test_count_mismatch(tmp_path, tiny):
    ip, *_ = tiny
    lp = str(tmp_path / "l2")
    write_idx(lp, [1, 2], LABELS_MAGIC)
    with pytest.raises(IDXError, match="3 images but 2 labels"):
        load_idx(ip, lp)


def test_label_range(tmp_path, tiny):
    ip, *_ = tiny
    lp = str(tmp_path / "l3")
    write_idx(lp, [1, 2, 12], LABELS_MAGIC)
    with pytest.raises(IDXError, match="label 12"):
        load_idx(ip, lp)


def test_missing_split(tmp_path):
    with pytest.raises(FileNotFoundError):
        find_split("test", str(tmp_path))


def test_subset_seeded():
    X = np.arange(100.0)[:, None]
    y = np.arange(100)
    a = subset(X, y, 10, 4)
    b = subset(X, y, 10, 4)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[0][:, 0], a[1])
    assert len(set(a[1])) == 10


def test_lattice_cover_is_complete():
    g, cover = lattice_cover()
    assert g.num_vertices == 784
    assert cover.epsilon == 1.0


@pytest.mark.skipif(not os.path.exists(os.path.join(default_dir(), "t10k-labels-idx1-ubyte"))
                    and not os.path.exists(os.path.join(default_dir(), "t10k-labels-idx1-ubyte.gz")),
                    reason="MNIST test split not available")
def test_real_test_split():
    X, y = load_split("test")
    assert X.shape == (10000, 784)
    assert X.min() >= 0.0 and X.max() <= 1.0
    assert set(np.unique(y)) == set(range(10))
