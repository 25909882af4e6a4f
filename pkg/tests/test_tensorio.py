import numpy as np
import pytest

from embedloc import tensorio


def test_roundtrip_2d(tmp_path):
    arr = np.arange(12, dtype=np.float32).reshape(3, 4) / 7.0
    path = tmp_path / "a.emlt"
    tensorio.write_tensor(path, arr)
    back = tensorio.read_tensor(path)
    assert back.shape == (3, 4)
    np.testing.assert_array_equal(back, arr)


def test_roundtrip_1d_and_3d(tmp_path):
    for arr in (np.linspace(0, 1, 7), np.zeros((2, 3, 4))):
        path = tmp_path / "t.emlt"
        tensorio.write_tensor(path, arr)
        np.testing.assert_array_equal(tensorio.read_tensor(path),
                                      arr.astype(np.float32))


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.emlt"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(tensorio.TensorFormatError):
        tensorio.read_tensor(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.emlt"
    tensorio.write_tensor(path, np.ones((4, 4)))
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(tensorio.TensorFormatError):
        tensorio.read_tensor(path)
