import numpy as np
import pytest

from corticospike.errors import DataError, TensorFormatError
from corticospike.tensorio import MAGIC, read_tensor, write_tensor


def test_byte_layout_10x256_float(tmp_path):
    path = tmp_path / "t.aadt"
    write_tensor(path, np.ones((10, 256), dtype=np.float32))
    # 4 magic + 1 version + 1 dtype + 1 ndim + 2*4 dims + 10*256*4 payload
    assert path.stat().st_size == 4 + 1 + 1 + 1 + 8 + 10240 == 10255


def test_roundtrip_float32_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((7, 13, 3)).astype(np.float32)
    write_tensor(tmp_path / "x.aadt", x)
    y = read_tensor(tmp_path / "x.aadt")
    assert y.dtype == np.float32
    assert np.array_equal(
        x.view(np.uint32), y.view(np.uint32)
    )  # compare raw bits, not values


def test_roundtrip_int16(tmp_path):
    x = np.array([[-32768, 0, 32767]], dtype=np.int16)
    write_tensor(tmp_path / "i.aadt", x)
    y = read_tensor(tmp_path / "i.aadt")
    assert y.dtype == np.int16
    assert np.array_equal(x, y)


def test_roundtrip_randomized_shapes(tmp_path):
    rng = np.random.default_rng(42)
    for i in range(50):
        ndim = int(rng.integers(1, 4))
        shape = tuple(int(rng.integers(1, 9)) for _ in range(ndim))
        if rng.random() < 0.5:
            x = rng.standard_normal(shape).astype(np.float32)
        else:
            x = rng.integers(-1000, 1000, size=shape).astype(np.int16)
        path = tmp_path / f"r{i}.aadt"
        write_tensor(path, x)
        y = read_tensor(path)
        assert y.shape == x.shape and y.dtype == x.dtype
        assert np.array_equal(x, y)


def test_corrupted_magic_named(tmp_path):
    path = tmp_path / "bad.aadt"
    write_tensor(path, np.zeros((2, 2), dtype=np.float32))
    raw = bytearray(path.read_bytes())
    raw[:4] = b"BADT"
    path.write_bytes(bytes(raw))
    with pytest.raises(TensorFormatError) as err:
        read_tensor(path)
    assert err.value.field == "magic"
    assert "magic" in str(err.value)


def test_bad_version_named(tmp_path):
    path = tmp_path / "v.aadt"
    write_tensor(path, np.zeros(3, dtype=np.float32))
    raw = bytearray(path.read_bytes())
    raw[4] = 99
    path.write_bytes(bytes(raw))
    with pytest.raises(TensorFormatError) as err:
        read_tensor(path)
    assert err.value.field == "version"


def test_bad_dtype_code_named(tmp_path):
    path = tmp_path / "d.aadt"
    write_tensor(path, np.zeros(3, dtype=np.float32))
    raw = bytearray(path.read_bytes())
    raw[5] = 7
    path.write_bytes(bytes(raw))
    with pytest.raises(TensorFormatError) as err:
        read_tensor(path)
    assert err.value.field == "dtype"


def test_truncated_payload_named(tmp_path):
    path = tmp_path / "p.aadt"
    write_tensor(path, np.zeros((4, 4), dtype=np.float32))
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(TensorFormatError) as err:
        read_tensor(path)
    assert err.value.field == "payload"


def test_truncated_header_named(tmp_path):
    path = tmp_path / "h.aadt"
    path.write_bytes(MAGIC + bytes([1, 0, 4]) + b"\x01\x00")
    with pytest.raises(TensorFormatError) as err:
        read_tensor(path)
    assert err.value.field == "dims"


def test_nonfinite_rejected(tmp_path):
    with pytest.raises(DataError):
        write_tensor(tmp_path / "nan.aadt", np.array([np.nan], dtype=np.float32))


def test_int16_overflow_rejected(tmp_path):
    with pytest.raises(DataError):
        write_tensor(tmp_path / "big.aadt", np.array([70000], dtype=np.int64))
