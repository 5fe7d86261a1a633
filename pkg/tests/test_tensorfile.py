import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from lois_vqa.tensorfile import (
    FormatError, decode_archive, decode_tensor, encode_archive, encode_tensor, read_archive,
    read_tensor, write_archive, write_tensor,
)

float_arrays = hnp.arrays(
    st.sampled_from([np.float32, np.float64]),
    hnp.array_shapes(min_dims=0, max_dims=4, min_side=0, max_side=5),
    elements=st.floats(allow_nan=True, allow_infinity=True, width=32),
)


@settings(max_examples=100, deadline=None)
@given(float_arrays)
def test_tensor_round_trip_bit_exact(arr):
    back = decode_tensor(encode_tensor(arr))
    assert back.dtype == arr.dtype and back.shape == arr.shape
    assert back.tobytes() == arr.tobytes()


def test_layout_by_hand():
    buf = encode_tensor(np.array([[1.0, 2.0]], dtype=np.float32))
    assert buf == b"LOTF" + struct.pack("<HBB2Q", 1, 1, 2, 1, 2) + struct.pack("<2f", 1.0, 2.0)


def test_other_dtypes_stored_as_f64():
    back = decode_tensor(encode_tensor(np.array([1, 2, 3])))
    assert back.dtype == np.float64 and back.tolist() == [1.0, 2.0, 3.0]


def test_archive_round_trip(tmp_path, rng):
    tensors = {"a": rng.standard_normal((2, 3)), "β": rng.random(4).astype(np.float32), "s": np.float64(3.5)}
    path = tmp_path / "x.lota"
    write_archive(path, tensors, {"kind": "test", "n": 3})
    back, meta = read_archive(path)
    assert list(back) == ["a", "β", "s"]
    assert meta == {"kind": "test", "n": 3}
    for k in tensors:
        assert back[k].tobytes() == np.asarray(tensors[k]).tobytes()


def test_file_helpers(tmp_path):
    path = tmp_path / "t.lotf"
    arr = np.arange(6.0).reshape(2, 3)
    write_tensor(path, arr)
    assert np.array_equal(read_tensor(path), arr)
    assert path.read_bytes() == encode_tensor(arr)


@pytest.mark.parametrize("mutate,offset", [
    (lambda b: b"XOTF" + b[4:], 0),
    (lambda b: b[:4] + struct.pack("<H", 9) + b[6:], 4),
    (lambda b: b[:6] + b"\x07" + b[7:], 6),
    (lambda b: b[:-3], 16),
    (lambda b: b + b"\x00", 32),
    (lambda b: b[:10], 8),
])
def test_tensor_errors_report_offset(mutate, offset):
    buf = encode_tensor(np.array([1.0, 2.0]))  # header 6, dtype/rank 2, dims 8, payload 16
    with pytest.raises(FormatError) as exc:
        decode_tensor(mutate(buf))
    assert exc.value.offset == offset
    assert f"at byte {offset}" in str(exc.value)


def test_archive_bad_metadata_offset():
    buf = bytearray(encode_archive({}, {"k": 1}))
    buf[10] = ord("!")
    with pytest.raises(FormatError) as exc:
        decode_archive(bytes(buf))
    assert exc.value.offset == 10


def test_archive_truncated_name():
    buf = encode_archive({"name": np.zeros(1)})
    cut = buf[:len(encode_archive({})) + 2 + 2]
    with pytest.raises(FormatError, match="truncated name"):
        decode_archive(cut)
