"""Binary containers for arrays.

Single tensor (``.lotf``)::

    magic  b"LOTF"
    u16    version (1)
    u8     dtype tag: 1 = float32, 2 = float64
    u8     rank
    u64    dims[rank]
    ...    row-major payload, little-endian

Named archive (``.lota``)::

    magic  b"LOTA"
    u16    version (1)
    u32    metadata length, then that many bytes of UTF-8 JSON
    u32    tensor count
    per tensor: u16 name length, UTF-8 name, then a tensor record laid out
    like a single-tensor file without its magic and version

All integers are little-endian.
"""

import json
import struct

import numpy as np

TENSOR_MAGIC = b"LOTF"
ARCHIVE_MAGIC = b"LOTA"
VERSION = 1
DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
TAGS = {np.dtype("<f4"): 1, np.dtype("<f8"): 2}


class FormatError(ValueError):
    """Malformed container; ``offset`` is the byte position where parsing failed."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def _record(arr):
    arr = np.asarray(arr)
    dtype = np.dtype("<f4") if arr.dtype == np.float32 else np.dtype("<f8")
    arr = np.asarray(arr, dtype=dtype)  # ascontiguousarray would promote 0-d to 1-d
    head = struct.pack("<BB", TAGS[dtype], arr.ndim)
    head += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + arr.tobytes(order="C")


def encode_tensor(arr):
    return TENSOR_MAGIC + struct.pack("<H", VERSION) + _record(arr)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated {what}: need {n} bytes, {len(self.buf) - self.pos} left", self.pos)
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def header(self, magic):
        start = self.pos
        got = self.take(4, "magic")
        if got != magic:
            raise FormatError(f"bad magic {got!r}, expected {magic!r}", start)
        (version,) = self.unpack("<H", "version")
        if version != VERSION:
            raise FormatError(f"unsupported version {version}", self.pos - 2)

    def record(self):
        tag_at = self.pos
        tag, rank = self.unpack("<BB", "dtype/rank")
        if tag not in DTYPES:
            raise FormatError(f"unknown dtype tag {tag}", tag_at)
        dims = self.unpack(f"<{rank}Q", "dims")
        dtype = DTYPES[tag]
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        payload = self.take(count * dtype.itemsize, "payload")
        return np.frombuffer(payload, dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))

    def done(self):
        if self.pos != len(self.buf):
            raise FormatError(f"{len(self.buf) - self.pos} trailing bytes", self.pos)


def decode_tensor(buf):
    r = _Reader(bytes(buf))
    r.header(TENSOR_MAGIC)
    arr = r.record()
    r.done()
    return arr


def encode_archive(tensors, metadata=None):
    meta = json.dumps(metadata or {}, sort_keys=True).encode("utf-8")
    out = [ARCHIVE_MAGIC, struct.pack("<HI", VERSION, len(meta)), meta, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw + _record(arr))
    return b"".join(out)


def decode_archive(buf):
    """Return ``(tensors, metadata)``; tensors keep their stored order."""
    r = _Reader(bytes(buf))
    r.header(ARCHIVE_MAGIC)
    (mlen,) = r.unpack("<I", "metadata length")
    meta_at = r.pos
    try:
        metadata = json.loads(r.take(mlen, "metadata").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"metadata is not JSON: {exc}", meta_at) from None
    (count,) = r.unpack("<I", "tensor count")
    tensors = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H", "name length")
        name_at = r.pos
        try:
            name = r.take(nlen, "name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("tensor name is not UTF-8", name_at) from None
        tensors[name] = r.record()
    r.done()
    return tensors, metadata


def write_tensor(path, arr):
    with open(path, "wb") as f:
        f.write(encode_tensor(arr))


def read_tensor(path):
    with open(path, "rb") as f:
        return decode_tensor(f.read())


def write_archive(path, tensors, metadata=None):
    with open(path, "wb") as f:
        f.write(encode_archive(tensors, metadata))


def read_archive(path):
    with open(path, "rb") as f:
        return decode_archive(f.read())
