"""EMLT binary tensor files.

Layout (all little-endian):
    magic   4 bytes  b"EMLT"
    version u16      currently 1
    dtype   u16      1 = float32
    ndim    u16
    dims    ndim * u64
    payload row-major little-endian values
"""

import struct

import numpy as np

MAGIC = b"EMLT"
VERSION = 1
DTYPE_F32 = 1

_DTYPE_CODES = {DTYPE_F32: np.dtype("<f4")}


class TensorFormatError(ValueError):
    pass


def write_tensor(path, array):
    """Write a numpy array to an EMLT file (stored as float32)."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HHH", VERSION, DTYPE_F32, arr.ndim))
        fh.write(struct.pack("<%dQ" % arr.ndim, *arr.shape))
        fh.write(arr.tobytes())


def read_tensor(path):
    """Read an EMLT file back into a numpy array."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise TensorFormatError("bad magic %r in %s" % (magic, path))
        version, dtype_code, ndim = struct.unpack("<HHH", fh.read(6))
        if version != VERSION:
            raise TensorFormatError("unsupported version %d" % version)
        if dtype_code not in _DTYPE_CODES:
            raise TensorFormatError("unknown dtype code %d" % dtype_code)
        dims = struct.unpack("<%dQ" % ndim, fh.read(8 * ndim))
        dtype = _DTYPE_CODES[dtype_code]
        count = int(np.prod(dims)) if ndim else 1
        payload = fh.read(count * dtype.itemsize)
        if len(payload) != count * dtype.itemsize:
            raise TensorFormatError("truncated payload in %s" % path)
        return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
