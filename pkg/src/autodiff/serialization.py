"""AQAT binary tensor records.

Layout: magic ``AQAT``, u8 version (1), u8 dtype code (1=f32, 2=f64),
u32 LE ndims, ndims x u32 LE dims, then raw little-endian values.
"""
import struct
from typing import Tuple

import numpy as np

from ..utils.error_handler import FormatError

MAGIC = b'AQAT'
VERSION = 1
DTYPE_CODES = {1: np.dtype('<f4'), 2: np.dtype('<f8')}
CODE_FOR_DTYPE = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}


def encode_array(array: np.ndarray) -> bytes:
    """Serialize a float32/float64 array as one AQAT record."""
    array = np.asarray(array)
    code = CODE_FOR_DTYPE.get(array.dtype.newbyteorder('='))
    if code is None:
        raise TypeError(f"AQAT stores float32/float64 only, got {array.dtype}")
    if array.ndim == 0:
        array = array.reshape(1)

    header = MAGIC + struct.pack('<BBI', VERSION, code, array.ndim)
    header += struct.pack(f'<{array.ndim}I', *array.shape)
    return header + np.ascontiguousarray(array, dtype=DTYPE_CODES[code]).tobytes()


def decode_array(buffer: bytes, offset: int = 0) -> Tuple[np.ndarray, int]:
    """Decode one AQAT record starting at ``offset``.

    Returns:
        (array, offset just past the record)

    Raises:
        FormatError: bad magic/version/dtype or truncated data
    """
    def take(count: int) -> bytes:
        nonlocal offset
        if offset + count > len(buffer):
            raise FormatError(f"truncated AQAT record: need {count} bytes", offset)
        chunk = buffer[offset:offset + count]
        offset += count
        return chunk

    start = offset
    if take(4) != MAGIC:
        raise FormatError("bad AQAT magic", start)

    version, code, ndims = struct.unpack('<BBI', take(6))
    if version != VERSION:
        raise FormatError(f"unsupported AQAT version {version}", start + 4)
    if code not in DTYPE_CODES:
        raise FormatError(f"unknown AQAT dtype code {code}", start + 5)
    if ndims < 1:
        raise FormatError("AQAT record has no dimensions", start + 6)

    dims_at = offset
    dims = struct.unpack(f'<{ndims}I', take(4 * ndims))
    if any(d < 1 for d in dims):
        raise FormatError(f"AQAT dimensions must be >= 1, got {list(dims)}", dims_at)

    dtype = DTYPE_CODES[code]
    count = int(np.prod(dims))
    raw = take(count * dtype.itemsize)
    array = np.frombuffer(raw, dtype=dtype).reshape(dims).astype(dtype.newbyteorder('='))
    return array, offset

