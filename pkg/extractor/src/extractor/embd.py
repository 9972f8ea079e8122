"""Writer for the EMBD container format consumed by the clustering engine.

Layout: magic b"EMBD", u16 version (=1), u8 flags (reserved, 0), u32 N,
u32 d, u32 V, then little-endian float32 payload (originals row-major,
then each view block in view-major order), then CRC32 of everything
before it. Labels go in a separate newline-delimited text file.
"""

import struct
import zlib

import numpy as np

_MAGIC = b"EMBD"
_VERSION = 1
_HEADER = struct.Struct("<4sHBIII")


def write_embd(data: np.ndarray, views, path: str) -> None:
    """data: (N, d) float32; views: (V, N, d) float32 or None."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2 or data.shape[0] < 1:
        raise ValueError("data must be (N, d) with N >= 1")
    v = 0
    if views is not None:
        views = np.asarray(views, dtype=np.float32)
        if views.ndim != 3 or views.shape[1:] != data.shape:
            raise ValueError("views must be (V, N, d) matching data")
        v = views.shape[0]
    n, d = data.shape
    buf = bytearray()
    buf += _HEADER.pack(_MAGIC, _VERSION, 0, n, d, v)
    buf += np.ascontiguousarray(data, dtype="<f4").tobytes()
    if v:
        buf += np.ascontiguousarray(views, dtype="<f4").tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    with open(path, "wb") as f:
        f.write(bytes(buf))


def write_labels(labels, path: str) -> None:
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d")
