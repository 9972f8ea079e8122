"""EMBD container format and dataset loading.

Layout: magic b"EMBD", u16 version (=1), u8 flags (reserved, 0), u32 N,
u32 d, u32 V, then little-endian float32 payload (originals row-major,
then each view block in view-major order), then CRC32 of everything
before it. Labels live in a separate newline-delimited text file so the
training path never touches them.
"""

import struct
import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

_MAGIC = b"EMBD"
_VERSION = 1
_HEADER = struct.Struct("<4sHBIII")


class CorruptFileError(ValueError):
    """File failed magic/version/size/CRC validation."""


@dataclass
class EmbeddingDataset:
    data: np.ndarray                      # (N, d_in) float32
    views: Optional[np.ndarray] = None    # (V, N, d_in) float32
    labels: Optional[np.ndarray] = None   # (N,) int
    provenance: str = ""

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2 or self.data.shape[0] < 1:
            raise ValueError("data must be (N, d) with N >= 1")
        if self.views is not None:
            self.views = np.asarray(self.views, dtype=np.float32)
            if self.views.ndim != 3 or self.views.shape[1:] != self.data.shape:
                raise ValueError("views must be (V, N, d) matching data")
            if self.views.shape[0] == 0:
                self.views = None
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.data.shape[0],):
                raise ValueError("labels must have length N")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d_in(self) -> int:
        return self.data.shape[1]

    @property
    def num_views(self) -> int:
        return 0 if self.views is None else self.views.shape[0]


def write_embd(dataset: EmbeddingDataset, path: str) -> None:
    n, d = dataset.data.shape
    v = dataset.num_views
    buf = bytearray()
    buf += _HEADER.pack(_MAGIC, _VERSION, 0, n, d, v)
    buf += np.ascontiguousarray(dataset.data, dtype="<f4").tobytes()
    if v:
        buf += np.ascontiguousarray(dataset.views, dtype="<f4").tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    with open(path, "wb") as f:
        f.write(bytes(buf))


def read_embd(path: str) -> EmbeddingDataset:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size + 4:
        raise CorruptFileError(f"{path}: too short to be an EMBD file")
    magic, version, _flags, n, d, v = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise CorruptFileError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise CorruptFileError(f"{path}: unsupported version {version}")
    if n == 0:
        raise CorruptFileError(f"{path}: empty dataset (N=0)")
    expected = _HEADER.size + 4 * n * d * (1 + v) + 4
    if len(raw) != expected:
        raise CorruptFileError(
            f"{path}: expected {expected} bytes, got {len(raw)}")
    (crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if crc != zlib.crc32(raw[:-4]):
        raise CorruptFileError(f"{path}: CRC mismatch")
    payload = np.frombuffer(raw, dtype="<f4", count=n * d * (1 + v),
                            offset=_HEADER.size)
    data = payload[: n * d].reshape(n, d).copy()
    views = payload[n * d:].reshape(v, n, d).copy() if v else None
    return EmbeddingDataset(data=data, views=views)


def read_labels(path: str) -> np.ndarray:
    """Newline-delimited nonnegative integers."""
    labels = np.loadtxt(path, dtype=np.int64, ndmin=1)
    if labels.ndim != 1:
        raise ValueError(f"{path}: expected one label per line")
    if labels.size and labels.min() < 0:
        raise ValueError(f"{path}: labels must be nonnegative")
    return labels


def write_labels(labels: np.ndarray, path: str) -> None:
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d")
