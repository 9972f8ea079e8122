"""Exact k-nearest-neighbor tables over latent features.

Brute-force blocked O(N^2) search; deterministic tie-breaking (ascending
index). Tables are rebuilt on a fixed epoch schedule during training.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

_BLOCK = 1024
_MAGIC = b"KNNT"


@dataclass(frozen=True)
class NeighborTable:
    indices: np.ndarray  # (N, M) int32, row i excludes i
    metric: str          # 'cosine' or 'euclidean'
    built_at_epoch: int = 0

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int32))
        self.indices.setflags(write=False)


def build_neighbors(features: np.ndarray, m: int, metric: str = "cosine",
                    built_at_epoch: int = 0) -> NeighborTable:
    """Per row, the m most similar other rows, sorted by decreasing
    similarity; ties break by ascending index."""
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    if n <= m:
        raise ValueError(f"need at least m+1 = {m + 1} rows, got {n}")
    if metric not in ("cosine", "euclidean"):
        raise ValueError(f"unknown metric {metric!r}")

    indices = np.empty((n, m), dtype=np.int32)
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        block = features[start:stop]
        if metric == "cosine":
            score = block @ features.T          # maximize
        else:
            score = -(np.sum(block * block, axis=1)[:, None]
                      + np.sum(features * features, axis=1)[None, :]
                      - 2.0 * (block @ features.T))
        score[np.arange(start, stop) - start, np.arange(start, stop)] = -np.inf
        # lexsort: primary key decreasing score, secondary ascending index
        order = np.lexsort((np.arange(n)[None, :].repeat(stop - start, 0), -score), axis=1)
        indices[start:stop] = order[:, :m]
    return NeighborTable(indices=indices, metric=metric, built_at_epoch=built_at_epoch)


def refresh_due(epoch: int, period: int = 30) -> bool:
    """True iff the table should be rebuilt at this epoch (epoch mod period == 0)."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if period < 1:
        raise ValueError("period must be positive")
    return epoch % period == 0


def write_table(table: NeighborTable, path: str) -> None:
    """JSON header + little-endian int32 N x M payload."""
    header = json.dumps({
        "n": int(table.indices.shape[0]),
        "m": int(table.indices.shape[1]),
        "metric": table.metric,
        "built_at_epoch": table.built_at_epoch,
    }).encode()
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(table.indices.astype("<i4").tobytes())


def read_table(path: str) -> NeighborTable:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a neighbor-table file")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen))
        n, m = header["n"], header["m"]
        payload = f.read(4 * n * m)
        if len(payload) != 4 * n * m:
            raise ValueError(f"{path}: truncated payload")
        indices = np.frombuffer(payload, dtype="<i4").reshape(n, m)
    return NeighborTable(indices=indices, metric=header["metric"],
                         built_at_epoch=header["built_at_epoch"])
