"""Evenly-distributed class centroids on the unit hypersphere.

C centroids in d dimensions (C <= d+1) form a regular simplex: every row
is unit norm, every pairwise dot product is -1/(C-1), and the rows sum to
zero. These are the fixed cluster targets the trainer pulls latent
features toward.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np


class InfeasibleGeometryError(ValueError):
    """Requested more equidistant centers than the dimension permits."""


@dataclass(frozen=True)
class PedccSet:
    """Immutable set of C unit-norm, mutually equidistant centers in R^d."""

    centers: np.ndarray  # (C, d), rows unit norm
    num_centers: int
    dim: int
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "centers", np.asarray(self.centers, dtype=np.float64))
        self.centers.setflags(write=False)


def _simplex_vertices(c: int) -> np.ndarray:
    """Vertices of the regular (c-1)-simplex on the unit sphere in R^(c-1).

    Standard closed form: one vertex at ones/sqrt(k), the rest offset along
    the coordinate axes; pairwise dots come out to exactly -1/(c-1).
    """
    k = c - 1
    v = np.empty((c, k), dtype=np.float64)
    v[0, :] = 1.0 / np.sqrt(k)
    offset = -(1.0 + np.sqrt(k + 1)) / k ** 1.5
    scale = np.sqrt((k + 1) / k)
    v[1:, :] = offset + scale * np.eye(k)
    return v


def _random_orthogonal(dim: int, seed: int) -> np.ndarray:
    """Haar-ish random orthogonal matrix via QR with sign-fixed diagonal."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def generate_pedcc(num_centers: int, dim: int, seed: Optional[int] = None) -> PedccSet:
    """Generate num_centers equidistant unit vectors in R^dim.

    Requires 2 <= num_centers <= dim+1. Deterministic when seed is None;
    with a seed, a random orthogonal rotation is applied (the Gram matrix
    is rotation-invariant, so all invariants still hold).
    """
    if num_centers < 2:
        raise ValueError(f"need at least 2 centers, got {num_centers}")
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    if num_centers > dim + 1:
        raise InfeasibleGeometryError(
            f"{num_centers} equidistant unit vectors do not exist in "
            f"{dim} dimensions (max is dim+1 = {dim + 1})"
        )
    centers = np.zeros((num_centers, dim), dtype=np.float64)
    centers[:, : num_centers - 1] = _simplex_vertices(num_centers)
    if seed is not None:
        centers = centers @ _random_orthogonal(dim, seed).T
    # renormalize rows to cancel accumulated rounding
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    return PedccSet(centers=centers, num_centers=num_centers, dim=dim, seed=seed)


def nearest_center(z: np.ndarray, pedcc: PedccSet) -> Tuple[int, float]:
    """Index and cosine of the center with maximal dot product to unit vector z.

    Ties break to the lowest index.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (pedcc.dim,):
        raise ValueError(f"z has shape {z.shape}, expected ({pedcc.dim},)")
    if abs(np.linalg.norm(z) - 1.0) > 1e-6:
        raise ValueError("z must be unit norm within 1e-6")
    dots = pedcc.centers @ z
    idx = int(np.argmax(dots))  # argmax returns the first (lowest) maximizer
    return idx, float(dots[idx])
