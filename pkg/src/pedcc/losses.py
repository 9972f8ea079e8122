"""The four loss terms and their exact gradients w.r.t. latent features.

loss1: MMD between the latent batch [Z; Z_aug] and the fixed centers,
       with a Gaussian kernel (three-term estimator, implemented literally,
       including the biased cross term -- no clamping, may go negative).
loss2: squared cosine distance between each sample and its augmented view.
loss3: squared cosine distance between each sample and its M neighbors.
loss4: squared cosine distance between each sample and its nearest center.
Composite: loss1 + l1*loss2 + l2*loss3 + l3*loss4.

All gradients are taken w.r.t. the latent rows as free variables; the
unit-normalization Jacobian is the projection head's responsibility.
Kernel sums use numpy's native (pairwise) summation order, so results are
deterministic for a fixed input.
"""

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .geometry import PedccSet


class DegenerateBandwidthError(ValueError):
    """Median-bandwidth heuristic hit an all-identical batch."""


@dataclass(frozen=True)
class LossWeights:
    """Weights (lambda1, lambda2, lambda3) of Eq.-style composite loss.

    The MMD term carries an implicit weight of 1.
    """

    lambda1: float = 9.0
    lambda2: float = 2.0
    lambda3: float = 2.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian kernel bandwidth: a positive number or the token 'median'."""

    sigma: Union[float, str] = "median"

    def __post_init__(self):
        if isinstance(self.sigma, str):
            if self.sigma != "median":
                raise ValueError(f"unknown bandwidth token {self.sigma!r}")
        elif not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")

    def resolve(self, latents: np.ndarray) -> float:
        """Numeric bandwidth; 'median' uses the median pairwise distance."""
        if not isinstance(self.sigma, str):
            return float(self.sigma)
        d2 = _sq_dists(latents, latents)
        iu = np.triu_indices(latents.shape[0], k=1)
        med = float(np.median(np.sqrt(np.maximum(d2[iu], 0.0))))
        if med <= 0.0:
            raise DegenerateBandwidthError(
                "median pairwise distance is zero (all latent rows identical)"
            )
        return med


@dataclass
class LatentBatch:
    """Latent features of a batch: originals, augmented views, neighbors."""

    z: np.ndarray       # (N, d)
    z_aug: np.ndarray   # (N, d)
    z_nbr: np.ndarray   # (N, M, d); M may be 0

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.float64)
        self.z_aug = np.asarray(self.z_aug, dtype=np.float64)
        self.z_nbr = np.asarray(self.z_nbr, dtype=np.float64)
        n, d = self.z.shape
        if self.z_aug.shape != (n, d):
            raise ValueError("z and z_aug shapes differ")
        if self.z_nbr.ndim != 3 or self.z_nbr.shape[0] != n or self.z_nbr.shape[2] != d:
            raise ValueError("z_nbr must be (N, M, d)")
        for arr in (self.z, self.z_aug, self.z_nbr.reshape(-1, d) if self.z_nbr.size else self.z):
            norms = np.linalg.norm(arr, axis=-1)
            if np.any(np.abs(norms - 1.0) > 1e-6):
                raise ValueError("latent rows must be unit norm within 1e-6")

    @property
    def batch_size(self) -> int:
        return self.z.shape[0]

    @property
    def neighbor_count(self) -> int:
        return self.z_nbr.shape[1]


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, (len(a), len(b))."""
    d2 = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def gaussian_kernel(x: np.ndarray, y: np.ndarray, sigma: float) -> float:
    """exp(-||x - y||^2 / (2 sigma^2))."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite kernel input")
    if not (np.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma}")
    return float(np.exp(-np.sum((x - y) ** 2) / (2.0 * sigma ** 2)))


def mmd_loss(latents: np.ndarray, pedcc: PedccSet, kernel: KernelConfig) -> float:
    """Three-term MMD estimator between latent rows and the center set.

    (1/(M(M-1))) sum_{i!=j} k(l_i,l_j) + (1/(C(C-1))) sum_{i!=j} k(u_i,u_j)
    - (2/(MC)) sum_{i,j} k(l_i,u_j). The cross term keeps its self-pairs,
    so the value can be negative.
    """
    value, _ = _mmd_with_grad(np.asarray(latents, dtype=np.float64), pedcc, kernel)
    return value


def _mmd_with_grad(latents: np.ndarray, pedcc: PedccSet,
                   kernel: KernelConfig) -> Tuple[float, np.ndarray]:
    m = latents.shape[0]
    c = pedcc.num_centers
    if m < 2:
        raise ValueError(f"need at least 2 latent rows, got {m}")
    if c < 2:
        raise ValueError("need at least 2 centers")
    if latents.shape[1] != pedcc.dim:
        raise ValueError("latent/center dimension mismatch")
    sigma = kernel.resolve(latents)
    u = pedcc.centers

    k_ll = np.exp(-_sq_dists(latents, latents) / (2.0 * sigma ** 2))
    k_uu = np.exp(-_sq_dists(u, u) / (2.0 * sigma ** 2))
    k_lu = np.exp(-_sq_dists(latents, u) / (2.0 * sigma ** 2))

    term1 = (k_ll.sum() - np.trace(k_ll)) / (m * (m - 1))
    term2 = (k_uu.sum() - np.trace(k_uu)) / (c * (c - 1))
    term3 = 2.0 * k_lu.sum() / (m * c)
    value = float(term1 + term2 - term3)

    # d k(x,y)/dx = k(x,y) (y - x) / sigma^2; sigma is treated as constant
    # even when it came from the median heuristic.
    k_ll0 = k_ll - np.diag(np.diag(k_ll))
    grad = (2.0 / (m * (m - 1))) * (k_ll0 @ latents - k_ll0.sum(axis=1)[:, None] * latents)
    grad -= (2.0 / (m * c)) * (k_lu @ u - k_lu.sum(axis=1)[:, None] * latents)
    grad /= sigma ** 2
    return value, grad


def _cos_pair_loss(a: np.ndarray, b: np.ndarray, scale: float,
                   metric: str) -> Tuple[float, np.ndarray, np.ndarray]:
    """scale * sum over rows of (1 - a.b)^2 (cosine) or ||a-b||^2/2 (euclidean),
    with gradients w.r.t. a and b."""
    cos = np.sum(a * b, axis=-1)
    if metric == "cosine":
        value = scale * float(np.sum((1.0 - cos) ** 2))
        coeff = scale * 2.0 * (1.0 - cos)
        grad_a = -coeff[..., None] * b
        grad_b = -coeff[..., None] * a
    elif metric == "euclidean":
        diff = a - b
        value = scale * float(np.sum(diff * diff) / 2.0)
        grad_a = scale * diff
        grad_b = -scale * diff
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return value, grad_a, grad_b


def augmentation_loss(z: np.ndarray, z_aug: np.ndarray, metric: str = "cosine") -> float:
    """(1/(2N)) sum_i (1 - z_i . z_aug_i)^2."""
    z = np.asarray(z, dtype=np.float64)
    z_aug = np.asarray(z_aug, dtype=np.float64)
    if z.shape != z_aug.shape:
        raise ValueError("z and z_aug shapes differ")
    n = z.shape[0]
    value, _, _ = _cos_pair_loss(z, z_aug, 1.0 / (2 * n), metric)
    return value


def knn_loss(z: np.ndarray, z_nbr: np.ndarray, metric: str = "cosine") -> float:
    """(1/(2NM)) sum_i sum_j (1 - z_i . z_nbr_{i,j})^2."""
    z = np.asarray(z, dtype=np.float64)
    z_nbr = np.asarray(z_nbr, dtype=np.float64)
    n, m = z_nbr.shape[0], z_nbr.shape[1]
    if m == 0:
        raise ValueError("knn_loss needs at least one neighbor; skip the term instead")
    if z.shape != (n, z_nbr.shape[2]):
        raise ValueError("z and z_nbr shapes inconsistent")
    value, _, _ = _cos_pair_loss(z[:, None, :], z_nbr, 1.0 / (2 * n * m), metric)
    return value


def min_cos_loss(z: np.ndarray, pedcc: PedccSet) -> float:
    """Batch mean of (1 - max_p z_i . u_p)^2."""
    value, _ = _min_cos_with_grad(np.asarray(z, dtype=np.float64), pedcc)
    return value


def _min_cos_with_grad(z: np.ndarray, pedcc: PedccSet) -> Tuple[float, np.ndarray]:
    if z.shape[1] != pedcc.dim:
        raise ValueError("latent/center dimension mismatch")
    n = z.shape[0]
    dots = z @ pedcc.centers.T              # (N, C)
    best = np.argmax(dots, axis=1)          # lowest index on ties
    best_cos = dots[np.arange(n), best]
    value = float(np.mean((1.0 - best_cos) ** 2))
    grad = -(2.0 / n) * (1.0 - best_cos)[:, None] * pedcc.centers[best]
    return value, grad


def combined_loss(batch: LatentBatch, pedcc: PedccSet, weights: LossWeights,
                  kernel: KernelConfig, metric: str = "cosine"):
    """Composite loss and exact gradients w.r.t. z, z_aug, z_nbr.

    Returns (value, terms, grad_z, grad_z_aug, grad_z_nbr) where terms is
    the tuple (loss1, loss2, loss3, loss4). loss3 is 0 when M = 0.
    """
    n, m = batch.batch_size, batch.neighbor_count
    stacked = np.concatenate([batch.z, batch.z_aug], axis=0)
    loss1, grad_stacked = _mmd_with_grad(stacked, pedcc, kernel)
    grad_z = grad_stacked[:n].copy()
    grad_z_aug = grad_stacked[n:].copy()

    loss2, ga, gb = _cos_pair_loss(batch.z, batch.z_aug, 1.0 / (2 * n), metric)
    grad_z += weights.lambda1 * ga
    grad_z_aug += weights.lambda1 * gb

    if m > 0:
        loss3, ga, gnb = _cos_pair_loss(batch.z[:, None, :], batch.z_nbr,
                                        1.0 / (2 * n * m), metric)
        grad_z += weights.lambda2 * ga.sum(axis=1)
        grad_z_nbr = weights.lambda2 * gnb
    else:
        loss3 = 0.0
        grad_z_nbr = np.zeros_like(batch.z_nbr)

    loss4, g4 = _min_cos_with_grad(batch.z, pedcc)
    grad_z += weights.lambda3 * g4

    value = loss1 + weights.lambda1 * loss2 + weights.lambda2 * loss3 + weights.lambda3 * loss4
    return value, (loss1, loss2, loss3, loss4), grad_z, grad_z_aug, grad_z_nbr
