"""Shared synthetic-data helpers for the test suite."""

import numpy as np


def make_blobs(n: int, d_in: int, clusters: int, seed: int,
               sep_over_sigma: float = 4.0):
    """Spherical Gaussian blobs with known labels.

    Cluster centers are random orthonormal unit vectors, pairwise distance
    sqrt(2). sigma is the cluster scale measured on differences of two
    same-cluster points per axis (sqrt(2) x the per-axis std); centers sit
    sep_over_sigma * sigma apart. At the default 4.0 the generative labels
    are recoverable at ~0.99 accuracy but the task is not saturated.
    """
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d_in, clusters)))
    centers = (q * np.sign(np.diag(r))).T          # (clusters, d_in), unit rows
    sep = np.sqrt(2.0)
    axis_std = sep / (sep_over_sigma * np.sqrt(2.0))
    labels = rng.integers(0, clusters, size=n)
    data = centers[labels] + rng.standard_normal((n, d_in)) * axis_std
    return data.astype(np.float32), labels


def unit_rows(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)
