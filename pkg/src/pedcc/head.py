"""Projection head: small MLP mapping input embeddings to unit-norm latents.

Plain numpy forward/backward with ReLU hidden layers and a final L2 row
normalization; the normalization Jacobian is composed exactly in backward.
Adam is hand-rolled (bias-corrected, standard hyperparameters) so the
whole training step is verifiable against finite differences.
"""

import json
import struct
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

_NORM_EPS = 1e-12


class StaleCacheError(RuntimeError):
    """backward() called with a cache that does not match the head."""


class NonFiniteGradientError(RuntimeError):
    """Adam received a non-finite gradient."""


@dataclass
class ProjectionHead:
    layer_dims: List[int]
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @classmethod
    def create(cls, layer_dims: List[int], seed: int = 0) -> "ProjectionHead":
        """Seeded uniform init scaled by 1/sqrt(fan_in)."""
        if len(layer_dims) < 2:
            raise ValueError("need at least input and output dims")
        if any(d < 1 for d in layer_dims):
            raise ValueError("all layer dims must be positive")
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for d_in, d_out in zip(layer_dims[:-1], layer_dims[1:]):
            bound = 1.0 / np.sqrt(d_in)
            weights.append(rng.uniform(-bound, bound, size=(d_out, d_in)))
            # nonzero bias keeps the pre-normalization output away from the
            # exact origin even when a ReLU layer goes fully dead
            biases.append(rng.uniform(-bound, bound, size=d_out))
        return cls(layer_dims=list(layer_dims), weights=weights, biases=biases)

    @property
    def d_in(self) -> int:
        return self.layer_dims[0]

    @property
    def d_latent(self) -> int:
        return self.layer_dims[-1]

    def params(self) -> List[np.ndarray]:
        return self.weights + self.biases


def forward(head: ProjectionHead, x: np.ndarray) -> Tuple[np.ndarray, dict]:
    """Unit-norm latents for a (B, d_in) batch, plus the backprop cache."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != head.d_in:
        raise ValueError(f"x has shape {x.shape}, expected (B, {head.d_in})")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    a = x
    activations = [a]
    n_layers = len(head.weights)
    for i, (w, b) in enumerate(zip(head.weights, head.biases)):
        a = a @ w.T + b
        if i < n_layers - 1:
            a = np.maximum(a, 0.0)
        activations.append(a)
    pre = activations[-1]
    norms = np.linalg.norm(pre, axis=1, keepdims=True)
    z = pre / (norms + _NORM_EPS)
    cache = {"head": head, "activations": activations, "pre": pre, "norms": norms}
    return z, cache


def backward(head: ProjectionHead, cache: dict,
             grad_z: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Parameter gradients (dW list, db list) from upstream grad w.r.t. z."""
    if cache.get("head") is not head:
        raise StaleCacheError("cache was produced by a different head instance")
    activations = cache["activations"]
    pre, norms = cache["pre"], cache["norms"]
    grad_z = np.asarray(grad_z, dtype=np.float64)
    if grad_z.shape != pre.shape:
        raise ValueError("grad_z shape mismatch")

    # through z = pre / (||pre|| + eps): grad_pre = g/n - pre (pre.g) / (||pre|| n^2)
    n = norms + _NORM_EPS
    dot = np.sum(pre * grad_z, axis=1, keepdims=True)
    grad = grad_z / n - pre * dot / (np.maximum(norms, _NORM_EPS) * n ** 2)

    grad_w = [None] * len(head.weights)
    grad_b = [None] * len(head.biases)
    for i in range(len(head.weights) - 1, -1, -1):
        if i < len(head.weights) - 1:
            grad = grad * (activations[i + 1] > 0.0)
        grad_w[i] = grad.T @ activations[i]
        grad_b[i] = grad.sum(axis=0)
        if i > 0:
            grad = grad @ head.weights[i]
    return grad_w, grad_b


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: List[np.ndarray], lr: float = 0.001,
                   beta1: float = 0.9, beta2: float = 0.999,
                   epsilon: float = 1e-8) -> "AdamState":
        return cls(lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon, step=0,
                   m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params: List[np.ndarray],
              grads: List[np.ndarray]) -> None:
    """One bias-corrected Adam update, in place."""
    if len(params) != len(state.m) or len(params) != len(grads):
        raise ValueError("parameter/gradient/state length mismatch")
    for i, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for parameter {i}")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)


_MAGIC = b"PHCK"


def save_checkpoint(head: ProjectionHead, path: str) -> None:
    """JSON header (layer dims) + raw little-endian float64 blocks, W then b per layer."""
    header = json.dumps({"layer_dims": head.layer_dims}).encode()
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for w, b in zip(head.weights, head.biases):
            f.write(w.astype("<f8").tobytes())
            f.write(b.astype("<f8").tobytes())


def load_checkpoint(path: str) -> ProjectionHead:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a projection-head checkpoint")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen))
        dims = header["layer_dims"]
        weights, biases = [], []
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            w = np.frombuffer(f.read(8 * d_out * d_in), dtype="<f8").reshape(d_out, d_in)
            b = np.frombuffer(f.read(8 * d_out), dtype="<f8")
            weights.append(w.astype(np.float64))
            biases.append(b.astype(np.float64))
        if f.read(1):
            raise ValueError(f"{path}: trailing bytes after parameters")
    return ProjectionHead(layer_dims=dims, weights=weights, biases=biases)
