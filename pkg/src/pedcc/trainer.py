"""Training loop: pull latent features of unlabeled embeddings toward the
fixed evenly-distributed centers.

Each epoch iterates shuffled batches; a batch holds the originals, one
augmented view per sample, and each sample's m nearest neighbors, all
pushed through the same projection head. The neighbor table is rebuilt on
a fixed schedule (epoch 0 from the raw input embeddings, later refreshes
from current head latents). Stopping is assignment stability: training
ends once the predicted labels change for < 0.1% of samples over 20
consecutive epochs (ground-truth accuracy, when labels exist, is recorded
for reporting only).
"""

import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .geometry import PedccSet, generate_pedcc
from .head import AdamState, ProjectionHead, adam_step, backward, forward
from .io import EmbeddingDataset
from .losses import KernelConfig, LatentBatch, LossWeights, combined_loss
from .metrics import LabelPair, cluster_accuracy, nmi
from .neighbors import build_neighbors, refresh_due

#: (lambda1, lambda2, lambda3) per dataset family.
WEIGHT_PRESETS = {
    "cifar10": LossWeights(9.0, 2.0, 2.0),
    "stl10": LossWeights(8.0, 2.0, 2.0),
    "cifar100": LossWeights(8.0, 2.0, 2.0),
    "imagenet50": LossWeights(8.0, 2.0, 2.0),
}


class TrainingDivergedError(RuntimeError):
    """Loss went non-finite; carries the last finite-epoch head."""

    def __init__(self, message: str, last_good_head: Optional[ProjectionHead]):
        super().__init__(message)
        self.last_good_head = last_good_head


@dataclass
class TrainConfig:
    clusters: int
    latent_dim: int = 64
    hidden_dims: Tuple[int, ...] = (512,)
    weights: LossWeights = field(default_factory=LossWeights)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    neighbor_count: int = 4
    refresh_period: int = 30
    batch_size: int = 100
    max_epochs: int = 400
    lr: float = 0.001
    seed: int = 0
    metric: str = "cosine"
    augmentation_mode: str = "views"   # 'views' or 'noise'
    noise_std: float = 0.1
    # epochs with the center-sharpening term disabled; a freshly initialized
    # head emits latents bunched around one direction, and pulling them all
    # to the single nearest center before the MMD term has spread them out
    # collapses every sample into one cluster
    loss4_warmup_epochs: int = 40
    stability_threshold: float = 0.001
    stability_patience: int = 20

    def __post_init__(self):
        if self.clusters < 2:
            raise ValueError("need at least 2 clusters")
        if self.latent_dim < self.clusters - 1:
            raise ValueError(
                f"latent_dim {self.latent_dim} too small for {self.clusters} "
                f"clusters (need >= clusters - 1)")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.lr <= 0 or self.noise_std < 0:
            raise ValueError("rates must be positive")
        if self.metric not in ("cosine", "euclidean"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.augmentation_mode not in ("views", "noise"):
            raise ValueError(f"unknown augmentation_mode {self.augmentation_mode!r}")


@dataclass
class EpochRecord:
    epoch: int
    loss1: float
    loss2: float
    loss3: float
    loss4: float
    total: float
    wall_clock: float


@dataclass
class TrainReport:
    epochs: List[EpochRecord] = field(default_factory=list)
    refresh_epochs: List[int] = field(default_factory=list)
    stopped_early: bool = False
    final_acc: Optional[float] = None
    final_nmi: Optional[float] = None


@dataclass
class ClusterAssignment:
    labels: np.ndarray   # (N,) int in [0, C)
    scores: np.ndarray   # (N,) cosine to the assigned center
    counts: np.ndarray   # (C,) per-cluster sizes


def compute_latents(head: ProjectionHead, data: np.ndarray,
                    block: int = 4096) -> np.ndarray:
    out = np.empty((data.shape[0], head.d_latent))
    for start in range(0, data.shape[0], block):
        z, _ = forward(head, data[start:start + block])
        out[start:start + block] = z
    return out


def assign(dataset: EmbeddingDataset, head: ProjectionHead,
           pedcc: PedccSet) -> ClusterAssignment:
    """Label every sample with its nearest center and the cosine score."""
    if dataset.d_in != head.d_in or head.d_latent != pedcc.dim:
        raise ValueError("dataset/head/center dimensions inconsistent")
    latents = compute_latents(head, dataset.data.astype(np.float64))
    dots = latents @ pedcc.centers.T
    labels = np.argmax(dots, axis=1)   # first maximizer = lowest index
    scores = dots[np.arange(len(labels)), labels]
    counts = np.bincount(labels, minlength=pedcc.num_centers)
    return ClusterAssignment(labels=labels, scores=scores, counts=counts)


def _augmented_inputs(data: np.ndarray, dataset: EmbeddingDataset,
                      config: TrainConfig, rng: np.random.Generator) -> np.ndarray:
    """One augmented input row per sample for this epoch."""
    n = data.shape[0]
    if config.augmentation_mode == "views":
        choice = rng.integers(0, dataset.num_views, size=n)
        return dataset.views[choice, np.arange(n)].astype(np.float64)
    noisy = data + rng.normal(size=data.shape) * config.noise_std
    # keep each perturbed row at its original norm so only direction changes
    scale = (np.linalg.norm(data, axis=1, keepdims=True)
             / np.maximum(np.linalg.norm(noisy, axis=1, keepdims=True), 1e-12))
    return noisy * scale


def train(dataset: EmbeddingDataset, config: TrainConfig
          ) -> Tuple[ProjectionHead, PedccSet, TrainReport]:
    if config.augmentation_mode == "views" and dataset.num_views < 1:
        raise ValueError("augmentation_mode 'views' needs stored views; "
                         "use 'noise' for datasets without them")
    data = dataset.data.astype(np.float64)
    n = dataset.n
    m = config.neighbor_count

    rng = np.random.default_rng(config.seed)
    pedcc = generate_pedcc(config.clusters, config.latent_dim)
    head = ProjectionHead.create(
        [dataset.d_in, *config.hidden_dims, config.latent_dim], seed=config.seed)
    adam = AdamState.for_params(head.params(), lr=config.lr)
    report = TrainReport()

    # epoch-0 table comes from the raw input embeddings
    unit_data = data / np.maximum(np.linalg.norm(data, axis=1, keepdims=True), 1e-12)
    table = build_neighbors(unit_data if config.metric == "cosine" else data,
                            m, config.metric, built_at_epoch=0)

    prev_labels: Optional[np.ndarray] = None
    stable_streak = 0
    last_good: Optional[ProjectionHead] = None

    for epoch in range(config.max_epochs):
        t0 = time.perf_counter()
        if refresh_due(epoch, config.refresh_period):
            if epoch > 0:
                latents = compute_latents(head, data)
                table = build_neighbors(latents, m, config.metric,
                                        built_at_epoch=epoch)
            report.refresh_epochs.append(epoch)

        weights = config.weights
        if epoch < config.loss4_warmup_epochs:
            weights = LossWeights(weights.lambda1, weights.lambda2, 0.0)

        aug = _augmented_inputs(data, dataset, config, rng)
        order = rng.permutation(n)
        epoch_sigma: Optional[float] = None
        sums = np.zeros(5)
        n_batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            z, cache_z = forward(head, data[idx])
            za, cache_a = forward(head, aug[idx])
            nbr_idx = table.indices[idx]
            zn_flat, cache_n = forward(head, data[nbr_idx.reshape(-1)])
            zn = zn_flat.reshape(len(idx), m, head.d_latent)

            if epoch_sigma is None:
                kernel = config.kernel
                if isinstance(kernel.sigma, str):
                    kernel = KernelConfig(
                        kernel.resolve(np.concatenate([z, za], axis=0)))
                epoch_sigma = kernel.sigma
            kernel = KernelConfig(epoch_sigma)

            batch = LatentBatch(z=z, z_aug=za, z_nbr=zn)
            value, terms, gz, gza, gzn = combined_loss(
                batch, pedcc, weights, kernel, config.metric)
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}", last_good)

            gw_z, gb_z = backward(head, cache_z, gz)
            gw_a, gb_a = backward(head, cache_a, gza)
            gw_n, gb_n = backward(head, cache_n,
                                  gzn.reshape(-1, head.d_latent))
            grads = ([a + b + c for a, b, c in zip(gw_z, gw_a, gw_n)]
                     + [a + b + c for a, b, c in zip(gb_z, gb_a, gb_n)])
            adam_step(adam, head.params(), grads)

            sums += np.array([*terms, value])
            n_batches += 1

        means = sums / n_batches
        report.epochs.append(EpochRecord(
            epoch=epoch, loss1=float(means[0]), loss2=float(means[1]),
            loss3=float(means[2]), loss4=float(means[3]),
            total=float(means[4]), wall_clock=time.perf_counter() - t0))
        last_good = ProjectionHead(list(head.layer_dims),
                                   [w.copy() for w in head.weights],
                                   [b.copy() for b in head.biases])

        labels = assign(dataset, head, pedcc).labels
        if prev_labels is not None:
            changed = float(np.mean(labels != prev_labels))
            stable_streak = stable_streak + 1 if changed < config.stability_threshold else 0
        prev_labels = labels
        if stable_streak >= config.stability_patience:
            report.stopped_early = True
            break

    if dataset.labels is not None:
        final = assign(dataset, head, pedcc)
        pair = LabelPair(predicted=final.labels, truth=dataset.labels)
        k = max(config.clusters, int(dataset.labels.max()) + 1)
        report.final_acc = cluster_accuracy(pair, k)
        report.final_nmi = nmi(pair)
    return head, pedcc, report
