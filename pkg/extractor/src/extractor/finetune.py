"""Fine-tune a backbone on the target dataset with its native
self-supervised objective before extraction.

simclr: NT-Xent on two augmented views. barlow-twins: cross-correlation
redundancy reduction on two views. mae: masked-patch pixel reconstruction
(75% of patches zeroed in image space, MSE on the masked patches).
`frozen` never reaches this module — extract() skips the call.
"""

import logging

import torch
import torch.nn.functional as F

from .augment import view_transform
from .backbones import MaeBackbone, apply_strategy, save_checkpoint
from .dataset import ImageFolder
from .job import ExtractionJob

log = logging.getLogger("extractor")


class FinetuneDivergedError(RuntimeError):
    """Loss went NaN; the last finite state was checkpointed."""


def _nt_xent(za: torch.Tensor, zb: torch.Tensor, temperature: float = 0.5):
    z = F.normalize(torch.cat([za, zb]), dim=1)
    n = za.shape[0]
    sim = z @ z.T / temperature
    sim.fill_diagonal_(float("-inf"))
    target = torch.cat([torch.arange(n, 2 * n), torch.arange(0, n)])
    return F.cross_entropy(sim, target)


def _barlow_twins(za: torch.Tensor, zb: torch.Tensor, lam: float = 5e-3):
    za = (za - za.mean(0)) / (za.std(0) + 1e-6)
    zb = (zb - zb.mean(0)) / (zb.std(0) + 1e-6)
    c = za.T @ zb / za.shape[0]
    on_diag = ((torch.diagonal(c) - 1) ** 2).sum()
    off_diag = (c ** 2).sum() - (torch.diagonal(c) ** 2).sum()
    return on_diag + lam * off_diag


def _mae_loss(backbone: MaeBackbone, images: torch.Tensor,
              mask_ratio: float = 0.75):
    p = backbone.patch_size
    b, _, h, w = images.shape
    gh, gw = h // p, w // p
    patches = images.reshape(b, 3, gh, p, gw, p).permute(0, 2, 4, 1, 3, 5) \
                    .reshape(b, gh * gw, 3 * p * p)
    mask = torch.rand(b, gh * gw) < mask_ratio
    masked_images = images.clone().reshape(b, 3, gh, p, gw, p)
    mask_grid = mask.reshape(b, gh, gw)
    masked_images *= ~mask_grid[:, None, :, None, :, None]
    tokens = backbone.tokens(masked_images.reshape(b, 3, h, w))
    recon = backbone.head(tokens[:, 1:])
    return F.mse_loss(recon[mask], patches[mask])


def finetune(backbone, folder: ImageFolder, job: ExtractionJob) -> int:
    """Train in place; returns the last completed epoch number."""
    if job.strategy == "frozen":
        return 0
    n_train, n_frozen = apply_strategy(backbone, job.strategy)
    log.info("finetuning %s (%s): %d trainable / %d frozen params",
             backbone.name, job.strategy, n_train, n_frozen)
    params = [p for p in backbone.parameters() if p.requires_grad]
    opt = torch.optim.Adam(params, lr=job.finetune_lr)
    vt = view_transform(job.image_size, job.recipe)
    backbone.train()
    torch.manual_seed(job.seed)
    epoch = 0
    for epoch in range(1, job.finetune_epochs + 1):
        order = torch.randperm(len(folder)).tolist()
        for start in range(0, len(folder), job.batch_size):
            idx = order[start:start + job.batch_size]
            if len(idx) < 2:
                continue   # pair objectives need >= 2 samples
            imgs = [folder.load(i) for i in idx]
            if isinstance(backbone, MaeBackbone):
                batch = torch.stack([vt(im) for im in imgs])
                loss = _mae_loss(backbone, batch)
            else:
                va = torch.stack([vt(im) for im in imgs])
                vb = torch.stack([vt(im) for im in imgs])
                za, zb = backbone.project(va), backbone.project(vb)
                loss = (_nt_xent(za, zb) if backbone.name == "simclr"
                        else _barlow_twins(za, zb))
            if not torch.isfinite(loss):
                abort_path = job.out + ".abort.ckpt"
                save_checkpoint(backbone, abort_path, epoch=epoch - 1)
                raise FinetuneDivergedError(
                    f"non-finite loss at epoch {epoch}; state saved to "
                    f"{abort_path}. Try a lower --finetune-lr or a smaller "
                    f"--batch-size.")
            opt.zero_grad()
            loss.backward()
            opt.step()
        log.info("finetune epoch %d: loss %.4f", epoch, loss.item())
    return epoch
