"""Backbone construction, checkpoint loading, and freezing strategies.

simclr and barlow-twins ride on a ResNet-50 trunk (2048-d pooled encoder
output); mae rides on ViT-B/16 (768-d class-token output). Each backbone
carries the small head its native self-supervised objective needs
(projector for the contrastive pair, pixel decoder for mae); `features`
always returns the pre-normalization encoder output the engine consumes.
"""

from typing import Tuple

import torch
from torch import nn
from torchvision.models import resnet50, vit_b_16

CHECKPOINT_MAGIC = "embd-extractor-checkpoint"

_DOWNLOAD_HINTS = {
    "simclr": "https://github.com/google-research/simclr (convert to torchvision resnet50 layout)",
    "barlow-twins": "https://github.com/facebookresearch/barlowtwins (resnet50.pth)",
    "mae": "https://github.com/facebookresearch/mae (ViT-B/16 checkpoint)",
}


class MissingWeightsError(FileNotFoundError):
    """Pretrained checkpoint not found at the given path."""


def _projector(in_dim: int, hidden: int, out_dim: int) -> nn.Module:
    return nn.Sequential(nn.Linear(in_dim, hidden), nn.BatchNorm1d(hidden),
                         nn.ReLU(inplace=True), nn.Linear(hidden, out_dim))


class ResNetBackbone(nn.Module):
    """Shared trunk for simclr / barlow-twins; they differ in projector
    width and finetuning objective only."""

    def __init__(self, name: str):
        super().__init__()
        self.name = name
        self.feature_dim = 2048
        trunk = resnet50(weights=None)
        trunk.fc = nn.Identity()
        self.encoder = trunk
        proj_out = 128 if name == "simclr" else 512
        self.head = _projector(2048, 2048, proj_out)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        return self.encoder(x)

    def project(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x))


class MaeBackbone(nn.Module):
    def __init__(self):
        super().__init__()
        self.name = "mae"
        self.feature_dim = 768
        vit = vit_b_16(weights=None)
        vit.heads = nn.Identity()
        self.encoder = vit
        self.patch_size = vit.patch_size
        # pixel decoder: one linear map from each patch token to its patch
        self.head = nn.Linear(768, self.patch_size * self.patch_size * 3)

    def tokens(self, x: torch.Tensor) -> torch.Tensor:
        """All encoder tokens, (B, 1 + num_patches, 768); token 0 is CLS."""
        vit = self.encoder
        t = vit._process_input(x)
        cls = vit.class_token.expand(t.shape[0], -1, -1)
        return vit.encoder(torch.cat([cls, t], dim=1))

    def features(self, x: torch.Tensor) -> torch.Tensor:
        return self.tokens(x)[:, 0]


def build_backbone(name: str) -> nn.Module:
    if name in ("simclr", "barlow-twins"):
        return ResNetBackbone(name)
    if name == "mae":
        return MaeBackbone()
    raise ValueError(f"unknown backbone {name!r}")


def save_checkpoint(backbone: nn.Module, path: str, epoch: int = 0) -> None:
    torch.save({"format": CHECKPOINT_MAGIC, "backbone": backbone.name,
                "epoch": epoch, "state_dict": backbone.state_dict()}, path)


def load_checkpoint(backbone: nn.Module, path: str) -> int:
    """Load weights in place; returns the checkpoint's training epoch."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise MissingWeightsError(
            f"no checkpoint at {path!r} for backbone {backbone.name!r}. "
            f"Download pretrained weights from "
            f"{_DOWNLOAD_HINTS[backbone.name]}, save them with "
            f"extractor.backbones.save_checkpoint (or `embd-extract "
            f"init-weights` for a random-init file), then retry.")
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not an extractor checkpoint")
    if payload["backbone"] != backbone.name:
        raise ValueError(f"{path}: checkpoint is for backbone "
                         f"{payload['backbone']!r}, job wants {backbone.name!r}")
    backbone.load_state_dict(payload["state_dict"])
    return int(payload.get("epoch", 0))


def apply_strategy(backbone: nn.Module, strategy: str) -> Tuple[int, int]:
    """Set requires_grad per the freezing strategy; returns
    (num_trainable_params, num_frozen_params)."""
    if strategy == "frozen":
        trainable = set()
    elif strategy == "all-layers":
        trainable = {name for name, _ in backbone.named_parameters()}
    elif strategy == "last-two-conv":
        # the two stages nearest the output, plus the objective head
        if isinstance(backbone, ResNetBackbone):
            prefixes = ("encoder.layer3.", "encoder.layer4.", "head.")
        else:
            n_blocks = len(backbone.encoder.encoder.layers)
            prefixes = tuple(f"encoder.encoder.layers.encoder_layer_{i}."
                             for i in (n_blocks - 2, n_blocks - 1))
            prefixes += ("encoder.encoder.ln.", "head.")
        trainable = {name for name, _ in backbone.named_parameters()
                     if name.startswith(prefixes)}
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    n_train = n_frozen = 0
    for name, param in backbone.named_parameters():
        param.requires_grad = name in trainable
        if param.requires_grad:
            n_train += param.numel()
        else:
            n_frozen += param.numel()
    return n_train, n_frozen
