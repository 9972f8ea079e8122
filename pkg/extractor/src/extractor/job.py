"""Extraction job description and validation."""

from dataclasses import dataclass, field
from typing import Tuple

BACKBONES = ("simclr", "barlow-twins", "mae")
STRATEGIES = ("frozen", "last-two-conv", "all-layers")


@dataclass(frozen=True)
class AugmentationRecipe:
    """Per-view image augmentations, each individually toggleable."""
    crop: bool = True
    flip: bool = True
    jitter: bool = True
    grayscale: bool = True
    blur: bool = True

    def enabled(self) -> Tuple[str, ...]:
        return tuple(name for name in
                     ("crop", "flip", "jitter", "grayscale", "blur")
                     if getattr(self, name))


@dataclass(frozen=True)
class ExtractionJob:
    dataset: str                       # path to an image folder
    backbone: str                      # one of BACKBONES
    weights: str                       # path to a local checkpoint
    out: str                           # output EMBD path
    strategy: str = "frozen"           # one of STRATEGIES
    num_views: int = 0                 # V >= 0
    recipe: AugmentationRecipe = field(default_factory=AugmentationRecipe)
    image_size: int = 224
    batch_size: int = 32
    seed: int = 0
    finetune_epochs: int = 1
    finetune_lr: float = 1e-4

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise ValueError(
                f"unknown backbone {self.backbone!r}; expected one of {BACKBONES}")
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.num_views < 0:
            raise ValueError("num_views must be >= 0")
        if self.image_size < 32:
            raise ValueError("image_size must be >= 32")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.finetune_epochs < 1 or self.finetune_lr <= 0:
            raise ValueError("finetune_epochs >= 1 and finetune_lr > 0 required")
