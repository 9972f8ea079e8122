from .backbones import (MissingWeightsError, apply_strategy, build_backbone,
                        load_checkpoint, save_checkpoint)
from .dataset import ImageFolder, scan_folder
from .embd import write_embd, write_labels
from .extract import extract
from .finetune import FinetuneDivergedError, finetune
from .job import BACKBONES, STRATEGIES, AugmentationRecipe, ExtractionJob

__all__ = [
    "AugmentationRecipe", "BACKBONES", "ExtractionJob",
    "FinetuneDivergedError", "ImageFolder", "MissingWeightsError",
    "STRATEGIES", "apply_strategy", "build_backbone", "extract", "finetune",
    "load_checkpoint", "save_checkpoint", "scan_folder", "write_embd",
    "write_labels",
]
