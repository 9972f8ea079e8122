"""Image-folder dataset.

Layout: either class subdirectories (`root/classname/img.png`, labels are
the sorted class names' indices) or a flat folder of images (no labels).
Files are visited in sorted order so EMBD row order is reproducible.
Undecodable files are skipped and counted, never fatal.
"""

import logging
import os
from dataclasses import dataclass
from typing import List, Optional

from PIL import Image

log = logging.getLogger("extractor")

_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp")


@dataclass
class ImageFolder:
    paths: List[str]
    labels: Optional[List[int]]       # None for flat folders
    class_names: Optional[List[str]]
    skipped: int                      # undecodable files dropped during scan

    def __len__(self):
        return len(self.paths)

    def load(self, index: int) -> Image.Image:
        with Image.open(self.paths[index]) as img:
            return img.convert("RGB")


def _is_image(name: str) -> bool:
    return name.lower().endswith(_EXTENSIONS)


def scan_folder(root: str) -> ImageFolder:
    if not os.path.isdir(root):
        raise FileNotFoundError(f"dataset folder not found: {root!r}")
    subdirs = sorted(e.name for e in os.scandir(root) if e.is_dir())
    if subdirs:
        candidates = [(os.path.join(root, c, f), i)
                      for i, c in enumerate(subdirs)
                      for f in sorted(os.listdir(os.path.join(root, c)))
                      if _is_image(f)]
        class_names = subdirs
    else:
        candidates = [(os.path.join(root, f), -1)
                      for f in sorted(os.listdir(root)) if _is_image(f)]
        class_names = None

    paths, labels, skipped = [], [], 0
    for path, label in candidates:
        try:
            with Image.open(path) as img:
                img.verify()
        except Exception as exc:
            skipped += 1
            log.warning("skipping undecodable image %s: %s", path, exc)
            continue
        paths.append(path)
        labels.append(label)
    if not paths:
        raise ValueError(f"no decodable images under {root!r} "
                         f"({skipped} skipped)")
    if skipped:
        log.info("scan complete: %d images kept, %d skipped", len(paths), skipped)
    return ImageFolder(paths=paths,
                       labels=labels if class_names else None,
                       class_names=class_names, skipped=skipped)
