"""Run a backbone over an image folder and export EMBD + labels + manifest."""

import json
import logging
from dataclasses import asdict
from datetime import date

import numpy as np
import torch

from .augment import base_transform, view_transform
from .backbones import build_backbone, load_checkpoint
from .dataset import ImageFolder, scan_folder
from .embd import write_embd, write_labels
from .finetune import finetune
from .job import ExtractionJob

log = logging.getLogger("extractor")


@torch.no_grad()
def _embed_pass(backbone, folder: ImageFolder, transform,
                batch_size: int) -> np.ndarray:
    backbone.eval()
    rows = []
    for start in range(0, len(folder), batch_size):
        batch = torch.stack([transform(folder.load(i))
                             for i in range(start, min(start + batch_size,
                                                       len(folder)))])
        rows.append(backbone.features(batch).to(torch.float32).numpy())
    return np.concatenate(rows, axis=0)


def extract(job: ExtractionJob) -> dict:
    """Export embeddings per the job; returns the manifest dict.

    Writes `job.out` (EMBD), `<out>.labels.txt` when the folder has class
    subdirectories, and `<out>.manifest.json`.
    """
    folder = scan_folder(job.dataset)
    backbone = build_backbone(job.backbone)
    epoch = load_checkpoint(backbone, job.weights)
    if job.strategy != "frozen":
        epoch = finetune(backbone, folder, job)

    data = _embed_pass(backbone, folder, base_transform(job.image_size),
                       job.batch_size)
    views = None
    if job.num_views:
        vt = view_transform(job.image_size, job.recipe)
        blocks = []
        for v in range(job.num_views):
            torch.manual_seed(job.seed * 100003 + v)
            blocks.append(_embed_pass(backbone, folder, vt, job.batch_size))
        views = np.stack(blocks)

    if not np.all(np.isfinite(data)) or (views is not None
                                         and not np.all(np.isfinite(views))):
        raise ValueError("backbone produced non-finite embeddings")
    zero_rows = int(np.sum(~np.any(data, axis=1)))
    if zero_rows:
        log.warning("%d all-zero embedding rows", zero_rows)

    write_embd(data, views, job.out)
    labels_path = None
    if folder.labels is not None:
        labels_path = job.out + ".labels.txt"
        write_labels(folder.labels, labels_path)

    manifest = {
        "job": asdict(job),
        "date": date.today().isoformat(),
        "n": int(data.shape[0]),
        "d": int(data.shape[1]),
        "v": int(job.num_views),
        "checkpoint_epoch": int(epoch),
        "skipped_images": folder.skipped,
        "zero_rows": zero_rows,
        "class_names": folder.class_names,
        "labels_file": labels_path,
    }
    manifest_path = job.out + ".manifest.json"
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2)
    log.info("wrote %s (%d x %d, %d views), manifest %s",
             job.out, manifest["n"], manifest["d"], manifest["v"],
             manifest_path)
    return manifest
