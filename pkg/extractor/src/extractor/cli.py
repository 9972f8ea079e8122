"""Command line entry point: `embd-extract extract|init-weights`."""

import argparse
import logging
import sys

from .backbones import build_backbone, save_checkpoint
from .job import BACKBONES, STRATEGIES, AugmentationRecipe, ExtractionJob


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embd-extract",
        description="Export image embeddings from self-supervised backbones "
                    "into EMBD files")
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="run a backbone over an image folder")
    ex.add_argument("--dataset", required=True, help="image folder (class "
                    "subdirectories become labels)")
    ex.add_argument("--backbone", required=True, choices=BACKBONES)
    ex.add_argument("--weights", required=True, help="local checkpoint path")
    ex.add_argument("--out", required=True, help="output EMBD path")
    ex.add_argument("--strategy", default="frozen", choices=STRATEGIES)
    ex.add_argument("--views", type=int, default=0, dest="num_views")
    for name in ("crop", "flip", "jitter", "grayscale", "blur"):
        ex.add_argument(f"--no-{name}", action="store_false", dest=name)
    ex.add_argument("--image-size", type=int, default=224)
    ex.add_argument("--batch-size", type=int, default=32)
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--finetune-epochs", type=int, default=1)
    ex.add_argument("--finetune-lr", type=float, default=1e-4)

    iw = sub.add_parser("init-weights",
                        help="write a randomly initialized checkpoint "
                             "(for pipelines without pretrained weights)")
    iw.add_argument("--backbone", required=True, choices=BACKBONES)
    iw.add_argument("--out", required=True)
    iw.add_argument("--seed", type=int, default=0)
    return parser


def run_cli(argv) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        if args.command == "init-weights":
            import torch
            torch.manual_seed(args.seed)
            save_checkpoint(build_backbone(args.backbone), args.out)
            print(f"wrote {args.out}")
            return 0
        recipe = AugmentationRecipe(crop=args.crop, flip=args.flip,
                                    jitter=args.jitter,
                                    grayscale=args.grayscale, blur=args.blur)
        job = ExtractionJob(dataset=args.dataset, backbone=args.backbone,
                            weights=args.weights, out=args.out,
                            strategy=args.strategy, num_views=args.num_views,
                            recipe=recipe, image_size=args.image_size,
                            batch_size=args.batch_size, seed=args.seed,
                            finetune_epochs=args.finetune_epochs,
                            finetune_lr=args.finetune_lr)
        from .extract import extract
        manifest = extract(job)
        print(f"wrote {job.out} (N={manifest['n']}, d={manifest['d']}, "
              f"V={manifest['v']})")
        return 0
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))
