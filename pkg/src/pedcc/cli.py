"""Command-line surface: gen / knn / train / assign / eval / eval-loss.

Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

import argparse
import dataclasses
import json
import sys
from typing import List, Optional

import numpy as np

from . import geometry, head as head_mod, io as io_mod, metrics, neighbors, trainer
from .losses import KernelConfig, LatentBatch, LossWeights, combined_loss


def _cmd_gen(args) -> int:
    pedcc = geometry.generate_pedcc(args.clusters, args.dim, args.seed)
    io_mod.write_embd(io_mod.EmbeddingDataset(data=pedcc.centers), args.out)
    if args.emit_csv:
        with open(args.emit_csv, "w") as f:
            for row in pedcc.centers:
                f.write(",".join(f"{v:.17g}" for v in row) + "\n")
    print(f"wrote {pedcc.num_centers} centers of dim {pedcc.dim} to {args.out}")
    return 0


def _cmd_knn(args) -> int:
    dataset = io_mod.read_embd(args.embeddings)
    feats = dataset.data.astype(np.float64)
    if args.metric == "cosine":
        feats = feats / np.maximum(np.linalg.norm(feats, axis=1, keepdims=True), 1e-12)
    table = neighbors.build_neighbors(feats, args.m, args.metric)
    neighbors.write_table(table, args.out)
    print(f"wrote {table.indices.shape[0]}x{args.m} neighbor table to {args.out}")
    return 0


def _parse_config(path: str, clusters_required: bool = True) -> dict:
    """Plain `key = value` lines; '#' starts a comment."""
    raw = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            raw[key] = value
    return raw


def _config_from_file(path: str) -> trainer.TrainConfig:
    raw = _parse_config(path)
    if "clusters" not in raw:
        raise ValueError(f"{path}: missing required key 'clusters'")

    preset = raw.pop("preset", None)
    weights = trainer.WEIGHT_PRESETS[preset] if preset else LossWeights(
        float(raw.pop("lambda1", 9.0)),
        float(raw.pop("lambda2", 2.0)),
        float(raw.pop("lambda3", 2.0)))
    sigma = raw.pop("sigma", "median")
    kernel = KernelConfig("median" if sigma == "median" else float(sigma))
    kwargs = {
        "clusters": int(raw.pop("clusters")),
        "weights": weights,
        "kernel": kernel,
    }
    if "hidden_dims" in raw:
        dims = raw.pop("hidden_dims").strip()
        kwargs["hidden_dims"] = tuple(int(s) for s in dims.split(",") if s.strip()) if dims else ()
    int_keys = ("latent_dim", "neighbor_count", "refresh_period", "batch_size",
                "max_epochs", "seed", "stability_patience")
    float_keys = ("lr", "noise_std", "stability_threshold")
    str_keys = ("metric", "augmentation_mode")
    for key, value in raw.items():
        if key in int_keys:
            kwargs[key] = int(value)
        elif key in float_keys:
            kwargs[key] = float(value)
        elif key in str_keys:
            kwargs[key] = value
        else:
            raise ValueError(f"{path}: unknown config key {key!r}")
    return trainer.TrainConfig(**kwargs)


def _load_dataset(embeddings: str, views: Optional[str] = None,
                  labels: Optional[str] = None) -> io_mod.EmbeddingDataset:
    dataset = io_mod.read_embd(embeddings)
    if views:
        vds = io_mod.read_embd(views)
        if vds.data.shape != dataset.data.shape:
            raise ValueError("views file shape does not match embeddings file")
        blocks = [vds.data[None]]
        if vds.views is not None:
            blocks.append(vds.views)
        dataset.views = np.concatenate(blocks, axis=0)
    if labels:
        dataset.labels = io_mod.read_labels(labels)
    return dataset


def _cmd_train(args) -> int:
    import os
    dataset = _load_dataset(args.embeddings, args.views, args.labels)
    config = _config_from_file(args.config)
    if dataset.num_views == 0 and config.augmentation_mode == "views":
        raise ValueError("no views available; set augmentation_mode = noise "
                         "or pass --views")
    os.makedirs(args.out_dir, exist_ok=True)
    head, pedcc, report = trainer.train(dataset, config)

    head_mod.save_checkpoint(head, os.path.join(args.out_dir, "head.ckpt"))
    io_mod.write_embd(io_mod.EmbeddingDataset(data=pedcc.centers),
                      os.path.join(args.out_dir, "centers.embd"))
    with open(os.path.join(args.out_dir, "report.ndjson"), "w") as f:
        for rec in report.epochs:
            f.write(json.dumps(dataclasses.asdict(rec)) + "\n")
        f.write(json.dumps({
            "summary": True,
            "epochs_run": len(report.epochs),
            "stopped_early": report.stopped_early,
            "refresh_epochs": report.refresh_epochs,
            "final_acc": report.final_acc,
            "final_nmi": report.final_nmi,
        }) + "\n")
    result = trainer.assign(dataset, head, pedcc)
    io_mod.write_labels(result.labels, os.path.join(args.out_dir, "assignments.txt"))

    line = f"epochs={len(report.epochs)} stopped_early={report.stopped_early}"
    if report.final_acc is not None:
        line += f" acc={report.final_acc:.6f} nmi={report.final_nmi:.6f}"
    print(line)
    return 0


def _cmd_assign(args) -> int:
    dataset = io_mod.read_embd(args.embeddings)
    head = head_mod.load_checkpoint(args.checkpoint)
    centers = io_mod.read_embd(args.centers).data.astype(np.float64)
    pedcc = geometry.PedccSet(centers=centers, num_centers=centers.shape[0],
                              dim=centers.shape[1])
    result = trainer.assign(dataset, head, pedcc)
    io_mod.write_labels(result.labels, args.out)
    print(f"assigned {len(result.labels)} samples to {pedcc.num_centers} "
          f"clusters, mean score {result.scores.mean():.6f}")
    return 0


def _cmd_eval(args) -> int:
    pair = metrics.LabelPair(predicted=io_mod.read_labels(args.pred),
                             truth=io_mod.read_labels(args.truth))
    k = int(max(pair.predicted.max(), pair.truth.max())) + 1
    acc = metrics.cluster_accuracy(pair, k)
    print(f"acc={acc:.6f} nmi={metrics.nmi(pair):.6f}")
    return 0


def _cmd_eval_loss(args) -> int:
    dataset = io_mod.read_embd(args.embeddings)
    head = head_mod.load_checkpoint(args.checkpoint)
    centers = io_mod.read_embd(args.centers).data.astype(np.float64)
    pedcc = geometry.PedccSet(centers=centers, num_centers=centers.shape[0],
                              dim=centers.shape[1])
    weights = LossWeights(args.lambda1, args.lambda2, args.lambda3)
    kernel = KernelConfig("median" if args.sigma == "median" else float(args.sigma))

    data = dataset.data.astype(np.float64)
    rng = np.random.default_rng(args.seed)
    if dataset.num_views:
        aug = dataset.views[0].astype(np.float64)
    else:
        noisy = data + rng.normal(size=data.shape) * args.noise_std
        scale = (np.linalg.norm(data, axis=1, keepdims=True)
                 / np.maximum(np.linalg.norm(noisy, axis=1, keepdims=True), 1e-12))
        aug = noisy * scale
    unit = data / np.maximum(np.linalg.norm(data, axis=1, keepdims=True), 1e-12)
    table = neighbors.build_neighbors(unit, args.m, "cosine")

    for bi, start in enumerate(range(0, dataset.n, args.batch_size)):
        idx = np.arange(start, min(start + args.batch_size, dataset.n))
        z, _ = head_mod.forward(head, data[idx])
        za, _ = head_mod.forward(head, aug[idx])
        zn, _ = head_mod.forward(head, data[table.indices[idx].reshape(-1)])
        batch = LatentBatch(z=z, z_aug=za,
                            z_nbr=zn.reshape(len(idx), args.m, head.d_latent))
        value, terms, *_ = combined_loss(batch, pedcc, weights, kernel)
        print(f"batch={bi} loss1={terms[0]:.6f} loss2={terms[1]:.6f} "
              f"loss3={terms[2]:.6f} loss4={terms[3]:.6f} total={value:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pedcc",
        description="Embedding-space clustering around evenly-distributed "
                    "hypersphere centroids.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate equidistant unit centers")
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--emit-csv", default=None,
                   help="also write centers as CSV, 17 significant digits")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("knn", help="build an exact nearest-neighbor table")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--metric", choices=("cosine", "euclidean"), default="cosine")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_knn)

    p = sub.add_parser("train", help="run the clustering optimization")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--views", default=None)
    p.add_argument("--labels", default=None, help="evaluation only")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("assign", help="assign clusters with a trained head")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--centers", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_assign)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("eval-loss", help="print the four loss terms per batch")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--centers", required=True)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--sigma", default="median")
    p.add_argument("--lambda1", type=float, default=9.0)
    p.add_argument("--lambda2", type=float, default=2.0)
    p.add_argument("--lambda3", type=float, default=2.0)
    p.add_argument("--noise-std", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_eval_loss)
    return parser


def run_cli(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
