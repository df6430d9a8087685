"""Command-line entry point: ``herln {stats,communities,train,eval,inspect-checkpoint}``."""
from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import logging
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from .community import build_layered_graph, detect_communities, modularity, read_partition, write_partition
from .config import ABLATIONS, RunConfig, dump_config, parse_config
from .evaluation import average_reports, evaluate, format_report
from .graph import BENCHMARK_STATS, DatasetError, dataset_stats, load_dataset
from .params import CheckpointError, decode_checkpoint, load_checkpoint
from .training import TrainingAborted, build_model, communities_for, train

EXIT_DATA, EXIT_CHECKPOINT, EXIT_ABORT = 2, 3, 4


def _resolve(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = parse_config(Path(args.config).read_text(), cfg)
    run = {}
    for key, attr in (("dataset", "dataset"), ("dataset_root", "data_root"), ("out", "out"), ("mode", "mode")):
        val = getattr(args, attr, None)
        if val is not None:
            run[key] = val
    train = {}
    for key in ("seed", "window", "epochs", "ablation", "dim"):
        val = getattr(args, key, None)
        if val is not None:
            train[key] = val
    return dataclasses.replace(cfg, **run, train=dataclasses.replace(cfg.train, **train))


def _load(cfg: RunConfig):
    return load_dataset(cfg.dataset_root, cfg.dataset)


def cmd_stats(args):
    cfg = _resolve(args)
    stats = dataset_stats(_load(cfg))
    print(f"dataset      {cfg.dataset or cfg.dataset_root}")
    for key in ("entities", "relations", "facts", "timestamps", "train", "valid", "test", "time_interval"):
        print(f"{key:<12} {stats[key]}")
    ref = BENCHMARK_STATS.get(cfg.dataset.upper()) if cfg.dataset else None
    if ref:
        diffs = [k for k in ("entities", "relations", "facts", "timestamps", "train", "valid", "test") if ref[k] != stats[k]]
        print("reference    " + ("match" if not diffs else "MISMATCH " + ",".join(f"{k}={ref[k]}" for k in diffs)))
    return 0


def cmd_communities(args):
    cfg = _resolve(args)
    bundle = _load(cfg)
    g = bundle.train if cfg.train.community_split == "train" else bundle.combined()
    lg = build_layered_graph(g)
    asg = detect_communities(lg, seed=cfg.train.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg.dataset or 'dataset'}.communities.tsv"
    write_partition(asg, path, cfg.train.seed)
    sizes = asg.sizes()
    print(f"K={asg.num_communities} Q={modularity(lg, asg):.6f} file={path}")
    hist = Counter(int(np.ceil(np.log2(s))) if s > 1 else 0 for s in sizes)
    for b in sorted(hist):
        lo, hi = (1, 1) if b == 0 else (2 ** (b - 1) + 1, 2 ** b)
        print(f"size {lo:>6}-{hi:<6} {hist[b]}")
    return 0


def _train_one(cfg: RunConfig, bundle, stamp):
    run_dir = Path(cfg.out) / f"run-{stamp}-seed{cfg.train.seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.ini").write_text(dump_config(cfg))
    asg = None if cfg.train.has("noCommunity") else communities_for(bundle, cfg.train)
    if asg is not None:
        write_partition(asg, run_dir / "communities.tsv", cfg.train.seed)
    result = train(bundle, cfg.train, asg=asg, out_dir=run_dir, log_file=run_dir / "train.log", eval_mode=cfg.mode)
    report = evaluate(result.model, bundle, "test")
    (run_dir / "metrics.txt").write_text(format_report(report, "test", cfg.train.variant) + "\n")
    return run_dir, report


def cmd_train(args):
    cfg = _resolve(args)
    bundle = _load(cfg)
    stamp = dt.datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [cfg.train.seed]
    reports = []
    for seed in seeds:
        run_cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, seed=seed))
        try:
            run_dir, report = _train_one(run_cfg, bundle, stamp)
        except TrainingAborted as exc:
            print(f"training aborted: {exc}", file=sys.stderr)
            return EXIT_ABORT
        print(f"run_dir={run_dir}")
        print(format_report(report, "test", run_cfg.train.variant))
        reports.append(report)
    if len(reports) > 1:
        print(f"\naverage over seeds {','.join(map(str, seeds))}")
        print(format_report(average_reports(reports), "test", cfg.train.variant))
    return 0


def _config_for_checkpoint(args, ckpt: Path) -> RunConfig:
    echo = ckpt.parent / "config.ini"
    if not getattr(args, "config", None) and echo.is_file():
        args.config = str(echo)
    return _resolve(args)


def cmd_eval(args):
    ckpt = Path(args.checkpoint)
    try:
        arrays = load_checkpoint(ckpt)
    except (CheckpointError, OSError) as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    cfg = _config_for_checkpoint(args, ckpt)
    bundle = _load(cfg)
    asg = None
    part = ckpt.parent / "communities.tsv"
    if not cfg.train.has("noCommunity"):
        asg = read_partition(part)[0] if part.is_file() else communities_for(bundle, cfg.train)
    model, _ = build_model(bundle, cfg.train, asg)
    try:
        model.store.load_arrays(arrays)
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    report = evaluate(model, bundle, args.split, modes=(cfg.mode,) if args.mode else ("raw", "filtered"))
    print(format_report(report, args.split, cfg.train.variant))
    return 0


def cmd_inspect(args):
    try:
        arrays = decode_checkpoint(Path(args.checkpoint).read_bytes())
    except (CheckpointError, OSError) as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    total = 0
    for name, arr in arrays.items():
        total += arr.size
        print(f"{name:<28} {str(tuple(arr.shape)):<20} {arr.size}")
    print(f"{len(arrays)} tensors, {total} values, checksum ok")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="herln", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="INI file with [dataset], [output] and [train] sections")
        sp.add_argument("--dataset", help="dataset directory name under the data root")
        sp.add_argument("--data-root", help="directory holding datasets")
        sp.add_argument("--seed", type=int)
        if out:
            sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("stats", help="print dataset counts")
    common(sp, out=False)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("communities", help="detect and cache communities")
    common(sp)
    sp.set_defaults(func=cmd_communities)

    for name, func in (("train", cmd_train), ("eval", cmd_eval)):
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--ablation", help=f"comma list of {', '.join(ABLATIONS)}")
        sp.add_argument("--window", type=int)
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--dim", type=int)
        sp.add_argument("--mode", choices=("raw", "filtered"))
        sp.set_defaults(func=func)
    train_p = sub.choices["train"]
    train_p.add_argument("--seeds", help="comma-separated seeds; metrics are averaged")
    eval_p = sub.choices["eval"]
    eval_p.add_argument("checkpoint")
    eval_p.add_argument("--split", default="test", choices=("train", "valid", "test"))

    sp = sub.add_parser("inspect-checkpoint", help="list tensors in a checkpoint")
    sp.add_argument("checkpoint")
    sp.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DatasetError as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
