"""Command line entry point: ``jscclab {train,eval,sweep,erf,bench,export}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import torch

from ..channel import KINDS
from ..codec import ConvBackbone
from ..model import JSCCModel
from ..training import run_training
from . import data
from .checkpoint import load_checkpoint, load_model
from .config import ConfigError, RunConfig, load_config
from .experiments import (ExperimentSpec, erf_map, erf_target, latency_bench, monotonicity_flags, rd_sweep,
                          save_heatmaps)

log = logging.getLogger("jscclab")


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path)
    common.add_argument("--checkpoint", type=Path)
    common.add_argument("--dataset", type=Path)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=Path, default=Path("results"))
    common.add_argument("--channel", choices=KINDS, default=None)
    common.add_argument("--snr", type=_floats, default=None, help="dB, one value or a comma separated list")
    common.add_argument("--cbr", type=_floats, default=None, help="one value or a comma separated list")
    common.add_argument("--metric", choices=("psnr", "msssim"), default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="jscclab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train a model from a config file")
    ev = sub.add_parser("eval", parents=[common], help="score a checkpoint at given SNR/CBR points")
    ev.add_argument("--repeats", type=int, default=1)
    sw = sub.add_parser("sweep", parents=[common], help="SNR x CBR surface for a checkpoint")
    sw.add_argument("--repeats", type=int, default=None)
    erf = sub.add_parser("erf", parents=[common], help="effective receptive field map")
    erf.add_argument("--crop", type=int, default=512)
    erf.add_argument("--conv-width", type=int, default=None, help="also map a conv backbone of this width")
    bench = sub.add_parser("bench", parents=[common], help="latency at batch size 1")
    bench.add_argument("--repetitions", type=int, default=10)
    sub.add_parser("export", parents=[common], help="dump checkpoint weights to .npz plus config JSON")
    return p


def _run_config(args) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig()


def _need(value, flag):
    if value is None:
        raise SystemExit(f"error: {flag} is required")
    return value


def cmd_train(args, run: RunConfig):
    if run.codec is None or not run.phases:
        raise SystemExit("error: training needs a config with [model] and at least one [phase.N]")
    dataset = args.dataset or run.train.get("dataset")
    dataset = _need(dataset, "--dataset")
    seed = args.seed if args.seed is not None else run.train.get("seed", 0)
    mode = {"psnr": "mse", "msssim": "one_minus_msssim"}.get(args.metric) or run.train.get("mode", "mse")
    phases = run.phases
    if args.channel:
        for ph in phases:
            ph.channel = args.channel
    crops = data.TrainCrops(data.load_images(dataset), run.train.get("crop", 256))
    torch.manual_seed(seed)
    model = JSCCModel(run.codec)
    args.out.mkdir(parents=True, exist_ok=True)
    run_training(model, phases, crops, mode=mode, seed=seed, log_csv=args.out / "train_log.csv",
                 checkpoint=args.out / "model.swjc",
                 progress=lambda s, l: log.info("step %d loss %.5f", s, l) if s % 50 == 0 else None)
    print(args.out / "model.swjc")


def _spec(args, run: RunConfig, model: JSCCModel) -> ExperimentSpec:
    spec = run.experiment or ExperimentSpec(variant=model.config.variant, size="custom")
    if args.snr:
        spec.snr_grid = args.snr
    if args.cbr:
        spec.rate_grid = args.cbr
    elif not model.config.rate_adaptive and run.experiment is None:
        spec.rate_grid = (model.config.cbr,)
    if args.channel:
        spec.channel = args.channel
    if args.seed is not None:
        spec.seed = args.seed
    if args.metric:
        spec.metrics = (args.metric,)
    if getattr(args, "repeats", None):
        spec.repeats = args.repeats
    return spec


def cmd_sweep(args, run: RunConfig, plot=True):
    model = load_model(_need(args.checkpoint, "--checkpoint"))
    spec = _spec(args, run, model)
    dataset = _need(args.dataset or (Path(spec.dataset) if spec.dataset else None), "--dataset")
    ids, images = data.eval_batch(dataset, multiple=max(128, 2 ** model.config.stages))
    args.out.mkdir(parents=True, exist_ok=True)
    name = "sweep" if plot else "eval"
    surface = rd_sweep(spec, model, images, ids, csv_path=args.out / f"{name}.csv",
                       plot_path=args.out / f"{name}.png" if plot else None, dataset_name=Path(dataset).name)
    flags = monotonicity_flags(surface, "psnr") if "psnr" in surface.values else []
    for snr, rate in flags:
        log.warning("PSNR drops with increasing SNR at snr=%s cbr=%s", snr, rate)
    for metric, grid in surface.values.items():
        print(f"{metric}: rows=snr {list(spec.snr_grid)}, cols=cbr {list(spec.rate_grid)}")
        print(np.array2string(grid, precision=3))
    if surface.failed:
        print(f"failed cells: {surface.failed}")


def cmd_erf(args, run: RunConfig):
    model = load_model(_need(args.checkpoint, "--checkpoint"))
    _, images = data.eval_batch(_need(args.dataset, "--dataset"))
    args.out.mkdir(parents=True, exist_ok=True)
    maps = {"checkpoint encoder": erf_map(erf_target(model), images, args.crop)}
    if args.conv_width:
        torch.manual_seed(args.seed or 0)
        conv = ConvBackbone(args.conv_width, model.config.stages)
        maps[f"conv backbone (C={args.conv_width})"] = erf_map(conv, images, args.crop)
    for i, m in enumerate(maps.values()):
        np.save(args.out / f"erf_{i}.npy", m)
    save_heatmaps(maps, args.out / "erf.png")
    print(args.out / "erf.png")


def cmd_bench(args, run: RunConfig):
    model = load_model(_need(args.checkpoint, "--checkpoint"))
    _, images = data.eval_batch(_need(args.dataset, "--dataset"), multiple=max(128, 2 ** model.config.stages))
    snr = args.snr[0] if args.snr else 10.0
    rate = args.cbr[0] if args.cbr else (0.125 if model.config.rate_adaptive else None)
    args.out.mkdir(parents=True, exist_ok=True)
    table = latency_bench(model, images, args.repetitions, snr, rate, args.channel or "awgn",
                          csv_path=args.out / "latency.csv")
    for k, v in table.items():
        print(f"{k:>14}: {v}")


def cmd_export(args, run: RunConfig):
    params, config = load_checkpoint(_need(args.checkpoint, "--checkpoint"))
    args.out.mkdir(parents=True, exist_ok=True)
    np.savez(args.out / "weights.npz", **{k: v.numpy() for k, v in params.items()})
    (args.out / "config.json").write_text(json.dumps(config.to_dict(), indent=2), encoding="utf-8")
    print(args.out / "weights.npz")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        run = _run_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    handlers = {"train": cmd_train, "eval": lambda a, r: cmd_sweep(a, r, plot=False), "sweep": cmd_sweep,
                "erf": cmd_erf, "bench": cmd_bench, "export": cmd_export}
    handlers[args.command](args, run)
    return 0


if __name__ == "__main__":
    sys.exit(main())
