"""Losses, condition sampling and the phased training loop."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import torch

from .metrics import ms_ssim_batch, psnr_per_image
from .model import JSCCModel
from .rate_modnet import RATE_GRID

log = logging.getLogger(__name__)

SNR_GRID = (1.0, 4.0, 7.0, 10.0, 13.0)
LOSS_MODES = ("mse", "one_minus_msssim")


@dataclass
class TrainPhaseConfig:
    name: str = "phase"
    steps: int = 100
    lr: float = 1e-4
    batch_size: int = 16
    snr_policy: str = "fixed"  # fixed | grid | uniform
    snr: float = 13.0
    snr_grid: tuple = SNR_GRID
    snr_range: tuple = (1.0, 13.0)
    rate_policy: str = "fixed"  # fixed | grid
    rate: float = 0.125
    rate_grid: tuple = RATE_GRID
    trainable: str = "all"  # all | except_modnets
    channel: str = "awgn"

    def __post_init__(self):
        self.snr_grid = tuple(float(v) for v in self.snr_grid)
        self.snr_range = tuple(float(v) for v in self.snr_range)
        self.rate_grid = tuple(float(v) for v in self.rate_grid)
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.snr_policy not in ("fixed", "grid", "uniform"):
            raise ValueError(f"unknown snr policy {self.snr_policy!r}")
        if self.rate_policy not in ("fixed", "grid"):
            raise ValueError(f"unknown rate policy {self.rate_policy!r}")
        if self.trainable not in ("all", "except_modnets"):
            raise ValueError(f"unknown trainable subset {self.trainable!r}")


def paper_schedule(steps=(1000, 1000, 2000), **common) -> list[TrainPhaseConfig]:
    """Fixed (13 dB, 0.125), then variable rate at 13 dB, then variable rate
    and SNR."""
    return [
        TrainPhaseConfig("fixed", steps[0], snr_policy="fixed", snr=13.0, rate_policy="fixed", rate=0.125, **common),
        TrainPhaseConfig("rate", steps[1], snr_policy="fixed", snr=13.0, rate_policy="grid", **common),
        TrainPhaseConfig("rate_snr", steps[2], snr_policy="grid", rate_policy="grid", **common),
    ]


def single_adaptive_schedule(steps=(1000, 1000), **common) -> list[TrainPhaseConfig]:
    """Everything but the ModNets first, then the whole model."""
    return [
        TrainPhaseConfig("backbone", steps[0], trainable="except_modnets", **common),
        TrainPhaseConfig("full", steps[1], trainable="all", **common),
    ]


def loss(x: torch.Tensor, xr: torch.Tensor, mode: str = "mse") -> torch.Tensor:
    if x.shape != xr.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(xr.shape)}")
    if mode == "mse":
        return torch.mean((x - xr) ** 2)
    if mode == "one_minus_msssim":
        return 1.0 - ms_ssim_batch(x, xr).mean()
    raise ValueError(f"unknown loss mode {mode!r}")


def sample_condition(phase: TrainPhaseConfig, batch: int = 1, generator: Optional[torch.Generator] = None):
    """Per-sample (snr_db, rate) tensors of length ``batch``."""
    if isinstance(generator, int):
        generator = torch.Generator().manual_seed(generator)
    if phase.snr_policy == "fixed":
        snr = torch.full((batch,), phase.snr, dtype=torch.float64)
    elif phase.snr_policy == "grid":
        grid = torch.tensor(phase.snr_grid, dtype=torch.float64)
        snr = grid[torch.randint(len(grid), (batch,), generator=generator)]
    else:
        lo, hi = phase.snr_range
        snr = lo + (hi - lo) * torch.rand(batch, dtype=torch.float64, generator=generator)
    if phase.rate_policy == "fixed":
        rate = torch.full((batch,), phase.rate, dtype=torch.float64)
    else:
        grid = torch.tensor(phase.rate_grid, dtype=torch.float64)
        rate = grid[torch.randint(len(grid), (batch,), generator=generator)]
    return snr, rate


def _draw_batch(data, batch: int, generator: torch.Generator) -> torch.Tensor:
    if hasattr(data, "sample"):
        return data.sample(batch, generator)
    idx = torch.randint(len(data), (batch,), generator=generator)
    return data[idx]


@dataclass
class TrainResult:
    model: JSCCModel
    history: list = field(default_factory=list)


def run_training(model: JSCCModel, phases: Sequence[TrainPhaseConfig], data, mode: str = "mse", seed: int = 0,
                 log_csv: Optional[Path] = None, validate: Optional[Callable[[JSCCModel], float]] = None,
                 val_every: int = 0, checkpoint: Optional[Path] = None, clip_norm: float = 1.0,
                 progress: Optional[Callable[[int, float], None]] = None) -> TrainResult:
    """Train ``model`` in place through ``phases`` with one Adam optimiser
    whose state carries across phases."""
    torch.manual_seed(seed)
    data_gen = torch.Generator().manual_seed(seed)
    cond_gen = torch.Generator().manual_seed(seed + 1)
    chan_gen = torch.Generator().manual_seed(seed + 2)
    params = list(model.parameters())
    opt = torch.optim.Adam(params, lr=phases[0].lr if phases else 1e-4)
    modnet_ids = {id(p) for p in model.modnet_parameters()}
    dtype = next(model.parameters()).dtype
    history = []
    writer = fh = None
    if log_csv is not None:
        fh = open(log_csv, "w", newline="", encoding="utf-8")
        writer = csv.writer(fh)
        writer.writerow(["phase", "step", "loss", "val"])
    model.train()
    step = 0
    try:
        for phase in phases:
            for p in params:
                p.requires_grad_(phase.trainable == "all" or id(p) not in modnet_ids)
            for g in opt.param_groups:
                g["lr"] = phase.lr
            for _ in range(phase.steps):
                x = _draw_batch(data, phase.batch_size, data_gen).to(dtype)
                snr, rate = sample_condition(phase, x.shape[0], cond_gen)
                rate_arg = rate if model.config.rate_adaptive else None
                x_hat, _ = model(x, snr, rate_arg, channel=phase.channel, generator=chan_gen)
                value = loss(x, x_hat, mode)
                if not torch.isfinite(value):
                    raise FloatingPointError(f"non-finite loss at step {step} ({phase.name})")
                opt.zero_grad(set_to_none=True)
                value.backward()
                if clip_norm:
                    torch.nn.utils.clip_grad_norm_([p for p in params if p.grad is not None], clip_norm)
                opt.step()
                step += 1
                row = {"phase": phase.name, "step": step, "loss": value.item(), "val": None}
                if validate is not None and val_every and step % val_every == 0:
                    model.eval()
                    row["val"] = float(validate(model))
                    model.train()
                history.append(row)
                if writer is not None:
                    writer.writerow([row["phase"], row["step"], f"{row['loss']:.8g}",
                                     "" if row["val"] is None else f"{row['val']:.6g}"])
                if progress is not None:
                    progress(step, row["loss"])
    finally:
        for p in params:
            p.requires_grad_(True)
        if fh is not None:
            fh.close()
    model.eval()
    if checkpoint is not None:
        from .harness.checkpoint import save_checkpoint
        save_checkpoint(model, checkpoint)
    return TrainResult(model, history)


@torch.no_grad()
def evaluate_psnr(model: JSCCModel, images: torch.Tensor, snr_db: float, rate=None, channel="awgn",
                  repeats: int = 1, seed: int = 0) -> float:
    """Mean PSNR over images and ``repeats`` noise draws."""
    model.eval()
    gen = torch.Generator().manual_seed(seed)
    dtype = next(model.parameters()).dtype
    images = images.to(dtype)
    total = 0.0
    for _ in range(repeats):
        x_hat, _ = model(images, snr_db, rate, channel=channel, generator=gen)
        total += float(psnr_per_image(images, x_hat).mean())
    return total / repeats
