"""Evaluation sweeps: SNR x rate surfaces, receptive fields, latency, and the
convolutional width study."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from .. import channel as ch
from .. import metrics
from ..codec import CodecConfig, count_parameters
from ..model import JSCCModel
from ..rate_modnet import RATE_GRID, bits_to_symbols, mask_side_info_cost
from ..training import SNR_GRID, TrainPhaseConfig, evaluate_psnr, run_training

log = logging.getLogger(__name__)

CSV_FIELDS = ["dataset", "image_id", "snr_db", "cbr", "metric", "value", "target_cbr", "k", "m",
              "side_info_bits", "side_info_symbols", "status"]
CSV_META = "# side_info_symbols = side_info_bits / log2(1 + 10^(snr_db/10))"


@dataclass
class ExperimentSpec:
    variant: str = "sa_ra"
    size: str = "B"
    channel: str = "awgn"
    snr_grid: tuple = SNR_GRID
    rate_grid: tuple = RATE_GRID
    dataset: str = ""
    seed: int = 0
    out_dir: str = "results"
    repeats: int = 10
    metrics: tuple = ("psnr", "msssim")

    def __post_init__(self):
        self.snr_grid = tuple(float(v) for v in self.snr_grid)
        self.rate_grid = tuple(float(v) for v in self.rate_grid)
        self.metrics = tuple(self.metrics)
        if not self.snr_grid or not self.rate_grid:
            raise ValueError("snr and rate grids must be non-empty")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.size not in ("S", "B", "L", "low", "custom"):
            raise ValueError(f"unknown size {self.size!r}")


@dataclass
class RDSurface:
    """Mean scores over an SNR x rate grid for one model."""

    snr_grid: tuple = ()
    rate_grid: tuple = ()
    values: dict = field(default_factory=dict)  # metric -> (n_snr, n_rate) array
    stderr: dict = field(default_factory=dict)  # metric -> (n_snr, n_rate) array
    points: list = field(default_factory=list)
    failed: list = field(default_factory=list)

    def grid(self, metric: str = "psnr") -> np.ndarray:
        """NaN marks failed cells."""
        return self.values[metric]

    def _put(self, metric, i, j, mean, se):
        shape = (len(self.snr_grid), len(self.rate_grid))
        self.values.setdefault(metric, np.full(shape, np.nan))[i, j] = mean
        self.stderr.setdefault(metric, np.full(shape, np.nan))[i, j] = se


def cell_generator(seed: int, i: int, j: int) -> torch.Generator:
    s = np.random.SeedSequence([seed, i, j]).generate_state(1)[0]
    return torch.Generator().manual_seed(int(s))


def _format(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_rows(path, rows: Sequence[dict]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(CSV_META + "\n")
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: _format(r.get(k, "")) for k in CSV_FIELDS})


def read_rows(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


@torch.no_grad()
def rd_sweep(spec: ExperimentSpec, model: JSCCModel, images: Sequence[torch.Tensor],
             image_ids: Optional[Sequence[str]] = None, csv_path=None, plot_path=None,
             dataset_name: str = "") -> RDSurface:
    """Transmit every image ``spec.repeats`` times per (snr, rate) cell and
    record mean scores."""
    model.eval()
    image_ids = list(image_ids or [f"img{i:03d}" for i in range(len(images))])
    dtype = next(model.parameters()).dtype
    surface = RDSurface(spec.snr_grid, spec.rate_grid)
    rows = []
    for i, snr in enumerate(spec.snr_grid):
        for j, rate in enumerate(spec.rate_grid):
            gen = cell_generator(spec.seed, i, j)
            try:
                cell_rows, cell_scores, cbr = _sweep_cell(spec, model, images, image_ids, snr, rate, gen, dtype)
            except Exception as exc:  # keep sweeping; the cell is flagged
                log.warning("cell snr=%s rate=%s failed: %s", snr, rate, exc)
                surface.failed.append((snr, rate))
                rows.append({"dataset": dataset_name, "image_id": "*", "snr_db": snr, "cbr": "",
                             "metric": "", "value": "", "target_cbr": rate, "status": f"failed: {exc}"})
                continue
            for r in cell_rows:
                r["dataset"] = dataset_name
            rows.extend(cell_rows)
            for metric, (mean, se) in cell_scores.items():
                surface._put(metric, i, j, mean, se)
                surface.points.append(metrics.RDPoint(cbr, snr, metrics.QualityScore(metric, mean)))
    if csv_path is not None:
        write_rows(csv_path, rows)
    if plot_path is not None:
        plot_surface(surface, plot_path)
    return surface


def _sweep_cell(spec, model, images, image_ids, snr, rate, gen, dtype):
    """Rows per image plus ``metric -> (mean, standard error over all draws)``."""
    rows = []
    draws_all: dict = {}
    rate_arg = rate if model.config.rate_adaptive else None
    cbr = None
    for name, img in zip(image_ids, images):
        x = img.unsqueeze(0).to(dtype) if img.dim() == 3 else img.to(dtype)
        H, W = x.shape[-2:]
        wanted = [m for m in spec.metrics if m != "msssim" or min(H, W) >= metrics.MSSSIM_MIN_SIZE]
        draws: dict = {m: [] for m in wanted}
        for _ in range(spec.repeats):
            x_hat, info = model(x, snr, rate_arg, channel=spec.channel, generator=gen)
            if "psnr" in draws:
                draws["psnr"].append(metrics.psnr(x, x_hat))
            if "msssim" in draws:
                ms = metrics.ms_ssim(x, x_hat)
                draws["msssim"].append(ms)
                draws.setdefault("msssim_db", []).append(metrics.ms_ssim_db(ms))
        k, m = info.k[0], info.m
        cbr = k / m
        bits = mask_side_info_cost(info.mask[0]).raw_bits if model.config.rate_adaptive else 0
        base = {"image_id": name, "snr_db": snr, "cbr": cbr, "target_cbr": rate, "k": k, "m": m,
                "side_info_bits": bits, "side_info_symbols": bits_to_symbols(bits, snr), "status": "ok"}
        for metric, vals in draws.items():
            if metric == "msssim_db":
                # dB of the mean score, not the mean of per-draw dB values
                value = metrics.ms_ssim_db(float(np.mean(draws["msssim"])))
            else:
                value = float(np.mean(vals))
            rows.append({**base, "metric": metric, "value": value})
            draws_all.setdefault(metric, []).extend(vals)
    scores = {}
    for metric, vals in draws_all.items():
        vals = np.asarray(vals)
        se = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        scores[metric] = (float(vals.mean()), se)
    return rows, scores, cbr


def monotonicity_flags(surface: RDSurface, metric: str = "psnr", along: str = "snr", tol: float = 0.1):
    """Cells where quality drops by more than ``tol`` when SNR (or rate) grows
    with the other axis fixed."""
    g = surface.grid(metric)
    flags = []
    if along == "snr":
        for j, rate in enumerate(surface.rate_grid):
            for i in range(1, len(surface.snr_grid)):
                if g[i, j] < g[i - 1, j] - tol:
                    flags.append((surface.snr_grid[i], rate))
    else:
        for i, snr in enumerate(surface.snr_grid):
            for j in range(1, len(surface.rate_grid)):
                if g[i, j] < g[i, j - 1] - tol:
                    flags.append((snr, surface.rate_grid[j]))
    return flags


def plot_surface(surface: RDSurface, path, metric: str = "psnr"):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    g = surface.grid(metric)
    fig = plt.figure(figsize=(6, 4.5))
    if g.shape[0] > 1 and g.shape[1] > 1:
        ax = fig.add_subplot(projection="3d")
        R, S = np.meshgrid(surface.rate_grid, surface.snr_grid)
        ax.plot_surface(R, S, g, cmap="viridis")
        ax.set_xlabel("CBR")
        ax.set_ylabel("SNR (dB)")
        ax.set_zlabel(metric)
    else:
        ax = fig.add_subplot()
        if g.shape[0] == 1:
            ax.plot(surface.rate_grid, g[0], "o-")
            ax.set_xlabel("CBR")
        else:
            ax.plot(surface.snr_grid, g[:, 0], "o-")
            ax.set_xlabel("SNR (dB)")
        ax.set_ylabel(metric)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# ---------------------------------------------------------------------------
# effective receptive field


def erf_target(model: JSCCModel) -> Callable[[torch.Tensor], torch.Tensor]:
    """Last-stage tokens of the encoder, taken before its final LayerNorm.

    The channel sum of a LayerNorm output is constant, so its gradient would
    vanish everywhere.
    """
    if model.config.backbone == "conv":
        return model.encoder
    return lambda x: model.encoder(x, return_stages=True)[1][-1]


def erf_map(encoder: Callable[[torch.Tensor], torch.Tensor], images: Sequence[torch.Tensor],
            crop: int = 512, out_png=None) -> np.ndarray:
    """Mean absolute input gradient of the centre latent position.

    ``encoder`` maps ``(B, 3, H, W)`` to a channels-last latent.  The
    gradient of the centre position's channel sum is divided by the channel
    count and averaged over colour channels and images.
    """
    total = None
    for img in images:
        x = img if img.dim() == 4 else img.unsqueeze(0)
        H, W = x.shape[-2:]
        if H < crop or W < crop:
            raise ValueError(f"image {H}x{W} cannot be cropped to {crop}x{crop}")
        top, left = (H - crop) // 2, (W - crop) // 2
        x = x[..., top:top + crop, left:left + crop].detach().clone().requires_grad_(True)
        y = encoder(x)
        h, w, C = y.shape[1:]
        y[0, h // 2, w // 2].sum().backward()
        g = (x.grad.abs() / C).mean(dim=1)[0].detach().double().numpy()
        total = g if total is None else total + g
    erf = total / len(images)
    if out_png is not None:
        save_heatmaps({"erf": erf}, out_png)
    return erf


def save_heatmaps(maps: dict, path, zoom: Optional[int] = None):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, len(maps), figsize=(4 * len(maps), 4), squeeze=False)
    for ax, (title, m) in zip(axes[0], maps.items()):
        if zoom:
            cy, cx = m.shape[0] // 2, m.shape[1] // 2
            m = m[cy - zoom:cy + zoom, cx - zoom:cx + zoom]
        ax.imshow(np.log10(m + 1e-12 * (m.max() or 1.0)), cmap="magma")
        ax.set_title(title)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# ---------------------------------------------------------------------------
# latency


@torch.no_grad()
def latency_bench(model: JSCCModel, images: Sequence[torch.Tensor], repetitions: int = 10, snr: float = 10.0,
                  rate: Optional[float] = None, channel: str = "awgn", csv_path=None) -> dict:
    """Mean per-image encode / decode / end-to-end seconds at batch size 1."""
    model.eval()
    dtype = next(model.parameters()).dtype
    rate_arg = rate if model.config.rate_adaptive else None
    gen = torch.Generator().manual_seed(0)
    enc, dec, e2e = [], [], []
    for _ in range(repetitions):
        for img in images:
            x = img.unsqueeze(0).to(dtype) if img.dim() == 3 else img.to(dtype)
            t0 = time.perf_counter()
            symbols, mask = model.encode(x, snr, rate_arg)
            t1 = time.perf_counter()
            received = [ch.transmit(s, snr, channel, gen) for s in symbols]
            t2 = time.perf_counter()
            model.decode(received, mask, snr, tuple(x.shape[-2:]))
            t3 = time.perf_counter()
            enc.append(t1 - t0)
            dec.append(t3 - t2)
            e2e.append(t3 - t0)
    table = {
        "encode_s": float(np.mean(enc)), "decode_s": float(np.mean(dec)), "end_to_end_s": float(np.mean(e2e)),
        "encode_std_s": float(np.std(enc)), "decode_std_s": float(np.std(dec)),
        "parameters": count_parameters(model), "repetitions": repetitions, "images": len(images),
    }
    if csv_path is not None:
        Path(csv_path).parent.mkdir(parents=True, exist_ok=True)
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(table))
            w.writeheader()
            w.writerow(table)
    return table


# ---------------------------------------------------------------------------
# convolutional width study


def width_sweep(widths: Sequence[int], train_data, eval_images: torch.Tensor, stages: int = 2,
                steps: int = 200, snr: float = 7.0, cbr: float = 1 / 6, lr: float = 1e-3, batch_size: int = 8,
                seed: int = 0, csv_path=None) -> list[dict]:
    """Train a convolutional JSCC model per width and report size vs PSNR."""
    rows = []
    for width in widths:
        torch.manual_seed(seed)
        cfg = CodecConfig(depths=(1,) * stages, widths=(width,) * stages, window=1, backbone="conv",
                          conv_width=width, variant="baseline", cbr=cbr)
        model = JSCCModel(cfg)
        phase = TrainPhaseConfig("conv", steps, lr=lr, batch_size=batch_size, snr=snr)
        run_training(model, [phase], train_data, seed=seed)
        rows.append({"width": width, "parameters": count_parameters(model),
                     "psnr": evaluate_psnr(model, eval_images, snr, seed=seed)})
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=["width", "parameters", "psnr"])
            w.writeheader()
            w.writerows(rows)
    return rows
