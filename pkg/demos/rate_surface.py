"""Sweep a trained SNR & rate adaptive checkpoint over the SNR x CBR grid and
plot the resulting PSNR surface.  With no checkpoint a small model is trained
first with the three-phase schedule (slow on a CPU).

    python demos/rate_surface.py --checkpoint runs/ra/model.swjc
"""

import argparse
from pathlib import Path

import torch

from jscclab import JSCCModel, preset
from jscclab.harness.checkpoint import load_model, save_checkpoint
from jscclab.harness.data import TrainCrops, load_images, write_sample_dataset
from jscclab.harness.experiments import ExperimentSpec, monotonicity_flags, rd_sweep
from jscclab.rate_modnet import RATE_GRID
from jscclab.training import paper_schedule, run_training

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--checkpoint", type=Path)
parser.add_argument("--steps", type=int, nargs=3, default=(150, 150, 300))
parser.add_argument("--repeats", type=int, default=2)
parser.add_argument("--out", type=Path, default=Path("runs/ra"))
args = parser.parse_args()

torch.set_num_threads(1)
photos = load_images(write_sample_dataset(args.out / "photos"))
held_out = {"chelsea", "coffee"}

if args.checkpoint:
    model = load_model(args.checkpoint)
else:
    torch.manual_seed(0)
    model = JSCCModel(preset("B", widths=(64, 96, 128, 192), variant="sa_ra"))
    crops = TrainCrops([(n, img) for n, img in photos if n not in held_out], 256)
    run_training(model, paper_schedule(args.steps, batch_size=2), crops,
                 progress=lambda s, l: print(f"step {s} loss {l:.5f}") if s % 25 == 0 else None)
    save_checkpoint(model, args.out / "model.swjc")

test = TrainCrops([(n, img) for n, img in photos if n in held_out], 256).sample(4, torch.Generator().manual_seed(123))
spec = ExperimentSpec(rate_grid=RATE_GRID, repeats=args.repeats, metrics=("psnr",))
surface = rd_sweep(spec, model, list(test), csv_path=args.out / "surface.csv", plot_path=args.out / "surface.png")
print(surface.grid("psnr").round(2))
print("drops along SNR:", monotonicity_flags(surface, along="snr"))
print("drops along rate:", monotonicity_flags(surface, along="rate"))
