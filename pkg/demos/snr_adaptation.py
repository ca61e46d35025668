"""Train the two-stage SNR-adaptive model on 32x32 tiles and watch it degrade
gracefully as the channel gets worse.

    python demos/snr_adaptation.py --steps 300 300 --out runs/sa
"""

import argparse
from pathlib import Path

import torch

from jscclab import JSCCModel, preset
from jscclab.harness.checkpoint import save_checkpoint
from jscclab.harness.data import TrainCrops, load_images, write_sample_dataset
from jscclab.training import evaluate_psnr, run_training, single_adaptive_schedule

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--steps", type=int, nargs=2, default=(300, 300), help="backbone steps, then full-model steps")
parser.add_argument("--batch-size", type=int, default=16)
parser.add_argument("--lr", type=float, default=1e-4)
parser.add_argument("--out", type=Path, default=Path("runs/sa"))
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

torch.set_num_threads(1)
train = load_images(write_sample_dataset(args.out / "train", size=32, tiles_per_image=64, seed=0))
test_dir = write_sample_dataset(args.out / "test", size=32, tiles_per_image=4, seed=1)
test = torch.stack([img for _, img in load_images(test_dir)])

torch.manual_seed(args.seed)
model = JSCCModel(preset("low", variant="sa", cbr=1 / 3))
snrs = (1, 4, 7, 10, 13)
before = [evaluate_psnr(model, test, s) for s in snrs]

phases = single_adaptive_schedule(args.steps, lr=args.lr, batch_size=args.batch_size, snr_policy="uniform",
                                  rate=1 / 3)
run_training(model, phases, TrainCrops(train, 32), seed=args.seed, log_csv=args.out / "train_log.csv",
             progress=lambda s, l: print(f"step {s} loss {l:.5f}") if s % 50 == 0 else None)
save_checkpoint(model, args.out / "model.swjc")

print("SNR (dB)  untrained  trained")
for s, b in zip(snrs, before):
    print(f"{s:>8}  {b:9.2f}  {evaluate_psnr(model, test, s, repeats=3):7.2f}")
