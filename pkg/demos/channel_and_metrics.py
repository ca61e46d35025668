"""Walk through the channel models and the quality metrics on a real photo.

    python demos/channel_and_metrics.py
"""

import argparse
import math

import numpy as np
import torch

from jscclab.channel import power_normalize, transmit, transmit_fading
from jscclab.harness.data import sample_photos
from jscclab.metrics import bd_rate, ms_ssim, ms_ssim_db, psnr

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--k", type=int, default=100_000, help="symbols per channel test")
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

# unit-power complex symbols out of arbitrary reals
g = torch.Generator().manual_seed(args.seed)
y = power_normalize(torch.randn(2 * args.k, generator=g) * 7.0)
print(f"mean symbol power after normalisation: {(y.abs() ** 2).mean().item():.6f}")

for kind in ("awgn", "rayleigh-fast", "rayleigh-block"):
    for snr in (1, 7, 13):
        rx = transmit(y, snr, kind, seed=args.seed)
        err = (rx - y).abs().pow(2).mean().item()
        print(f"{kind:>15} {snr:>3} dB  residual power after equalisation {err:.4f}")

_, csi = transmit_fading(y, 10, "rayleigh-fast", seed=args.seed)
print(f"E|h|^2 on the fast fading channel: {(csi.h.abs() ** 2).mean().item():.4f}")

# PSNR and MS-SSIM of a noisy copy of the astronaut
name, img = sample_photos()[0]
x = img.astype(np.float64) / 255.0
rng = np.random.default_rng(args.seed)
for sigma in (0.01, 0.05, 0.1):
    noisy = np.clip(x + rng.normal(0, sigma, x.shape), 0, 1)
    ms = ms_ssim(x, noisy)
    print(f"{name} + N(0, {sigma}^2): PSNR {psnr(x, noisy):.2f} dB, MS-SSIM {ms:.4f} ({ms_ssim_db(ms):.2f} dB)")

# a codec that needs half the rate for the same quality saves 50%
rates = np.array([0.0208, 0.0417, 0.0625, 0.0833, 0.125])
quality = 20 + 4 * np.log2(rates / rates[0])
print(f"BD-rate of a half-rate curve: {bd_rate(list(zip(rates, quality)), list(zip(rates / 2, quality))):.2f}%")
print(f"capacity at 10 dB: {math.log2(11):.3f} bits per symbol")
