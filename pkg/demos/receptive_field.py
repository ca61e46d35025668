"""Compare how far an encoder output "sees" for the windowed-attention trunk
and a plain convolutional stack of the same depth.

    python demos/receptive_field.py --crop 256
"""

import argparse
from pathlib import Path

import numpy as np
import torch

from jscclab import JSCCModel, preset
from jscclab.codec import ConvBackbone
from jscclab.harness.data import load_images, write_sample_dataset
from jscclab.harness.experiments import erf_map, erf_target, save_heatmaps

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--crop", type=int, default=256)
parser.add_argument("--conv-width", type=int, default=64)
parser.add_argument("--out", type=Path, default=Path("runs/erf"))
args = parser.parse_args()

torch.manual_seed(0)
images = [img for _, img in load_images(write_sample_dataset(args.out / "photos"))
          if min(img.shape[-2:]) >= args.crop][:3]

swin = JSCCModel(preset("B", widths=(64, 96, 128, 192), variant="baseline", cbr=1 / 16)).eval()
conv = ConvBackbone(args.conv_width, swin.config.stages).eval()
maps = {"windowed attention": erf_map(erf_target(swin), images, args.crop),
        f"conv, width {args.conv_width}": erf_map(conv, images, args.crop)}

for title, m in maps.items():
    mass = m / m.sum()
    ys, xs = np.indices(m.shape)
    cy, cx = (np.array(m.shape) - 1) / 2
    spread = np.sqrt((mass * ((ys - cy) ** 2 + (xs - cx) ** 2)).sum())
    print(f"{title}: rms radius of gradient mass {spread:.1f} px")
args.out.mkdir(parents=True, exist_ok=True)
save_heatmaps(maps, args.out / "erf.png")
print(args.out / "erf.png")
