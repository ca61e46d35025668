"""Image quality (PSNR, MS-SSIM) and rate-distortion curve comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from scipy.interpolate import PchipInterpolator

PSNR_CAP = 100.0
MSSSIM_DB_CAP = 60.0
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
MSSSIM_MIN_SIZE = 160


@dataclass(frozen=True)
class QualityScore:
    metric: str  # psnr | msssim | msssim_db
    value: float


@dataclass(frozen=True)
class RDPoint:
    cbr: float
    snr_db: float
    score: QualityScore

    def __post_init__(self):
        if not self.cbr > 0:
            raise ValueError("cbr must be positive")


def as_batch(img) -> torch.Tensor:
    """Accept ``(H, W, 3)`` arrays or ``(3, H, W)`` / ``(B, 3, H, W)`` tensors."""
    if isinstance(img, np.ndarray):
        t = torch.from_numpy(np.ascontiguousarray(img))
        if t.dim() == 3 and t.shape[-1] in (1, 3):
            t = t.permute(2, 0, 1)
    else:
        t = img
    if t.dim() == 3:
        t = t.unsqueeze(0)
    if t.dim() != 4:
        raise ValueError(f"expected an image or a batch of images, got shape {tuple(t.shape)}")
    return t


def _check_pair(x, y):
    x, y = as_batch(x), as_batch(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")
    return x, y


def psnr(x, xr) -> float:
    """PSNR in dB on the 8-bit scale for inputs in [0, 1]."""
    x, xr = _check_pair(x, xr)
    mse = torch.mean((x.double() - xr.double()) ** 2).item() * 255.0 ** 2
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(255.0 ** 2 / mse))


def psnr_per_image(x, xr) -> torch.Tensor:
    x, xr = _check_pair(x, xr)
    mse = ((x.double() - xr.double()) ** 2).flatten(1).mean(1)
    out = -10.0 * torch.log10(mse.clamp_min(1e-300))
    return out.clamp(max=PSNR_CAP)


def _gaussian(size: int = 11, sigma: float = 1.5, dtype=torch.float64) -> torch.Tensor:
    coords = torch.arange(size, dtype=dtype) - size // 2
    g = torch.exp(-coords ** 2 / (2 * sigma ** 2))
    return g / g.sum()


def _blur(x: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
    # separable valid filtering; axes shorter than the window are left alone
    C = x.shape[1]
    n = g.numel()
    if x.shape[-2] >= n:
        x = F.conv2d(x, g.view(1, 1, n, 1).repeat(C, 1, 1, 1), groups=C)
    if x.shape[-1] >= n:
        x = F.conv2d(x, g.view(1, 1, 1, n).repeat(C, 1, 1, 1), groups=C)
    return x


def _ssim_cs(x, y, g, c1, c2):
    mu_x, mu_y = _blur(x, g), _blur(y, g)
    sxx = _blur(x * x, g) - mu_x ** 2
    syy = _blur(y * y, g) - mu_y ** 2
    sxy = _blur(x * y, g) - mu_x * mu_y
    cs = (2 * sxy + c2) / (sxx + syy + c2)
    lum = (2 * mu_x * mu_y + c1) / (mu_x ** 2 + mu_y ** 2 + c1)
    return (lum * cs).flatten(2).mean(-1), cs.flatten(2).mean(-1)


def _halve(x):
    H, W = x.shape[-2:]
    return F.avg_pool2d(x[..., : H - H % 2, : W - W % 2], 2)


def ms_ssim_batch(x: torch.Tensor, y: torch.Tensor, data_range: float = 1.0) -> torch.Tensor:
    """Differentiable 5-scale MS-SSIM per image, ``(B,)``."""
    x, y = _check_pair(x, y)
    if min(x.shape[-2:]) < MSSSIM_MIN_SIZE:
        raise ValueError(f"MS-SSIM needs images of at least {MSSSIM_MIN_SIZE} pixels per side")
    g = _gaussian(dtype=x.dtype).to(x.device)
    c1, c2 = (0.01 * data_range) ** 2, (0.03 * data_range) ** 2
    w = torch.tensor(MSSSIM_WEIGHTS, dtype=x.dtype, device=x.device)
    terms = []
    for i in range(len(MSSSIM_WEIGHTS)):
        ssim, cs = _ssim_cs(x, y, g, c1, c2)
        if i < len(MSSSIM_WEIGHTS) - 1:
            terms.append(torch.relu(cs))
            x, y = _halve(x), _halve(y)
    terms.append(torch.relu(ssim))
    stack = torch.stack(terms)  # (scales, B, C)
    per_channel = torch.prod(stack ** w.view(-1, 1, 1), dim=0)
    return per_channel.mean(dim=1)


def ms_ssim(x, xr) -> float:
    x, xr = _check_pair(x, xr)
    return float(ms_ssim_batch(x.double(), xr.double()).mean())


def ms_ssim_db(score: float) -> float:
    """``-10 log10(1 - MS-SSIM)``, capped for perfect scores."""
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"MS-SSIM must lie in [0, 1], got {score}")
    if score >= 1.0:
        return MSSSIM_DB_CAP
    return min(MSSSIM_DB_CAP, -10.0 * math.log10(1.0 - score))


# ---------------------------------------------------------------------------
# BD-rate


def _curve(points) -> tuple[np.ndarray, np.ndarray]:
    if len(points) and isinstance(points[0], RDPoint):
        rate = np.array([p.cbr for p in points], float)
        qual = np.array([p.score.value for p in points], float)
    else:
        arr = np.asarray(points, float)
        rate, qual = arr[:, 0], arr[:, 1]
    if len(rate) < 4:
        raise ValueError("BD-rate needs at least 4 points per curve")
    order = np.argsort(rate)
    rate, qual = rate[order], qual[order]
    if np.any(rate <= 0):
        raise ValueError("rates must be positive")
    if np.any(np.diff(qual) <= 0):
        raise ValueError("quality must increase strictly with rate")
    return rate, qual


def bd_rate(curve_a: Sequence, curve_b: Sequence) -> float:
    """Average rate difference (%) of ``curve_b`` against ``curve_a`` at equal
    quality.  Curves are RDPoint lists or ``(rate, quality)`` pairs; negative
    means ``curve_b`` needs less rate."""
    ra, qa = _curve(curve_a)
    rb, qb = _curve(curve_b)
    lo, hi = max(qa[0], qb[0]), min(qa[-1], qb[-1])
    if hi <= lo:
        raise ValueError("curves have no overlapping quality range")
    ia = PchipInterpolator(qa, np.log(ra)).integrate(lo, hi)
    ib = PchipInterpolator(qb, np.log(rb)).integrate(lo, hi)
    return float((math.exp((ib - ia) / (hi - lo)) - 1.0) * 100.0)
