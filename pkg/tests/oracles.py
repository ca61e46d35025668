"""Independent reference computations used to check the package."""

from __future__ import annotations

import math

import numpy as np
import torch
from scipy.signal import correlate2d


# -- finite differences ------------------------------------------------------


def central_difference(fn, tensor: torch.Tensor, step: float = 1e-5, max_coords: int | None = None, seed: int = 0):
    """Numerical gradient of scalar ``fn()`` w.r.t. ``tensor`` (perturbed in
    place).  Returns (flat indices, gradient values)."""
    flat = tensor.data.view(-1)
    n = flat.numel()
    if max_coords is None or n <= max_coords:
        idx = np.arange(n)
    else:
        idx = np.random.default_rng(seed).choice(n, max_coords, replace=False)
    out = np.empty(len(idx))
    with torch.no_grad():
        for j, i in enumerate(idx):
            orig = flat[i].item()
            flat[i] = orig + step
            plus = float(fn())
            flat[i] = orig - step
            minus = float(fn())
            flat[i] = orig
            out[j] = (plus - minus) / (2 * step)
    return idx, out


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest coordinate error relative to the gradient's largest entry."""
    scale = max(np.abs(numeric).max(), np.abs(analytic).max(), 1e-12)
    return float(np.abs(analytic - numeric).max() / scale)


def gradient_check(fn, tensors, step: float = 1e-5, max_coords: int | None = 60) -> float:
    """Max relative error over ``tensors`` between autograd and central
    differences of ``fn``."""
    for t in tensors:
        t.grad = None
    value = fn()
    grads = torch.autograd.grad(value, tensors, allow_unused=True)
    worst = 0.0
    for k, (t, g) in enumerate(zip(tensors, grads)):
        g = torch.zeros_like(t) if g is None else g
        idx, num = central_difference(fn, t, step, max_coords, seed=k)
        worst = max(worst, relative_error(g.detach().reshape(-1).numpy()[idx], num))
    return worst


# -- MS-SSIM -----------------------------------------------------------------

WEIGHTS = np.array([0.0448, 0.2856, 0.3001, 0.2363, 0.1333])


def _window2d(size=11, sigma=1.5):
    ax = np.arange(size) - size // 2
    g = np.exp(-ax ** 2 / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def _block_mean(a):
    h, w = a.shape[0] // 2 * 2, a.shape[1] // 2 * 2
    a = a[:h, :w]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def ms_ssim_oracle(x: np.ndarray, y: np.ndarray) -> float:
    """Five-scale MS-SSIM of two ``(H, W, 3)`` images in [0, 1], computed per
    colour plane with a 2-D Gaussian window and averaged over planes.  Every
    scale must be at least 11 pixels per side."""
    win = _window2d()
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    per_plane = []
    for c in range(x.shape[2]):
        a, b = x[..., c].astype(np.float64), y[..., c].astype(np.float64)
        factors = []
        for scale in range(5):
            f = lambda z: correlate2d(z, win, mode="valid")
            ma, mb = f(a), f(b)
            va, vb, cov = f(a * a) - ma ** 2, f(b * b) - mb ** 2, f(a * b) - ma * mb
            cs = np.mean((2 * cov + c2) / (va + vb + c2))
            if scale < 4:
                factors.append(max(cs, 0.0) ** WEIGHTS[scale])
                a, b = _block_mean(a), _block_mean(b)
            else:
                ssim = np.mean((2 * ma * mb + c1) / (ma ** 2 + mb ** 2 + c1) * (2 * cov + c2) / (va + vb + c2))
                factors.append(max(ssim, 0.0) ** WEIGHTS[scale])
        per_plane.append(np.prod(factors))
    return float(np.mean(per_plane))


# -- channel masks -----------------------------------------------------------


def top_c_oracle(rep: np.ndarray, C: int) -> np.ndarray:
    """Sort channels by (spatial mean desc, index asc) and keep the first C."""
    n = rep.shape[-1]
    means = rep.reshape(-1, n).mean(axis=0)
    order = sorted(range(n), key=lambda i: (-means[i], i))
    keep = np.zeros(n)
    keep[order[:C]] = 1
    return keep


def log2_binomial_lgamma(n: int, k: int) -> float:
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)) / math.log(2)
