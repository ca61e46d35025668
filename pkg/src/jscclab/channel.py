"""Power normalisation, AWGN / Rayleigh channels and MMSE equalisation.

Symbols are 1-D complex tensors.  Signal power per complex symbol is 1 after
:func:`power_normalize`, so the noise variance is ``10 ** (-snr_db / 10)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import torch

KINDS = ("awgn", "rayleigh-fast", "rayleigh-block")

Seed = Union[int, torch.Generator, None]


@dataclass
class ChannelRealization:
    h: torch.Tensor
    sigma2: float
    kind: str
    seed: Optional[int] = None


def _generator(seed: Seed) -> Optional[torch.Generator]:
    if seed is None or isinstance(seed, torch.Generator):
        return seed
    return torch.Generator().manual_seed(int(seed))


def _complex_dtype(t: torch.Tensor) -> torch.dtype:
    if t.is_complex():
        return t.dtype
    return torch.complex128 if t.dtype == torch.float64 else torch.complex64


def _cn(n: int, like: torch.Tensor, gen) -> torch.Tensor:
    """n samples of CN(0, 1), drawn on the CPU so seeds reproduce anywhere."""
    return torch.randn(n, dtype=_complex_dtype(like), generator=gen).to(like.device)


def power_normalize(raw: torch.Tensor, k: Optional[int] = None) -> torch.Tensor:
    """Pair ``2k`` reals into ``k`` complex symbols with mean power exactly 1."""
    raw = raw.reshape(-1)
    if k is None:
        k = raw.numel() // 2
    if raw.numel() != 2 * k:
        raise ValueError(f"expected {2 * k} real values, got {raw.numel()}")
    norm = torch.linalg.vector_norm(raw)
    if norm.item() == 0:
        raise ValueError("cannot normalise an all-zero vector")
    scaled = raw * (k ** 0.5 / norm)
    return torch.view_as_complex(scaled.reshape(k, 2))


def to_reals(symbols: torch.Tensor) -> torch.Tensor:
    return torch.view_as_real(symbols).reshape(-1)


def snr_to_sigma2(snr_db) -> float:
    return 10.0 ** (-float(snr_db) / 10.0)


def transmit_awgn(y: torch.Tensor, snr_db, seed: Seed = None) -> torch.Tensor:
    if snr_db == float("inf"):
        return y.clone()
    noise = _cn(y.numel(), y, _generator(seed)).reshape(y.shape)
    return y + snr_to_sigma2(snr_db) ** 0.5 * noise


def transmit_fading(y: torch.Tensor, snr_db, kind: str = "rayleigh-fast", seed: Seed = None,
                    h: Optional[torch.Tensor] = None):
    """``h * y + n`` with unit-power Rayleigh ``h`` (per symbol or one per
    frame).  Pass ``h`` to force a realisation."""
    if kind not in KINDS:
        raise ValueError(f"unknown channel kind {kind!r}")
    gen = _generator(seed)
    k = y.numel()
    if h is None:
        if kind == "awgn":
            h = torch.ones(k, dtype=_complex_dtype(y), device=y.device)
        elif kind == "rayleigh-fast":
            h = _cn(k, y, gen)
        else:
            h = _cn(1, y, gen).expand(k).clone()
    h = h.reshape(y.shape).to(y.dtype)
    sigma2 = 0.0 if snr_db == float("inf") else snr_to_sigma2(snr_db)
    noise = _cn(k, y, gen).reshape(y.shape)
    received = h * y + sigma2 ** 0.5 * noise
    return received, ChannelRealization(h, sigma2, kind, seed if isinstance(seed, int) else None)


def equalize(received: torch.Tensor, csi: ChannelRealization) -> torch.Tensor:
    """Per-symbol MMSE scaling ``conj(h) y / (|h|^2 + sigma2)``."""
    if csi.h.shape != received.shape:
        raise ValueError(f"CSI length {tuple(csi.h.shape)} does not match received {tuple(received.shape)}")
    h = csi.h
    return h.conj() * received / (h.abs() ** 2 + csi.sigma2)


def transmit(y: torch.Tensor, snr_db, kind: str = "awgn", seed: Seed = None, equalize_csi: bool = True):
    """One pass through the named channel, equalised when faded."""
    if kind == "awgn":
        return transmit_awgn(y, snr_db, seed)
    received, csi = transmit_fading(y, snr_db, kind, seed)
    return equalize(received, csi) if equalize_csi else received
