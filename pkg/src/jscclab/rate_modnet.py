"""Rate-conditioned modulation and top-C channel masking."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .channel_modnet import ModNet, ModulationUnit

RATE_GRID = (0.0208, 0.0417, 0.0625, 0.0833, 0.125)


def rm_vector(rate, unit: ModulationUnit) -> torch.Tensor:
    return unit(torch.as_tensor(rate, dtype=unit.fc1.weight.dtype))


def source_dims_per_latent_position(stages: int) -> int:
    """Real source values (3 colour channels of a 2^s x 2^s block) per latent
    position, times 2 for the real->complex pairing."""
    return 2 * 3 * 4 ** stages


def cbr_to_channels(rate: float, stages: int, max_channels: int | None = None) -> int:
    """Latent channels to keep so that k/m matches ``rate``."""
    c = math.floor(float(rate) * source_dims_per_latent_position(stages) + 0.5)
    hi = max_channels if max_channels is not None else c
    if c < 1 or c > hi:
        raise ValueError(f"rate {rate} gives {c} channels, outside [1, {hi}]")
    return c


def channels_to_cbr(channels: int, stages: int) -> float:
    return channels / source_dims_per_latent_position(stages)


def channel_relevance(rep: torch.Tensor) -> torch.Tensor:
    """Mean over all spatial positions, ``(B, ..., C) -> (B, C)``."""
    return rep.reshape(rep.shape[0], -1, rep.shape[-1]).mean(dim=1)


def code_mask(rep: torch.Tensor, C) -> torch.Tensor:
    """Binary ``(B, C_s)`` mask keeping the ``C`` most relevant channels.

    ``C`` may be an int or one count per sample.  Ties go to the lower
    channel index.
    """
    B, n = rep.shape[0], rep.shape[-1]
    counts = torch.as_tensor(C, dtype=torch.long).reshape(-1)
    if counts.numel() == 1:
        counts = counts.expand(B)
    elif counts.numel() != B:
        raise ValueError(f"got {counts.numel()} kept counts for a batch of {B}")
    if (counts < 1).any() or (counts > n).any():
        raise ValueError(f"kept channel count must lie in [1, {n}], got {counts.tolist()}")
    rel = channel_relevance(rep.detach())
    # stable descending sort keeps lower indices first among equals
    order = torch.sort(rel, dim=1, descending=True, stable=True).indices
    ranks = torch.empty_like(order)
    ranks.scatter_(1, order, torch.arange(n, device=rep.device).expand(B, n))
    return (ranks < counts.to(rep.device).unsqueeze(1)).to(rep.dtype)


class RateModNet(ModNet):
    """ModNet driven by the target CBR; its output doubles as the rate
    representation that ranks channels."""

    def __init__(self, width: int, stages: int, hidden: int = 64):
        super().__init__(width, hidden)
        self.n_stages = stages

    def forward(self, latent, rate, gains=None):
        rep = super().forward(latent, rate, gains)
        rates = torch.as_tensor(rate, dtype=torch.float64).reshape(-1)
        counts = [cbr_to_channels(r, self.n_stages, self.width) for r in rates.tolist()]
        mask = code_mask(rep, counts if len(counts) > 1 else counts[0])
        shape = (mask.shape[0],) + (1,) * (latent.dim() - 2) + (mask.shape[1],)
        return rep * mask.view(shape), mask


def apply_rate(latent, rate, params: RateModNet):
    return params(latent, rate)


@dataclass(frozen=True)
class SideInfoCost:
    raw_bits: int
    combinatorial_bits: int


def _ceil_log2(n: int) -> int:
    return (n - 1).bit_length()


def mask_side_info_cost(mask) -> SideInfoCost:
    """Bits needed to tell the receiver which channels were kept: one bit per
    channel, or the index of the subset among all C-subsets."""
    keep = torch.as_tensor(mask).reshape(-1)
    n = keep.numel()
    c = int(keep.sum().item())
    return SideInfoCost(raw_bits=n, combinatorial_bits=_ceil_log2(math.comb(n, c)))


def bits_to_symbols(bits: float, snr_db: float) -> float:
    """Channel uses to carry ``bits`` at ideal capacity log2(1 + SNR)."""
    return bits / math.log2(1.0 + 10.0 ** (snr_db / 10.0))
