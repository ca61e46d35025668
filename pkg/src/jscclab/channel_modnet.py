"""SNR-conditioned channel-wise modulation of latent token grids."""

from __future__ import annotations

import torch
import torch.nn as nn

N_TRUNK = 8


class ModulationUnit(nn.Module):
    """Scalar condition -> N gains in (0, 1): two ReLU layers and a sigmoid."""

    def __init__(self, out_dim: int, hidden: int = 64):
        super().__init__()
        self.fc1 = nn.Linear(1, hidden)
        self.fc2 = nn.Linear(hidden, hidden)
        self.fc3 = nn.Linear(hidden, out_dim)
        # start every gain near 0.5
        nn.init.trunc_normal_(self.fc3.weight, std=0.02)
        nn.init.zeros_(self.fc3.bias)

    def forward(self, cond: torch.Tensor) -> torch.Tensor:
        cond = cond.reshape(-1, 1).to(self.fc1.weight.dtype)
        h = torch.relu(self.fc1(cond))
        h = torch.relu(self.fc2(h))
        return torch.sigmoid(self.fc3(h))


def sm_vector(snr, unit: ModulationUnit) -> torch.Tensor:
    """Gains for one SM unit, shape ``(B, N)``."""
    return unit(torch.as_tensor(snr, dtype=unit.fc1.weight.dtype))


class ModNet(nn.Module):
    """Eight square affine layers with a modulation unit between each
    consecutive pair.  The gains depend only on the scalar condition and are
    broadcast over every spatial position."""

    def __init__(self, width: int, hidden: int = 64, inner: int | None = None):
        super().__init__()
        inner = inner or width
        self.width = width
        dims = [width] + [inner] * (N_TRUNK - 1) + [width]
        self.trunk = nn.ModuleList(nn.Linear(a, b) for a, b in zip(dims[:-1], dims[1:]))
        self.units = nn.ModuleList(ModulationUnit(inner, hidden) for _ in range(N_TRUNK - 1))
        for i, layer in enumerate(self.trunk):
            # gain 2 offsets the ~0.5 modulation in front of every later layer
            nn.init.orthogonal_(layer.weight, gain=1.0 if i == 0 else 2.0)
            nn.init.zeros_(layer.bias)

    def gains(self, cond) -> list[torch.Tensor]:
        cond = torch.as_tensor(cond, dtype=self.trunk[0].weight.dtype, device=self.trunk[0].weight.device)
        return [unit(cond) for unit in self.units]

    def forward(self, latent: torch.Tensor, cond, gains=None) -> torch.Tensor:
        if latent.shape[-1] != self.width:
            raise ValueError(f"latent has {latent.shape[-1]} channels, modnet expects {self.width}")
        B = latent.shape[0]
        gains = self.gains(cond) if gains is None else gains
        x = self.trunk[0](latent)
        for g, layer in zip(gains, self.trunk[1:]):
            g = g.expand(B, -1) if g.shape[0] == 1 else g
            x = layer(x * g.view(B, *([1] * (latent.dim() - 2)), -1))
        return x


class ChannelModNet(ModNet):
    """ModNet driven by the channel SNR in dB."""


def modulate(latent: torch.Tensor, snr, params: ChannelModNet) -> torch.Tensor:
    return params(latent, snr)
