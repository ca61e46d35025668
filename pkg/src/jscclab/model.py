"""End-to-end transceiver: encoder, ModNets, channel and decoder."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import torch
import torch.nn as nn

from . import channel as ch
from .channel_modnet import ChannelModNet
from .codec import CodecConfig, ConvBackbone, ConvDecoder, SwinDecoder, SwinEncoder, _init_linear
from .rate_modnet import RateModNet, cbr_to_channels, channels_to_cbr


@dataclass
class ForwardInfo:
    mask: torch.Tensor
    symbols: list = field(default_factory=list)
    k: list = field(default_factory=list)
    m: int = 0


def _per_sample(value, B, dtype, device) -> torch.Tensor:
    t = torch.as_tensor(value, dtype=dtype, device=device).reshape(-1)
    if t.numel() == 1:
        t = t.expand(B)
    if t.numel() != B:
        raise ValueError(f"expected a scalar or {B} values, got {t.numel()}")
    return t


class JSCCModel(nn.Module):
    """Image -> complex channel symbols -> image.

    Variants: ``baseline`` and ``sa`` send a fixed number of latent channels
    through an extra linear layer; ``ra`` and ``sa_ra`` choose channels with the
    rate ModNet.  ``sa`` and ``sa_ra`` add SNR ModNets on both ends.
    """

    def __init__(self, config: CodecConfig):
        super().__init__()
        self.config = cfg = config
        s, width = cfg.stages, cfg.latent_width
        if cfg.backbone == "swin":
            self.encoder = SwinEncoder(cfg)
            self.decoder = SwinDecoder(cfg)
        else:
            self.encoder = ConvBackbone(width, s, cfg.conv_layers)
            self.decoder = ConvDecoder(width, s, cfg.conv_layers)
        self.apply(lambda m: _init_linear(m) if isinstance(m, nn.Linear) else None)

        self.enc_snr = ChannelModNet(width, cfg.modnet_hidden) if cfg.snr_adaptive else None
        self.dec_snr = ChannelModNet(width, cfg.modnet_hidden) if cfg.snr_adaptive else None
        if cfg.rate_adaptive:
            self.rate_net = RateModNet(width, s, cfg.modnet_hidden)
            self.fixed_channels = None
            self.enc_head = self.dec_head = None
        else:
            self.rate_net = None
            self.fixed_channels = cbr_to_channels(cfg.cbr, s)
            self.enc_head = nn.Linear(width, self.fixed_channels)
            self.dec_head = nn.Linear(self.fixed_channels, width)
            _init_linear(self.enc_head)
            _init_linear(self.dec_head)

    # -- parameter groups ------------------------------------------------

    def modnet_parameters(self):
        for mod in (self.enc_snr, self.dec_snr, self.rate_net):
            if mod is not None:
                yield from mod.parameters()

    def backbone_parameters(self):
        ids = {id(p) for p in self.modnet_parameters()}
        return (p for p in self.parameters() if id(p) not in ids)

    # -- sizes ----------------------------------------------------------

    @property
    def mask_width(self) -> int:
        return self.fixed_channels if self.fixed_channels is not None else self.config.latent_width

    def latent_size(self, H: int, W: int):
        f = 2 ** self.config.stages
        return H // f, W // f

    def channels_for(self, rate) -> int:
        if self.fixed_channels is not None:
            if rate is not None and cbr_to_channels(rate, self.config.stages) != self.fixed_channels:
                raise ValueError(f"fixed-rate model sends {self.fixed_channels} channels; rate {rate} does not match")
            return self.fixed_channels
        return cbr_to_channels(rate, self.config.stages, self.config.latent_width)

    def symbol_count(self, H: int, W: int, rate=None) -> int:
        h, w = self.latent_size(H, W)
        return h * w * self.channels_for(rate) // 2

    # -- encoder side ----------------------------------------------------

    def encode_features(self, img: torch.Tensor) -> torch.Tensor:
        """Backbone latent before any ModNet, ``(B, h, w, C_s)``."""
        B, _, H, W = img.shape
        self.config.check_image_size(H, W)
        return self.encoder(img)

    def encode_latent(self, img, snr, rate=None):
        """Masked latent ``(B, h, w, C_mask)`` and mask ``(B, C_mask)``."""
        y = self.encode_features(img)
        B = y.shape[0]
        if self.enc_snr is not None:
            y = self.enc_snr(y, _per_sample(snr, B, y.dtype, y.device))
        if self.rate_net is not None:
            if rate is None:
                raise ValueError("rate-adaptive model needs a rate")
            rates = _per_sample(rate, B, torch.float64, "cpu")
            for r in rates.tolist():
                self.channels_for(r)
            y, mask = self.rate_net(y, rates if B > 1 else rates[0])
        else:
            self.channels_for(None if rate is None else float(torch.as_tensor(rate).reshape(-1)[0]))
            y = self.enc_head(y)
            mask = torch.ones(B, self.fixed_channels, dtype=y.dtype, device=y.device)
        return y, mask

    @staticmethod
    def compact(latent: torch.Tensor, keep: torch.Tensor) -> torch.Tensor:
        """Kept channels of one sample's ``(h, w, C)`` latent, row-major."""
        return latent[..., keep.bool()].reshape(-1)

    def encode(self, img, snr, rate=None):
        """Returns a list of unit-power complex symbol vectors (one per image)
        and the ``(B, C_mask)`` mask."""
        y, mask = self.encode_latent(img, snr, rate)
        symbols = []
        for b in range(y.shape[0]):
            raw = self.compact(y[b], mask[b])
            if raw.numel() % 2:
                raise ValueError("odd number of real values cannot be paired into symbols")
            symbols.append(ch.power_normalize(raw))
        return symbols, mask

    # -- decoder side ----------------------------------------------------

    def reconstruct_features(self, symbols: Sequence[torch.Tensor], mask: torch.Tensor, hw) -> torch.Tensor:
        """Scatter received symbols back into a zero-filled ``(B, h, w, C_mask)`` latent."""
        h, w = hw
        B, n = mask.shape
        out = []
        for b in range(B):
            keep = mask[b].bool()
            reals = ch.to_reals(symbols[b])
            c = int(keep.sum())
            if reals.numel() != h * w * c:
                raise ValueError(f"mask keeps {c} channels ({h * w * c} reals) but {reals.numel()} reals were received")
            grid = reals.new_zeros(h, w, n)
            grid[..., keep] = reals.view(h, w, c)
            out.append(grid)
        return torch.stack(out)

    def decode_latent(self, latent, snr, clamp=True):
        B = latent.shape[0]
        if self.dec_head is not None:
            latent = self.dec_head(latent)
        if self.dec_snr is not None:
            latent = self.dec_snr(latent, _per_sample(snr, B, latent.dtype, latent.device))
        x = self.decoder(latent)
        return x.clamp(0.0, 1.0) if clamp else x

    def decode(self, received, mask, snr, image_size, clamp=True):
        hw = self.latent_size(*image_size)
        return self.decode_latent(self.reconstruct_features(received, mask, hw), snr, clamp)

    # -- full chain ------------------------------------------------------

    def forward(self, img, snr, rate=None, channel: str = "awgn", generator=None,
                equalize: bool = True, clamp: bool = True):
        B, _, H, W = img.shape
        symbols, mask = self.encode(img, snr, rate)
        snrs = _per_sample(snr, B, torch.float64, "cpu").tolist()
        received = [ch.transmit(y, s, channel, generator, equalize) for y, s in zip(symbols, snrs)]
        x_hat = self.decode(received, mask, snr, (H, W), clamp)
        info = ForwardInfo(mask=mask, symbols=symbols, k=[y.numel() for y in symbols], m=3 * H * W)
        return x_hat, info


def effective_cbr(model: JSCCModel, rate=None) -> float:
    return channels_to_cbr(model.channels_for(rate), model.config.stages)
