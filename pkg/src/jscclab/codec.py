"""Hierarchical windowed-attention image codec.

The encoder turns an image into a latent token grid through patch embedding,
shifted-window attention blocks and patch merging; the decoder mirrors it with
patch division.  A small convolutional backbone is kept alongside for
width-vs-quality comparisons.

Token grids are laid out channels-last, ``(B, h, w, C)``; images are
``(B, 3, H, W)`` tensors with values in ``[0, 1]``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence

import torch
import torch.nn as nn

VARIANTS = ("baseline", "sa", "ra", "sa_ra")
BACKBONES = ("swin", "conv")


@dataclass
class CodecConfig:
    depths: tuple = (2, 2, 6, 2)
    widths: tuple = (128, 192, 256, 320)
    window: int = 8
    heads: Optional[tuple] = None
    mlp_ratio: float = 4.0
    backbone: str = "swin"
    conv_width: int = 64
    conv_layers: Optional[tuple] = None
    variant: str = "sa_ra"
    # fixed-rate variants (baseline / sa) compress C_s down to this CBR
    cbr: float = 0.125
    modnet_hidden: int = 64

    def __post_init__(self):
        self.depths = tuple(int(d) for d in self.depths)
        self.widths = tuple(int(c) for c in self.widths)
        if self.heads is None:
            self.heads = tuple(max(1, c // 32) for c in self.widths)
        self.heads = tuple(int(h) for h in self.heads)
        if self.conv_layers is None:
            self.conv_layers = (2,) * len(self.depths)
        self.conv_layers = tuple(int(n) for n in self.conv_layers)
        self.validate()

    def validate(self):
        s = len(self.depths)
        if s == 0 or len(self.widths) != s or len(self.heads) != s or len(self.conv_layers) != s:
            raise ValueError("depths, widths, heads and conv_layers must share one length")
        if min(self.depths) < 1 or min(self.widths) < 1 or min(self.conv_layers) < 1:
            raise ValueError("depths and widths must be positive")
        if self.window < 1:
            raise ValueError("window must be positive")
        for c, h in zip(self.widths, self.heads):
            if c % h:
                raise ValueError(f"width {c} is not divisible by {h} heads")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.backbone not in BACKBONES:
            raise ValueError(f"unknown backbone {self.backbone!r}")
        if self.conv_width < 1:
            raise ValueError("conv_width must be >= 1")

    @property
    def stages(self) -> int:
        return len(self.depths)

    @property
    def latent_width(self) -> int:
        return self.widths[-1] if self.backbone == "swin" else self.conv_width

    @property
    def snr_adaptive(self) -> bool:
        return self.variant in ("sa", "sa_ra")

    @property
    def rate_adaptive(self) -> bool:
        return self.variant in ("ra", "sa_ra")

    def check_image_size(self, height: int, width: int):
        """Raise if an ``height x width`` image cannot pass through every stage."""
        step = 2 ** self.stages
        if height % step or width % step:
            raise ValueError(f"image {height}x{width} is not a multiple of {step}")
        if self.backbone == "swin":
            for i in range(self.stages):
                h, w = height // 2 ** (i + 1), width // 2 ** (i + 1)
                if h % self.window or w % self.window:
                    raise ValueError(f"window {self.window} does not divide stage-{i + 1} grid {h}x{w}")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "CodecConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown codec config keys: {sorted(unknown)}")
        return cls(**d)


def preset(name: str, **overrides) -> CodecConfig:
    """Named configurations.

    ``low`` is the 2-stage setup for 32x32 sources; ``S``/``B``/``L`` are the
    4-stage high-resolution sizes differing only in depth.
    """
    table = {
        "low": dict(depths=(2, 4), widths=(128, 256), window=2, variant="sa", cbr=1 / 3),
        "S": dict(depths=(2, 2, 2, 2), widths=(128, 192, 256, 320), window=8),
        "B": dict(depths=(2, 2, 6, 2), widths=(128, 192, 256, 320), window=8),
        "L": dict(depths=(2, 2, 18, 2), widths=(128, 192, 256, 320), window=8),
    }
    if name not in table:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(table)}")
    return CodecConfig(**{**table[name], **overrides})


def _init_linear(m: nn.Linear):
    nn.init.trunc_normal_(m.weight, std=0.02)
    if m.bias is not None:
        nn.init.zeros_(m.bias)


# ---------------------------------------------------------------------------
# window helpers


def window_partition(x: torch.Tensor, window: int) -> torch.Tensor:
    """(B, h, w, C) -> (B * nW, window * window, C)"""
    B, h, w, C = x.shape
    x = x.view(B, h // window, window, w // window, window, C)
    return x.permute(0, 1, 3, 2, 4, 5).reshape(-1, window * window, C)


def window_reverse(windows: torch.Tensor, window: int, h: int, w: int) -> torch.Tensor:
    """Inverse of :func:`window_partition`."""
    C = windows.shape[-1]
    B = windows.shape[0] // ((h // window) * (w // window))
    x = windows.view(B, h // window, w // window, window, window, C)
    return x.permute(0, 1, 3, 2, 4, 5).reshape(B, h, w, C)


def cyclic_shift(x: torch.Tensor, shift: int) -> torch.Tensor:
    return torch.roll(x, shifts=(-shift, -shift), dims=(1, 2))


def cyclic_unshift(x: torch.Tensor, shift: int) -> torch.Tensor:
    return torch.roll(x, shifts=(shift, shift), dims=(1, 2))


def shifted_window_mask(h: int, w: int, window: int, shift: int) -> torch.Tensor:
    """Additive mask (nW, N, N) blocking attention between tokens that the
    cyclic shift brought together from different image regions."""
    region = torch.zeros(h, w)
    cnt = 0
    for hs in (slice(0, -window), slice(-window, -shift), slice(-shift, None)):
        for ws in (slice(0, -window), slice(-window, -shift), slice(-shift, None)):
            region[hs, ws] = cnt
            cnt += 1
    windows = window_partition(region.view(1, h, w, 1), window).squeeze(-1)
    diff = windows.unsqueeze(1) - windows.unsqueeze(2)
    return torch.zeros_like(diff).masked_fill(diff != 0, -100.0)


# ---------------------------------------------------------------------------
# attention blocks


class WindowAttention(nn.Module):
    """Multi-head self-attention inside each window, with a learned relative
    position bias."""

    def __init__(self, dim: int, window: int, heads: int):
        super().__init__()
        self.dim, self.window, self.heads = dim, window, heads
        self.scale = (dim // heads) ** -0.5
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.rel_bias = nn.Parameter(torch.zeros((2 * window - 1) ** 2, heads))
        nn.init.trunc_normal_(self.rel_bias, std=0.02)

        coords = torch.stack(torch.meshgrid(torch.arange(window), torch.arange(window), indexing="ij")).flatten(1)
        rel = (coords[:, :, None] - coords[:, None, :]).permute(1, 2, 0) + (window - 1)
        self.register_buffer("rel_index", rel[..., 0] * (2 * window - 1) + rel[..., 1], persistent=False)

    def forward(self, x, mask=None, return_attention=False):
        Bw, N, C = x.shape
        qkv = self.qkv(x).reshape(Bw, N, 3, self.heads, C // self.heads).permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        attn = (q * self.scale) @ k.transpose(-2, -1)
        bias = self.rel_bias[self.rel_index.view(-1)].view(N, N, -1).permute(2, 0, 1)
        attn = attn + bias.unsqueeze(0)
        if mask is not None:
            nW = mask.shape[0]
            attn = attn.view(Bw // nW, nW, self.heads, N, N) + mask.unsqueeze(1).unsqueeze(0)
            attn = attn.view(-1, self.heads, N, N)
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(Bw, N, C)
        out = self.proj(out)
        return (out, attn) if return_attention else out


class SwinBlock(nn.Module):
    """Pre-norm windowed attention + MLP, both residual.  ``shift=0`` gives the
    regular block; ``shift=window // 2`` the shifted one."""

    def __init__(self, dim: int, window: int, heads: int, shift: int = 0, mlp_ratio: float = 4.0):
        super().__init__()
        self.window, self.shift = window, shift
        self.norm1 = nn.LayerNorm(dim)
        self.attn = WindowAttention(dim, window, heads)
        self.norm2 = nn.LayerNorm(dim)
        hidden = int(dim * mlp_ratio)
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.GELU(), nn.Linear(hidden, dim))
        self._masks = {}

    def _mask(self, h, w, like):
        key = (h, w, like.dtype, like.device)
        if key not in self._masks:
            self._masks[key] = shifted_window_mask(h, w, self.window, self.shift).to(like)
        return self._masks[key]

    def forward(self, x, return_attention=False):
        B, h, w, C = x.shape
        if h % self.window or w % self.window:
            raise ValueError(f"window {self.window} does not divide token grid {h}x{w}")
        shortcut = x
        x = self.norm1(x)
        mask = None
        if self.shift:
            x = cyclic_shift(x, self.shift)
            mask = self._mask(h, w, x)
        out = self.attn(window_partition(x, self.window), mask, return_attention=return_attention)
        if return_attention:
            out, attn = out
        x = window_reverse(out, self.window, h, w)
        if self.shift:
            x = cyclic_unshift(x, self.shift)
        x = shortcut + x
        x = x + self.mlp(self.norm2(x))
        return (x, attn) if return_attention else x


class SwinBlockPair(nn.Module):
    """A regular block followed by a shifted one."""

    def __init__(self, dim, window, heads, mlp_ratio=4.0):
        super().__init__()
        self.regular = SwinBlock(dim, window, heads, 0, mlp_ratio)
        self.shifted = SwinBlock(dim, window, heads, window // 2, mlp_ratio)

    def forward(self, x):
        return self.shifted(self.regular(x))


def swin_blocks(dim, depth, window, heads, mlp_ratio=4.0) -> nn.Sequential:
    return nn.Sequential(*[
        SwinBlock(dim, window, heads, 0 if i % 2 == 0 else window // 2, mlp_ratio)
        for i in range(depth)
    ])


def swin_block_pair(tokens: torch.Tensor, window: int, heads: int,
                    block: Optional[SwinBlockPair] = None) -> torch.Tensor:
    """Run a (freshly initialised unless given) regular+shifted block pair."""
    if block is None:
        block = SwinBlockPair(tokens.shape[-1], window, heads).to(tokens)
    return block(tokens)


# ---------------------------------------------------------------------------
# resampling


class PatchEmbed(nn.Module):
    """Non-overlapping 2x2 patches, linearly projected to ``dim``."""

    def __init__(self, dim: int, in_chans: int = 3):
        super().__init__()
        self.proj = nn.Linear(4 * in_chans, dim)

    def forward(self, img):
        B, C, H, W = img.shape
        if H % 2 or W % 2:
            raise ValueError(f"image {H}x{W} is not divisible into 2x2 patches")
        x = img.view(B, C, H // 2, 2, W // 2, 2).permute(0, 2, 4, 3, 5, 1)
        return self.proj(x.reshape(B, H // 2, W // 2, 4 * C))


class PatchMerge(nn.Module):
    """Concatenate each 2x2 neighbourhood (4C) and reduce to ``out_dim``."""

    def __init__(self, dim: int, out_dim: int):
        super().__init__()
        self.norm = nn.LayerNorm(4 * dim)
        self.reduction = nn.Linear(4 * dim, out_dim, bias=False)

    def forward(self, x):
        B, h, w, C = x.shape
        if h % 2 or w % 2:
            raise ValueError(f"cannot merge an odd token grid {h}x{w}")
        x = x.view(B, h // 2, 2, w // 2, 2, C).permute(0, 1, 3, 2, 4, 5).reshape(B, h // 2, w // 2, 4 * C)
        return self.reduction(self.norm(x))


class PatchDivide(nn.Module):
    """Expand each token to ``4 * out_dim`` and unfold it into a 2x2
    neighbourhood; shape inverse of :class:`PatchMerge`."""

    def __init__(self, dim: int, out_dim: int):
        super().__init__()
        self.norm = nn.LayerNorm(dim)
        self.expand = nn.Linear(dim, 4 * out_dim, bias=False)
        self.out_dim = out_dim

    def forward(self, x):
        B, h, w, _ = x.shape
        x = self.expand(self.norm(x)).view(B, h, w, 2, 2, self.out_dim)
        return x.permute(0, 1, 3, 2, 4, 5).reshape(B, 2 * h, 2 * w, self.out_dim)


def patch_merge(tokens, out_width, layer=None):
    if layer is None:
        layer = PatchMerge(tokens.shape[-1], out_width).to(tokens)
    return layer(tokens)


def patch_divide(tokens, out_width, layer=None):
    if layer is None:
        layer = PatchDivide(tokens.shape[-1], out_width).to(tokens)
    return layer(tokens)


def patch_embed(image, config: CodecConfig, layer=None):
    if layer is None:
        layer = PatchEmbed(config.widths[0]).to(image)
    return layer(image)


# ---------------------------------------------------------------------------
# encoder / decoder trunks


class SwinEncoder(nn.Module):
    def __init__(self, cfg: CodecConfig):
        super().__init__()
        self.embed = PatchEmbed(cfg.widths[0])
        self.merges = nn.ModuleList()
        self.stages = nn.ModuleList()
        for i, (d, c, nh) in enumerate(zip(cfg.depths, cfg.widths, cfg.heads)):
            self.merges.append(nn.Identity() if i == 0 else PatchMerge(cfg.widths[i - 1], c))
            self.stages.append(swin_blocks(c, d, cfg.window, nh, cfg.mlp_ratio))
        self.norm = nn.LayerNorm(cfg.widths[-1])

    def forward(self, img, return_stages=False):
        x = self.embed(img)
        grids = []
        for merge, stage in zip(self.merges, self.stages):
            x = stage(merge(x))
            grids.append(x)
        x = self.norm(x)
        return (x, grids) if return_stages else x


class SwinDecoder(nn.Module):
    def __init__(self, cfg: CodecConfig):
        super().__init__()
        s = cfg.stages
        self.stages = nn.ModuleList()
        self.divides = nn.ModuleList()
        for i in reversed(range(s)):
            c = cfg.widths[i]
            self.stages.append(swin_blocks(c, cfg.depths[i], cfg.window, cfg.heads[i], cfg.mlp_ratio))
            self.divides.append(PatchDivide(c, cfg.widths[i - 1]) if i > 0 else nn.Identity())
        self.norm = nn.LayerNorm(cfg.widths[0])
        # one token -> 2x2x3 pixel patch
        self.head = nn.Linear(cfg.widths[0], 12)

    def forward(self, x):
        for stage, divide in zip(self.stages, self.divides):
            x = divide(stage(x))
        x = self.head(self.norm(x))
        B, h, w, _ = x.shape
        return x.view(B, h, w, 2, 2, 3).permute(0, 5, 1, 3, 2, 4).reshape(B, 3, 2 * h, 2 * w)


class ConvBackbone(nn.Module):
    """``stages`` stages of ``layers[i]`` identical 5x5 convolutions of a single
    width; the first conv of each stage has stride 2."""

    def __init__(self, width: int, stages: int, layers: Optional[Sequence[int]] = None, in_chans: int = 3):
        super().__init__()
        if width < 1:
            raise ValueError("width must be >= 1")
        layers = layers or (2,) * stages
        mods = []
        c_in = in_chans
        for i in range(stages):
            for j in range(layers[i]):
                mods.append(nn.Conv2d(c_in, width, 5, stride=2 if j == 0 else 1, padding=2))
                mods.append(nn.PReLU(width))
                c_in = width
        self.body = nn.Sequential(*mods[:-1])  # no activation on the latent
        self.width = width

    @property
    def final(self) -> nn.Conv2d:
        return self.body[-1]

    def forward(self, img):
        return self.body(img).permute(0, 2, 3, 1)


class ConvDecoder(nn.Module):
    def __init__(self, width: int, stages: int, layers: Optional[Sequence[int]] = None):
        super().__init__()
        layers = layers or (2,) * stages
        mods = []
        for i in reversed(range(stages)):
            for j in range(layers[i]):
                last_of_stage = j == layers[i] - 1
                out = 3 if (i == 0 and last_of_stage) else width
                if last_of_stage:
                    mods.append(nn.ConvTranspose2d(width, out, 5, stride=2, padding=2, output_padding=1))
                else:
                    mods.append(nn.Conv2d(width, width, 5, padding=2))
                if out != 3:
                    mods.append(nn.PReLU(width))
        self.body = nn.Sequential(*mods)

    def forward(self, x):
        return self.body(x.permute(0, 3, 1, 2))


def conv_backbone(image, width, stages, layers=None, module=None):
    if module is None:
        module = ConvBackbone(width, stages, layers).to(image)
    return module(image)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
