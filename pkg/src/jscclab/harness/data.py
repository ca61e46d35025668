"""Image-directory ingestion: random training crops and evaluation crops."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
import torch
from PIL import Image

log = logging.getLogger(__name__)

EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".ppm", ".webp"}


def image_files(path) -> list[Path]:
    path = Path(path)
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in EXTENSIONS) if path.is_dir() else []
    if not files:
        raise FileNotFoundError(f"no images found in {path}")
    return files


def read_image(path) -> Optional[torch.Tensor]:
    """``(3, H, W)`` float32 in [0, 1], or None (with a warning) if unreadable."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except (OSError, ValueError) as exc:
        log.warning("skipping unreadable image %s: %s", path, exc)
        return None
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


def load_images(path) -> list[tuple[str, torch.Tensor]]:
    out = []
    for f in image_files(path):
        img = read_image(f)
        if img is not None:
            out.append((f.stem, img))
    if not out:
        raise FileNotFoundError(f"no readable images in {path}")
    return out


def center_crop_to_multiple(img: torch.Tensor, multiple: int = 128) -> torch.Tensor:
    H, W = img.shape[-2:]
    h, w = H // multiple * multiple, W // multiple * multiple
    if h == 0 or w == 0:
        raise ValueError(f"image {H}x{W} is smaller than {multiple}")
    top, left = (H - h) // 2, (W - w) // 2
    return img[..., top:top + h, left:left + w]


def random_crop(img: torch.Tensor, size: int, generator: torch.Generator) -> torch.Tensor:
    H, W = img.shape[-2:]
    if H < size or W < size:
        raise ValueError(f"image {H}x{W} is smaller than the {size}x{size} crop")
    top = int(torch.randint(H - size + 1, (1,), generator=generator))
    left = int(torch.randint(W - size + 1, (1,), generator=generator))
    return img[..., top:top + size, left:left + size]


class TrainCrops:
    """Random square crops from a fixed pool of images."""

    def __init__(self, images, crop: int = 256):
        self.images = [img for _, img in images] if images and isinstance(images[0], tuple) else list(images)
        self.images = [img for img in self.images if min(img.shape[-2:]) >= crop]
        if not self.images:
            raise ValueError(f"no image is at least {crop} pixels on each side")
        self.crop = crop

    def __len__(self):
        return len(self.images)

    def sample(self, batch: int, generator: torch.Generator) -> torch.Tensor:
        idx = torch.randint(len(self.images), (batch,), generator=generator).tolist()
        return torch.stack([random_crop(self.images[i], self.crop, generator) for i in idx])


def ingest_dataset(path, split: str = "train", seed: int = 0, crop: int = 256, multiple: int = 128,
                   ) -> Iterator[tuple[str, torch.Tensor]]:
    """Yield ``(image_id, (3, H, W))`` pairs.

    ``train`` cycles forever over the images in a seeded random order emitting
    ``crop x crop`` patches; ``eval`` yields each image once, centre-cropped to
    the largest multiple of ``multiple`` on each side.
    """
    images = load_images(path)
    if split == "eval":
        for name, img in images:
            yield name, center_crop_to_multiple(img, multiple)
        return
    if split != "train":
        raise ValueError(f"unknown split {split!r}")
    pool = TrainCrops(images, crop)
    names = [n for n, img in images if min(img.shape[-2:]) >= crop]
    gen = torch.Generator().manual_seed(seed)
    while True:
        for i in torch.randperm(len(pool), generator=gen).tolist():
            yield names[i], random_crop(pool.images[i], crop, gen)


def eval_batch(path, multiple: int = 128) -> tuple[list[str], list[torch.Tensor]]:
    pairs = list(ingest_dataset(path, "eval", multiple=multiple))
    return [n for n, _ in pairs], [img for _, img in pairs]


# ---------------------------------------------------------------------------
# bundled sample photographs (scikit-image) for demos and desk-scale tests

SAMPLE_NAMES = ("astronaut", "coffee", "chelsea", "rocket", "immunohistochemistry", "hubble_deep_field", "retina")


def sample_photos() -> list[tuple[str, np.ndarray]]:
    from skimage import data

    return [(name, getattr(data, name)()[..., :3]) for name in SAMPLE_NAMES]


def write_sample_dataset(out_dir, size: Optional[int] = None, tiles_per_image: int = 1, seed: int = 0,
                         names=SAMPLE_NAMES) -> Path:
    """Write the sample photos as PNGs.  With ``size``, write
    ``tiles_per_image`` random tiles per photo, each downscaled to
    ``size x size`` from a random square region."""
    from skimage import data

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for name in names:
        arr = getattr(data, name)()[..., :3]
        if size is None:
            Image.fromarray(arr).save(out / f"{name}.png")
            continue
        H, W = arr.shape[:2]
        for t in range(tiles_per_image):
            side = int(rng.integers(min(H, W) // 4, min(H, W) // 2 + 1))
            top, left = int(rng.integers(0, H - side + 1)), int(rng.integers(0, W - side + 1))
            tile = Image.fromarray(arr[top:top + side, left:left + side]).resize((size, size), Image.BICUBIC)
            tile.save(out / f"{name}_{t:03d}.png")
    return out
