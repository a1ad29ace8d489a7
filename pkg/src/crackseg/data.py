"""Synthetic crack images, PNG I/O, dataset folders and deterministic splits."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .errors import ConfigError, DataError


@dataclass
class Sample:
    image: np.ndarray  # [3, H, W] in [0, 1]
    mask: np.ndarray  # [1, H, W] in {0, 1}
    id: str

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[0] != 3:
            raise ConfigError(f"sample image must be [3, H, W], got {self.image.shape}")
        if self.mask.shape != (1, *self.image.shape[1:]):
            raise ConfigError(f"mask shape {self.mask.shape} does not match image {self.image.shape}")
        if not np.isin(self.mask, (0, 1)).all():
            raise ConfigError("mask must be strictly binary")


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.7
    val: float = 0.1
    test: float = 0.2
    seed: int = 42

    def __post_init__(self):
        if min(self.train, self.val, self.test) < 0:
            raise ConfigError("split fractions must be nonnegative")
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ConfigError("split fractions must sum to 1")


# -- synthetic generator --------------------------------------------------------

def _segment_distance(yy, xx, p0, p1):
    d = p1 - p0
    length2 = float(d @ d)
    if length2 == 0.0:
        return np.hypot(yy - p0[0], xx - p0[1])
    t = ((yy - p0[0]) * d[0] + (xx - p0[1]) * d[1]) / length2
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(yy - (p0[0] + t * d[0]), xx - (p0[1] + t * d[1]))


def synth_crack(seed: int, height: int = 64, width: int = 64, *, stroke_count: int = 2,
                width_range: tuple[float, float] = (2.0, 4.0), contrast: float = 0.6,
                noise_level: float = 0.03, sample_id: str | None = None) -> Sample:
    """Textured background with dark random-walk strokes; the mask is the exact stroke support."""
    if height < 1 or width < 1:
        raise ConfigError("image must be at least 1x1")
    if stroke_count < 0:
        raise ConfigError("stroke_count must be nonnegative")
    lo, hi = width_range
    if lo <= 0 or hi < lo:
        raise ConfigError(f"invalid width range {width_range}")
    rng = np.random.default_rng(seed)

    base = rng.uniform(0.45, 0.75, size=3)
    texture = gaussian_filter(rng.normal(size=(height, width)), sigma=3.0, mode="wrap")
    texture /= max(np.abs(texture).max(), 1e-12)
    background = base[:, None, None] + 0.12 * texture[None]

    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    yy += 0.5
    xx += 0.5
    support = np.zeros((height, width), dtype=bool)
    depth = np.zeros((height, width))
    for _ in range(stroke_count):
        pos = rng.uniform([0, 0], [height, width])
        angle = rng.uniform(0, 2 * np.pi)
        step = max(height, width) / 12.0
        n_seg = int(rng.integers(8, 16))
        half_width = 0.5 * rng.uniform(lo, hi)
        for _ in range(n_seg):
            angle += rng.normal(scale=0.35)
            nxt = pos + step * np.array([np.sin(angle), np.cos(angle)])
            half_width = float(np.clip(half_width + rng.normal(scale=0.15), 0.5 * lo, 0.5 * hi))
            dist = _segment_distance(yy, xx, pos, nxt)
            hit = dist <= half_width
            support |= hit
            depth = np.maximum(depth, np.where(hit, 1.0 - 0.3 * dist / half_width, 0.0))
            pos = nxt
    image = background * (1.0 - contrast * depth[None])
    image = image + noise_level * rng.normal(size=image.shape)
    image = np.clip(image, 0.0, 1.0)
    mask = support.astype(np.float64)[None]
    return Sample(image=image, mask=mask, id=sample_id or f"synth_{seed:05d}")


def synth_dataset(count: int, height: int = 64, width: int = 64, seed: int = 0, **params) -> list[Sample]:
    return [synth_crack(seed + i, height, width, **params) for i in range(count)]


# -- PNG encoding ---------------------------------------------------------------

def to_uint8(values: np.ndarray) -> np.ndarray:
    """Scale [0, 1] floats to 0..255 with round-half-up."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def write_png(path: str | Path, array: np.ndarray) -> None:
    """Write an 8-bit ``[H, W]`` (gray) or ``[H, W, 3]`` (RGB) array."""
    arr = np.asarray(array)
    if arr.dtype != np.uint8:
        raise DataError(f"PNG payload must be uint8, got {arr.dtype}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path, format="PNG", optimize=False)


def read_png(path: str | Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB" if im.mode in ("RGBA", "P", "CMYK") else "L")
            return np.asarray(im, dtype=np.uint8).copy()
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from None


def read_image(path: str | Path) -> np.ndarray:
    """RGB PNG -> ``[3, H, W]`` floats in [0, 1]."""
    arr = read_png(path)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    return arr.transpose(2, 0, 1).astype(np.float64) / 255.0


def binarize_mask(arr: np.ndarray, level: int = 128) -> np.ndarray:
    """Gray values >= ``level`` become 1. Already-binary 0/1 masks are returned unchanged."""
    a = np.asarray(arr)
    if a.ndim == 3:
        a = a[..., 0] if a.shape[-1] in (3, 4) else a[0]
    if a.max(initial=0) <= 1:
        return a.astype(np.uint8)
    return (a >= level).astype(np.uint8)


def read_mask(path: str | Path) -> np.ndarray:
    """Gray PNG -> ``[H, W]`` uint8 in {0, 1}."""
    return binarize_mask(read_png(path))


def save_sample(root: str | Path, sample: Sample) -> None:
    root = Path(root)
    write_png(root / "image" / f"{sample.id}.png", to_uint8(sample.image.transpose(1, 2, 0)))
    write_png(root / "mask" / f"{sample.id}.png", (sample.mask[0] * 255).astype(np.uint8))


def load_dataset(root: str | Path) -> list[Sample]:
    """Load ``root/image/<id>.png`` paired with ``root/mask/<id>.png``."""
    root = Path(root)
    img_dir, mask_dir = root / "image", root / "mask"
    if not img_dir.is_dir() or not mask_dir.is_dir():
        raise DataError(f"{root} must contain image/ and mask/ subdirectories")
    images = {p.stem: p for p in img_dir.glob("*.png")}
    masks = {p.stem: p for p in mask_dir.glob("*.png")}
    orphans = sorted(set(images) ^ set(masks))
    if orphans:
        raise DataError(f"unpaired ids: {', '.join(orphans)}")
    samples = []
    for sid in sorted(images):
        image = read_image(images[sid])
        mask = read_mask(masks[sid])[None].astype(np.float64)
        if mask.shape[1:] != image.shape[1:]:
            raise DataError(f"{sid}: mask size {mask.shape[1:]} != image size {image.shape[1:]}")
        samples.append(Sample(image=image, mask=mask, id=sid))
    return samples


def split(samples: Sequence, spec: SplitSpec = SplitSpec()) -> tuple[list, list, list]:
    """Seeded shuffle then cut; val/test sizes are floored and the remainder goes to train."""
    n = len(samples)
    n_val = int(np.floor(n * spec.val + 1e-9))
    n_test = int(np.floor(n * spec.test + 1e-9))
    n_train = n - n_val - n_test
    perm = np.random.default_rng(spec.seed).permutation(n)
    train = [samples[i] for i in perm[:n_train]]
    val = [samples[i] for i in perm[n_train:n_train + n_val]]
    test = [samples[i] for i in perm[n_train + n_val:]]
    return train, val, test


def split_manifest(train, val, test) -> str:
    out = {}
    for name, part in (("train", train), ("val", val), ("test", test)):
        for s in part:
            out[s.id] = name
    return json.dumps(dict(sorted(out.items())), indent=2)
