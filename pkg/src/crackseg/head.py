"""Multi-scale segmentation head and the assembled network."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import ops
from .backbone import Backbone
from .config import NetworkConfig
from .errors import ConfigError, ShapeError
from .gbc import GBC, default_norm_groups, default_rank
from .nn import Conv2d, Module, PixelMLP
from .tensor import Tensor, as_tensor, concat, no_grad, sigmoid


class BilinearUpsampler(Module):
    """Integer-factor bilinear upsampling; stands in for learned dynamic sampling."""

    def forward(self, x: Tensor, out_hw: tuple[int, int]) -> Tensor:
        h, w = x.shape[2:]
        if out_hw == (h, w):
            return x
        if out_hw[0] % h or out_hw[1] % w:
            raise ConfigError(f"output size {out_hw} is not an integer multiple of feature size {(h, w)}")
        return ops.resize_bilinear(x, out_hw)


UPSAMPLERS = {"bilinear": BilinearUpsampler}


class MFSHead(Module):
    """Per-level MLP and upsampling, concatenation, GBC, 3x3 conv and a final MLP to one channel."""

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator):
        c = cfg.embed_dim
        hidden = cfg.head_hidden or c
        self.levels = cfg.num_layers
        self.mlps = [PixelMLP(c, hidden, c, rng) for _ in range(cfg.num_layers)]
        self.upsampler = UPSAMPLERS[cfg.upsampler]()
        fused = c * cfg.num_layers
        self.fuse = GBC(fused, rng, rank=default_rank(fused, cfg.rank_divisor),
                        norm_groups=default_norm_groups(fused, cfg.norm_groups))
        self.conv = Conv2d(fused, fused, 3, rng, padding=1)
        self.out = PixelMLP(fused, hidden, 1, rng)

    def forward(self, pyramid: Sequence[Tensor], out_hw: tuple[int, int]) -> Tensor:
        if not pyramid:
            raise ShapeError("empty feature pyramid")
        if len(pyramid) != self.levels:
            raise ShapeError(f"head expects {self.levels} feature maps, got {len(pyramid)}")
        shape = pyramid[0].shape
        if any(f.shape != shape for f in pyramid):
            raise ShapeError("feature maps must share one shape")
        ups = [self.upsampler(mlp(f), tuple(out_hw)) for mlp, f in zip(self.mlps, pyramid)]
        o1 = self.fuse(concat(ups, axis=1))
        return self.out(self.conv(o1))


class CrackSegNet(Module):
    """Backbone plus head; ``forward`` returns logits ``[N, 1, H, W]``."""

    def __init__(self, cfg: NetworkConfig, seed: int = 42):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        self.backbone = Backbone(cfg, rng)
        self.head = MFSHead(cfg, rng)

    def forward(self, image) -> Tensor:
        image = as_tensor(image)
        features = self.backbone(image)
        return self.head(features, image.shape[2:])

    def predict_proba(self, image) -> np.ndarray:
        with no_grad():
            return sigmoid(self.forward(image)).data


def binarize(prob, threshold: float) -> np.ndarray:
    """Strict ``prob > threshold`` mask as uint8."""
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must lie in (0, 1), got {threshold}")
    p = prob.data if isinstance(prob, Tensor) else np.asarray(prob)
    return (p > threshold).astype(np.uint8)
