"""Patch embedding, the structure-aware state-space block and the isotropic stack."""

from __future__ import annotations

import numpy as np

from . import ops
from .config import NetworkConfig
from .errors import ConfigError, ShapeError
from .gbc import GBC, default_norm_groups, default_rank
from .nn import Conv2d, GroupNorm, Module, Parameter
from .scan_paths import ScanPathSet, generate
from .ssm import SsmParams, ss2d
from .tensor import Tensor, as_tensor, concat, mul, sigmoid, sub


def seq_to_grid(seq: Tensor, h: int, w: int) -> Tensor:
    """``[N, L, C]`` -> ``[N, C, h, w]`` with row-major token order."""
    n, length, c = seq.shape
    if length != h * w:
        raise ShapeError(f"sequence length {length} != {h}x{w}", axis=1)
    return seq.transpose(0, 2, 1).reshape(n, c, h, w)


def grid_to_seq(grid: Tensor) -> Tensor:
    n, c, h, w = grid.shape
    return grid.reshape(n, c, h * w).transpose(0, 2, 1)


class PatchEmbed(Module):
    """Non-overlapping ``ps x ps`` patches projected to C channels plus a learned position table."""

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator, in_channels: int = 3):
        self.patch_size = cfg.patch_size
        self.grid = cfg.grid_size
        self.proj = Conv2d(in_channels, cfg.embed_dim, cfg.patch_size, rng, stride=cfg.patch_size)
        self.pos = Parameter(np.zeros((self.grid * self.grid, cfg.embed_dim)))

    def position_table(self, h: int, w: int) -> Tensor:
        if (h, w) == (self.grid, self.grid):
            return self.pos
        c = self.pos.shape[1]
        table = self.pos.transpose(1, 0).reshape(1, c, self.grid, self.grid)
        return ops.resize_bilinear(table, (h, w)).reshape(c, h * w).transpose(1, 0)

    def forward(self, image: Tensor) -> tuple[Tensor, tuple[int, int]]:
        image = as_tensor(image)
        if image.ndim != 4:
            raise ShapeError(f"image batch must be [N, 3, H, W], got {image.shape}", axis=0)
        _, _, h, w = image.shape
        ps = self.patch_size
        if h % ps or w % ps:
            raise ShapeError(
                f"image size {h}x{w} must be a multiple of the patch size {ps}", axis=2 if h % ps else 3
            )
        tokens = grid_to_seq(self.proj(image))
        gh, gw = h // ps, w // ps
        return tokens + self.position_table(gh, gw), (gh, gw)


class PixelFusion(Module):
    """Pixel-wise convex gate between the scanned sequence and a reference map.

    ``gate = sigmoid(conv1x1([scanned, reference]))`` and the result is
    ``gate * scanned + (1 - gate) * reference``.
    """

    def __init__(self, channels: int, rng: np.random.Generator):
        self.gate = Conv2d(2 * channels, channels, 1, rng)

    def forward(self, scanned: Tensor, reference: Tensor) -> Tensor:
        gate = sigmoid(self.gate(concat([scanned, reference], axis=1)))
        return mul(gate, scanned) + mul(sub(1.0, gate), reference)


class SAVSSBlock(Module):
    """GBC refinement, multi-path selective scan, pixel fusion and a residual add.

    The refined grid is group-normalised before the scan. Without it the
    residual stream grows with depth and the scan, which is cubic in its
    input, overflows its step sizes in deep stacks.
    The fusion blends the scanned sequence with the GBC branch output (the
    refinement without its skip), then the block input is added back.
    """

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator):
        c = cfg.embed_dim
        self.channels = c
        self.gbc = GBC(c, rng, rank=default_rank(c, cfg.rank_divisor),
                       norm_groups=default_norm_groups(c, cfg.norm_groups)) if cfg.block_gbc else None
        n_params = 1 if cfg.share_ssm_params else cfg.num_paths
        self.ssm = [SsmParams(c, cfg.state_dim, rng) for _ in range(n_params)]
        self.num_paths = cfg.num_paths
        self.norm = GroupNorm(c, default_norm_groups(c, cfg.norm_groups))
        self.fusion = PixelFusion(c, rng)

    def path_params(self) -> list[SsmParams]:
        return self.ssm if len(self.ssm) == self.num_paths else self.ssm * self.num_paths

    def forward(self, seq: Tensor, paths: ScanPathSet) -> Tensor:
        seq = as_tensor(seq)
        if seq.ndim != 3 or seq.shape[2] != self.channels:
            raise ConfigError(f"block built for {self.channels} channels, got sequence {seq.shape}")
        if seq.shape[1] != paths.height * paths.width:
            raise ConfigError(f"sequence length {seq.shape[1]} does not match the cached {paths.height}x{paths.width} paths")
        h, w = paths.height, paths.width
        grid = seq_to_grid(seq, h, w)
        if self.gbc is not None:
            branch = self.gbc.branches(grid)["y"]
            refined = branch + grid
        else:
            branch = Tensor(np.zeros(grid.shape))
            refined = grid
        scanned = ss2d(grid_to_seq(self.norm(refined)), paths, self.path_params())
        # the fusion only sees learned contributions, so zeroed weights make the block an identity
        fused = self.fusion(seq_to_grid(scanned, h, w), branch)
        return seq + grid_to_seq(fused)


class Backbone(Module):
    """Patch embedding followed by ``num_layers`` blocks at constant resolution."""

    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.embed = PatchEmbed(cfg, rng)
        c = cfg.embed_dim
        self.stem = GBC(c, rng, rank=default_rank(c, cfg.rank_divisor),
                        norm_groups=default_norm_groups(c, cfg.norm_groups)) if cfg.stem_gbc else None
        self.blocks = [SAVSSBlock(cfg, rng) for _ in range(cfg.num_layers)]

    def paths_for(self, h: int, w: int) -> ScanPathSet:
        return generate(self.cfg.scan_strategy, h, w, self.cfg.num_paths)

    def forward(self, image: Tensor) -> list[Tensor]:
        seq, (h, w) = self.embed(image)
        if self.stem is not None:
            seq = grid_to_seq(self.stem(seq_to_grid(seq, h, w)))
        paths = self.paths_for(h, w)
        features = []
        for block in self.blocks:
            seq = block(seq, paths)
            features.append(seq_to_grid(seq, h, w))
        return features
