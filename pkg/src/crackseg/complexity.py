"""Closed-form parameter and FLOP accounting for the network.

FLOPs are 2 x multiply-accumulates of the weighted layers (convolutions,
linear maps) plus the scan recurrence. Normalisation, activations, gating
products and resampling are not counted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import checkpoint
from .config import NetworkConfig
from .head import CrackSegNet
from .gbc import bottconv_weight_count, default_rank


@dataclass
class ComplexityReport:
    params: int
    per_module: dict[str, int]
    flops: int
    per_module_flops: dict[str, int]
    input_size: int
    file_bytes: int
    notes: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "per_module": self.per_module,
            "flops": self.flops,
            "per_module_flops": self.per_module_flops,
            "input_size": self.input_size,
            "file_bytes": self.file_bytes,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def conv_params(cin: int, cout: int, k: int, bias: bool = True) -> int:
    return cout * cin * k * k + (cout if bias else 0)


def conv_macs(cin: int, cout: int, k: int, out_pixels: int) -> int:
    return cout * cin * k * k * out_pixels


def bottconv_params(cin: int, cout: int, k: int, rank: int) -> int:
    return bottconv_weight_count(cin, cout, k, rank) + rank + cout


def bottconv_macs(cin: int, cout: int, k: int, rank: int, pixels: int) -> int:
    return (rank * cin + rank * k * k + cout * rank) * pixels


def gbc_params(c: int, rank: int, k: int = 3, gate_k: int = 1) -> int:
    bott = 2 * bottconv_params(c, c, k, rank) + 2 * bottconv_params(c, c, gate_k, rank)
    return bott + 4 * 2 * c  # four group norms with scale and offset


def gbc_macs(c: int, rank: int, pixels: int, k: int = 3, gate_k: int = 1) -> int:
    return 2 * bottconv_macs(c, c, k, rank, pixels) + 2 * bottconv_macs(c, c, gate_k, rank, pixels)


def ssm_params(d: int, g: int) -> int:
    # decay table, skip, step-size projection (with bias), input and readout projections
    return g * d + d + (d * d + d) + 2 * d * g


def ssm_macs(d: int, g: int, length: int) -> int:
    projections = (d * d + 2 * d * g) * length
    recurrence = 3 * g * d * length  # decay, input injection, readout
    return projections + recurrence + d * length  # skip


def pixel_mlp_params(cin: int, hidden: int, cout: int) -> int:
    return conv_params(cin, hidden, 1) + conv_params(hidden, cout, 1)


def block_params(cfg: NetworkConfig) -> int:
    c = cfg.embed_dim
    rank = default_rank(c, cfg.rank_divisor)
    n_ssm = 1 if cfg.share_ssm_params else cfg.num_paths
    total = n_ssm * ssm_params(c, cfg.state_dim) + conv_params(2 * c, c, 1) + 2 * c
    if cfg.block_gbc:
        total += gbc_params(c, rank)
    return total


def module_params(cfg: NetworkConfig) -> dict[str, int]:
    """Parameter count per top-level component, keyed like the weight names."""
    c = cfg.embed_dim
    hidden = cfg.head_hidden or c
    fused = c * cfg.num_layers
    g = cfg.grid_size
    counts = {"backbone.embed": conv_params(3, c, cfg.patch_size) + g * g * c}
    if cfg.stem_gbc:
        counts["backbone.stem"] = gbc_params(c, default_rank(c, cfg.rank_divisor))
    for i in range(cfg.num_layers):
        counts[f"backbone.blocks.{i}"] = block_params(cfg)
    counts["head.mlps"] = cfg.num_layers * pixel_mlp_params(c, hidden, c)
    counts["head.fuse"] = gbc_params(fused, default_rank(fused, cfg.rank_divisor))
    counts["head.conv"] = conv_params(fused, fused, 3)
    counts["head.out"] = pixel_mlp_params(fused, hidden, 1)
    return counts


def module_flops(cfg: NetworkConfig, height: int, width: int) -> dict[str, int]:
    c = cfg.embed_dim
    hidden = cfg.head_hidden or c
    fused = c * cfg.num_layers
    ps = cfg.patch_size
    tokens = (height // ps) * (width // ps)
    pixels = height * width
    rank = default_rank(c, cfg.rank_divisor)
    macs = {"backbone.embed": conv_macs(3, c, ps, tokens)}
    if cfg.stem_gbc:
        macs["backbone.stem"] = gbc_macs(c, rank, tokens)
    block = cfg.num_paths * ssm_macs(c, cfg.state_dim, tokens) + conv_macs(2 * c, c, 1, tokens)
    if cfg.block_gbc:
        block += gbc_macs(c, rank, tokens)
    for i in range(cfg.num_layers):
        macs[f"backbone.blocks.{i}"] = block
    macs["head.mlps"] = cfg.num_layers * (c * hidden + hidden * c) * tokens
    macs["head.fuse"] = gbc_macs(fused, default_rank(fused, cfg.rank_divisor), pixels)
    macs["head.conv"] = conv_macs(fused, fused, 3, pixels)
    macs["head.out"] = (fused * hidden + hidden) * pixels
    return {k: 2 * v for k, v in macs.items()}


def checkpoint_bytes(cfg: NetworkConfig) -> int:
    """Exact size of the weight file for ``cfg`` (header + manifest + float64 payload)."""
    return len(checkpoint.encode(CrackSegNet(cfg, seed=0).state_dict(), checkpoint.network_config(cfg)))


def report(cfg: NetworkConfig, input_size: int) -> ComplexityReport:
    per_module = module_params(cfg)
    per_flops = module_flops(cfg, input_size, input_size)
    return ComplexityReport(
        params=sum(per_module.values()),
        per_module=per_module,
        flops=sum(per_flops.values()),
        per_module_flops=per_flops,
        input_size=input_size,
        file_bytes=checkpoint_bytes(cfg),
        notes={"flops": "2 x multiply-accumulates of weighted layers and the scan recurrence"},
    )
