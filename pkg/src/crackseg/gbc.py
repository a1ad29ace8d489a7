"""Low-rank bottleneck convolution and the gated block built from it."""

from __future__ import annotations

import numpy as np

from . import ops
from .errors import ConfigError, ShapeError
from .nn import GroupNorm, Module, Parameter, kaiming_uniform
from .tensor import Tensor, as_tensor, mul, relu


def default_rank(channels: int, divisor: int = 4) -> int:
    return max(1, channels // divisor)


def default_norm_groups(channels: int, groups: int = 4) -> int:
    if channels < groups:
        return channels
    while channels % groups:
        groups -= 1
    return groups


def bottconv_weight_count(cin: int, cout: int, k: int, rank: int) -> int:
    """Weights of pointwise-in, depthwise and pointwise-out (biases excluded)."""
    return rank * cin + rank * k * k + cout * rank


def full_conv_weight_count(cin: int, cout: int, k: int) -> int:
    return cout * cin * k * k


class BottConv(Module):
    """Pointwise projection to rank ``r``, depthwise ``k x k``, pointwise projection out.

    Both pointwise projections carry a bias; the depthwise stage does not.
    """

    def __init__(self, cin: int, cout: int, rank: int, k: int, rng: np.random.Generator):
        if k < 1:
            raise ConfigError(f"kernel size must be >= 1, got {k}")
        if rank < 1 or rank > min(cin, cout):
            raise ConfigError(f"rank {rank} must lie in [1, min(Cin, Cout) = {min(cin, cout)}]")
        self.cin, self.cout, self.rank, self.k = cin, cout, rank, k
        self.pw_in = Parameter(kaiming_uniform(rng, (rank, cin, 1, 1), cin))
        self.pw_in_bias = Parameter(kaiming_uniform(rng, (rank,), cin))
        self.dw = Parameter(kaiming_uniform(rng, (rank, 1, k, k), k * k))
        self.pw_out = Parameter(kaiming_uniform(rng, (cout, rank, 1, 1), rank))
        self.pw_out_bias = Parameter(kaiming_uniform(rng, (cout,), rank))

    def weight_count(self) -> int:
        return bottconv_weight_count(self.cin, self.cout, self.k, self.rank)

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 4 or x.shape[1] != self.cin:
            raise ShapeError(f"BottConv expects [N, {self.cin}, H, W], got {x.shape}", axis=1)
        h = ops.pointwise_conv2d(x, self.pw_in, self.pw_in_bias)
        h = ops.depthwise_conv2d(h, self.dw, padding=self.k // 2)
        return ops.pointwise_conv2d(h, self.pw_out, self.pw_out_bias)


class GBC(Module):
    """Gated bottleneck block.

    ``g1 = relu(n1(b1(x)))``, ``x1 = relu(n2(b2(g1)))``, ``g2 = relu(n3(b3(x)))``,
    ``y = relu(n4(b4(x1 * g2)))`` and the block returns ``y + x``.
    """

    def __init__(self, channels: int, rng: np.random.Generator, *, rank: int | None = None,
                 norm_groups: int | None = None, kernel_size: int = 3, gate_kernel_size: int = 1):
        self.channels = channels
        rank = default_rank(channels) if rank is None else rank
        groups = default_norm_groups(channels) if norm_groups is None else norm_groups
        if channels % groups:
            raise ConfigError(f"group norm: {channels} channels not divisible by {groups} groups")
        self.bott1 = BottConv(channels, channels, rank, kernel_size, rng)
        self.norm1 = GroupNorm(channels, groups)
        self.bott2 = BottConv(channels, channels, rank, kernel_size, rng)
        self.norm2 = GroupNorm(channels, groups)
        self.bott3 = BottConv(channels, channels, rank, gate_kernel_size, rng)
        self.norm3 = GroupNorm(channels, groups)
        self.bott4 = BottConv(channels, channels, rank, gate_kernel_size, rng)
        self.norm4 = GroupNorm(channels, groups)

    def branches(self, x: Tensor) -> dict[str, Tensor]:
        g1 = relu(self.norm1(self.bott1(x)))
        x1 = relu(self.norm2(self.bott2(g1)))
        g2 = relu(self.norm3(self.bott3(x)))
        m = mul(x1, g2)
        y = relu(self.norm4(self.bott4(m)))
        return {"g1": g1, "x1": x1, "g2": g2, "m": m, "y": y}

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ConfigError(f"GBC built for {self.channels} channels, got input {x.shape}")
        return self.branches(x)["y"] + x
