"""Parameter containers and the small layer set the network is built from."""

from __future__ import annotations

from collections import OrderedDict
from typing import Iterator

import numpy as np

from . import ops
from .tensor import Tensor, as_tensor, relu


class Parameter(Tensor):
    """A leaf tensor that always tracks gradients."""

    __slots__ = ()

    def __init__(self, data, name: str | None = None):
        super().__init__(data, requires_grad=True, name=name)


class Module:
    """Base class; parameters and submodules are discovered from attributes.

    Attribute insertion order defines the parameter naming order, which in
    turn fixes the checkpoint layout.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{name}.{i}", item

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing={missing} unexpected={unexpected}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"{name}: checkpoint shape {arr.shape} != model shape {p.shape}")
            p.data = np.ascontiguousarray(arr.copy())
            p.grad = np.zeros_like(p.data)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def kaiming_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(1.0 / max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, k: int, rng: np.random.Generator, *, stride: int = 1,
                 padding: int = 0, groups: int = 1, bias: bool = True):
        fan_in = (cin // groups) * k * k
        self.weight = Parameter(kaiming_uniform(rng, (cout, cin // groups, k, k), fan_in))
        if bias:
            self.bias = Parameter(kaiming_uniform(rng, (cout,), fan_in))
        else:
            self.bias = None
        self.stride = stride
        self.padding = padding
        self.groups = groups

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding, groups=self.groups)


class GroupNorm(Module):
    def __init__(self, channels: int, groups: int, eps: float = 1e-5):
        self.weight = Parameter(np.ones(channels))
        self.bias = Parameter(np.zeros(channels))
        self.groups = groups
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return ops.group_norm(x, self.groups, self.weight, self.bias, self.eps)


class Linear(Module):
    """Affine map on the last axis: ``x @ W + b`` with ``W`` stored ``[in, out]``."""

    def __init__(self, fan_in: int, fan_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = Parameter(kaiming_uniform(rng, (fan_in, fan_out), fan_in))
        self.bias = Parameter(kaiming_uniform(rng, (fan_out,), fan_in)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        out = as_tensor(x) @ self.weight
        return out + self.bias if self.bias is not None else out


class PixelMLP(Module):
    """Per-pixel channel mixing: 1x1 conv, ReLU, 1x1 conv."""

    def __init__(self, cin: int, hidden: int, cout: int, rng: np.random.Generator):
        self.fc1 = Conv2d(cin, hidden, 1, rng)
        self.fc2 = Conv2d(hidden, cout, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(relu(self.fc1(x)))
