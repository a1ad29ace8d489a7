"""Selective state-space scan with exact zero-order-hold discretisation.

Continuous parameters per block:

* ``P`` (``[G, D]``): state decay, stored as ``log(-P)`` so it stays negative.
* ``S`` (``[D]``): per-channel skip gain.
* ``delta_proj`` / ``q_proj`` / ``r_proj``: input-dependent step size,
  input matrix and readout.

For a step ``k`` with input ``w_k`` (``[D]``)::

    Pbar = exp(delta * P)
    Qbar = (exp(delta * P) - 1) / P * Q_k
    z_k  = Pbar * z_{k-1} + Qbar * w_k
    u_k  = R_k . z_k + S * w_k
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError, UsageError
from .nn import Linear, Module, Parameter
from .scan_paths import ScanPathSet, apply, unapply
from .tensor import Tensor, as_tensor, exp, make_result, mul, neg, softplus

SERIES_CUTOFF = 1e-6


def zoh_coefficient(delta: np.ndarray, p: np.ndarray) -> np.ndarray:
    """``(exp(delta*p) - 1) / p`` with the ``delta*p -> 0`` limit taken explicitly."""
    a = delta * p
    small = np.abs(a) < SERIES_CUTOFF
    safe_p = np.where(small, 1.0, p)
    exact = np.expm1(a) / safe_p
    series = delta * (1.0 + 0.5 * a)
    return np.where(small, series, exact)


def _zoh_coefficient_grads(delta: np.ndarray, p: np.ndarray, e: np.ndarray):
    """Partial derivatives of :func:`zoh_coefficient` w.r.t. delta and p."""
    a = delta * p
    small = np.abs(a) < SERIES_CUTOFF
    safe_p = np.where(small, 1.0, p)
    d_delta = np.where(small, 1.0 + a, e)
    exact_dp = (a * e - np.expm1(a)) / (safe_p * safe_p)
    series_dp = delta * delta * (0.5 + a / 3.0)
    d_p = np.where(small, series_dp, exact_dp)
    return d_delta, d_p


def discretize(p, delta, q):
    """Zero-order-hold discretisation.

    ``p``: ``[G, D]``, ``delta``: ``[L, D]``, ``q``: ``[L, G]``.
    Returns ``(Pbar, Qbar)`` as ``[L, G, D]`` arrays.
    """
    p = np.asarray(as_tensor(p).data)
    delta = np.asarray(as_tensor(delta).data)
    q = np.asarray(as_tensor(q).data)
    if (delta <= 0).any():
        raise NumericalError("discretize: step sizes must be strictly positive")
    if p.ndim != 2 or delta.ndim != 2 or q.ndim != 2:
        raise ShapeError("discretize expects P [G,D], delta [L,D], Q [L,G]")
    if p.shape[1] != delta.shape[1]:
        raise ShapeError(f"channel axis: P has {p.shape[1]}, delta has {delta.shape[1]}", axis=1)
    if q.shape != (delta.shape[0], p.shape[0]):
        raise ShapeError(f"Q must be [{delta.shape[0]}, {p.shape[0]}], got {list(q.shape)}", axis=1)
    d = delta[:, None, :]
    pbar = np.exp(d * p[None])
    qbar = zoh_coefficient(d, p[None]) * q[:, :, None]
    return pbar, qbar


def ssm_recurrence(delta, p, q, r, w) -> Tensor:
    """Run the discretised recurrence; returns ``R_k . z_k`` (no skip term).

    Shapes: ``delta`` ``[N, L, D]``, ``p`` ``[G, D]``, ``q``/``r`` ``[N, L, G]``,
    ``w`` ``[N, L, D]``. The initial state is zero.
    """
    delta, p, q, r, w = (as_tensor(t) for t in (delta, p, q, r, w))
    n, length, d = w.shape
    g_dim = p.shape[0]
    if delta.shape != w.shape:
        raise ShapeError(f"delta shape {delta.shape} != input shape {w.shape}", axis=2)
    if p.shape != (g_dim, d):
        raise ShapeError(f"P must be [G, {d}], got {p.shape}", axis=1)
    if q.shape != (n, length, g_dim) or r.shape != (n, length, g_dim):
        raise ShapeError(f"Q and R must be [{n}, {length}, {g_dim}]", axis=2)
    if (delta.data <= 0).any():
        raise NumericalError("selective scan: step sizes must be strictly positive")

    dt = delta.data[:, :, None, :]  # [N, L, 1, D]
    pp = p.data[None, None]  # [1, 1, G, D]
    e = np.exp(dt * pp)  # Pbar, [N, L, G, D]
    c = zoh_coefficient(dt, pp)
    qd = q.data[..., None]  # [N, L, G, 1]
    wd = w.data[:, :, None, :]  # [N, L, 1, D]
    b = c * qd * wd

    states = np.empty((n, length, g_dim, d))
    z = np.zeros((n, g_dim, d))
    for k in range(length):
        z = e[:, k] * z + b[:, k]
        states[:, k] = z
    y = np.einsum("nlg,nlgd->nld", r.data, states)

    def backward(gy):
        g_r = np.einsum("nld,nlgd->nlg", gy, states)
        g_z_from_y = r.data[..., None] * gy[:, :, None, :]  # [N, L, G, D]
        g_e = np.empty_like(e)
        g_b = np.empty_like(b)
        gz = np.zeros((n, g_dim, d))
        for k in range(length - 1, -1, -1):
            gz = gz + g_z_from_y[:, k]
            prev = states[:, k - 1] if k > 0 else 0.0
            g_e[:, k] = gz * prev
            g_b[:, k] = gz
            gz = gz * e[:, k]
        g_c = g_b * qd * wd
        g_q = (g_b * c * wd).sum(axis=3)
        g_w = (g_b * c * qd).sum(axis=2)
        dc_dt, dc_dp = _zoh_coefficient_grads(dt, pp, e)
        g_dt = (g_e * e * pp + g_c * dc_dt).sum(axis=2)
        g_p = (g_e * e * dt + g_c * dc_dp).sum(axis=(0, 1))
        return g_dt, g_p, g_q, g_r, g_w

    return make_result(y, (delta, p, q, r, w), backward, "ssm_recurrence")


class SsmParams(Module):
    """Per-path selective-scan parameters with state size G over D channels."""

    def __init__(self, channels: int, state_dim: int, rng: np.random.Generator,
                 dt_min: float = 1e-3, dt_max: float = 1e-1):
        if channels < 1 or state_dim < 1:
            raise ConfigError("SSM needs channels >= 1 and state_dim >= 1")
        self.channels = channels
        self.state_dim = state_dim
        # S4D-real: P[g, :] = -(g + 1)
        self.log_neg_p = Parameter(np.log(np.tile(np.arange(1, state_dim + 1, dtype=float)[:, None], (1, channels))))
        self.skip = Parameter(np.ones(channels))
        self.delta_proj = Linear(channels, channels, rng)
        self.delta_proj.weight.data *= 0.1
        dt = np.exp(rng.uniform(np.log(dt_min), np.log(dt_max), size=channels))
        self.delta_proj.bias.data = dt + np.log(-np.expm1(-dt))  # inverse softplus
        self.q_proj = Linear(channels, state_dim, rng, bias=False)
        self.r_proj = Linear(channels, state_dim, rng, bias=False)

    def decay(self) -> Tensor:
        return neg(exp(self.log_neg_p))

    def step_sizes(self, w: Tensor) -> Tensor:
        return softplus(self.delta_proj(w))


def selective_scan(seq, params: SsmParams) -> Tensor:
    """Scan ``seq`` (``[L, D]`` or ``[N, L, D]``) with input-dependent parameters."""
    seq = as_tensor(seq)
    squeeze = seq.ndim == 2
    if squeeze:
        seq = seq.reshape(1, *seq.shape)
    if seq.ndim != 3:
        raise ShapeError(f"selective_scan expects [L, D] or [N, L, D], got {seq.shape}")
    if seq.shape[1] == 0:
        raise UsageError("selective_scan on an empty sequence")
    if seq.shape[2] != params.channels:
        raise ShapeError(f"channel axis: sequence has {seq.shape[2]}, params expect {params.channels}", axis=2)
    delta = params.step_sizes(seq)
    q = params.q_proj(seq)
    r = params.r_proj(seq)
    y = ssm_recurrence(delta, params.decay(), q, r, seq) + mul(seq, params.skip)
    return y.reshape(y.shape[1:]) if squeeze else y


def ss2d(grid_seq, paths: ScanPathSet, params_per_path: Sequence[SsmParams]) -> Tensor:
    """Scan along every path, restore grid order and average the results."""
    grid_seq = as_tensor(grid_seq)
    if len(params_per_path) != len(paths):
        raise ConfigError(f"{len(paths)} scan paths but {len(params_per_path)} parameter sets")
    axis = grid_seq.ndim - 2
    if grid_seq.shape[axis] != paths.height * paths.width:
        raise ShapeError(
            f"sequence length {grid_seq.shape[axis]} != grid {paths.height}x{paths.width}", axis=axis
        )
    total = None
    for path, params in zip(paths, params_per_path):
        out = unapply(path, selective_scan(apply(path, grid_seq, axis=axis), params), axis=axis)
        total = out if total is None else total + out
    return total * (1.0 / len(paths))
