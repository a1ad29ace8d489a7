"""Convolution, normalisation and resampling operators on :class:`Tensor`."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ShapeError
from .tensor import Tensor, as_tensor, make_result


def _out_size(n: int, k: int, stride: int, padding: int) -> int:
    return (n + 2 * padding - k) // stride + 1


def conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0, groups: int = 1) -> Tensor:
    """2-D cross-correlation over NCHW input.

    ``weight`` has shape ``[Cout, Cin // groups, k, k]``.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be 4-d NCHW, got shape {x.shape}", axis=0)
    if weight.ndim != 4:
        raise ShapeError(f"conv2d weight must be 4-d, got shape {weight.shape}", axis=0)
    n, cin, h, w = x.shape
    cout, cin_g, kh, kw = weight.shape
    if kh != kw or kh < 1:
        raise ShapeError(f"conv2d kernel must be square with k >= 1, got {kh}x{kw}", axis=2)
    k = kh
    if stride < 1 or padding < 0:
        raise ConfigError(f"conv2d needs stride >= 1 and padding >= 0 (got {stride}, {padding})")
    if groups < 1 or cin % groups or cout % groups:
        raise ConfigError(f"groups={groups} must divide Cin={cin} and Cout={cout}")
    if cin_g * groups != cin:
        raise ShapeError(
            f"conv2d channel axis: input has {cin} channels, weight expects {cin_g * groups}", axis=1
        )
    if h + 2 * padding < k:
        raise ShapeError(f"conv2d height axis: {h} + 2*{padding} < kernel {k}", axis=2)
    if w + 2 * padding < k:
        raise ShapeError(f"conv2d width axis: {w} + 2*{padding} < kernel {k}", axis=3)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (cout,):
            raise ShapeError(f"conv2d bias must have shape ({cout},), got {bias.shape}", axis=0)

    ho, wo = _out_size(h, k, stride, padding), _out_size(w, k, stride, padding)
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    wd = weight.data
    cout_g = cout // groups
    depthwise = groups == cin and cin_g == 1 and cout_g == 1

    def shifted(arr, i, j):
        return arr[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride]

    # [k, k, Cout, Cin] so each tap is a contiguous matrix (BLAS path)
    taps = np.ascontiguousarray(wd.transpose(2, 3, 0, 1)) if groups == 1 else None
    if groups == 1 and k == 1 and stride == 1:
        out = np.matmul(taps[0, 0], xp.reshape(n, cin, ho * wo)).reshape(n, cout, ho, wo)
    elif groups == 1:
        out = np.zeros((n, cout, ho * wo))
        for i in range(k):
            for j in range(k):
                xs = shifted(xp, i, j).reshape(n, cin, ho * wo)
                out += np.matmul(taps[i, j], xs)
        out = out.reshape(n, cout, ho, wo)
    elif depthwise:
        out = np.zeros((n, cout, ho, wo))
        for i in range(k):
            for j in range(k):
                out += shifted(xp, i, j) * wd[None, :, 0, i, j, None, None]
    else:
        win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
        win = win.reshape(n, groups, cin_g, ho, wo, k, k)
        wg = wd.reshape(groups, cout_g, cin_g, k, k)
        out = np.einsum("ngchwij,gocij->ngohw", win, wg, optimize=True).reshape(n, cout, ho, wo)
    if bias is not None:
        out += bias.data[None, :, None, None]

    def backward(g):
        if groups == 1 and k == 1 and stride == 1:
            g2 = g.reshape(n, cout, ho * wo)
            xs = xp.reshape(n, cin, ho * wo)
            gw = sum(g2[b] @ xs[b].T for b in range(n)).reshape(wd.shape)
            gxp = np.matmul(np.ascontiguousarray(taps[0, 0].T), g2).reshape(xp.shape)
            gx = gxp[:, :, padding : padding + h, padding : padding + w] if padding else gxp
            grads = [np.ascontiguousarray(gx), gw]
            if bias is not None:
                grads.append(g.sum(axis=(0, 2, 3)))
            return grads
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(wd)
        if groups == 1:
            g2 = g.reshape(n, cout, ho * wo)
            for i in range(k):
                for j in range(k):
                    xs = shifted(xp, i, j).reshape(n, cin, ho * wo)
                    gw[:, :, i, j] = sum(g2[b] @ xs[b].T for b in range(n))
                    tap_t = np.ascontiguousarray(taps[i, j].T)
                    shifted(gxp, i, j)[...] += np.matmul(tap_t, g2).reshape(n, cin, ho, wo)
        elif depthwise:
            for i in range(k):
                for j in range(k):
                    gw[:, 0, i, j] = np.einsum("nchw,nchw->c", g, shifted(xp, i, j))
                    shifted(gxp, i, j)[...] += g * wd[None, :, 0, i, j, None, None]
        else:
            win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
            wing = win.reshape(n, groups, cin_g, ho, wo, k, k)
            gg = g.reshape(n, groups, cout_g, ho, wo)
            gw = np.einsum("ngohw,ngchwij->gocij", gg, wing, optimize=True).reshape(wd.shape)
            wg = wd.reshape(groups, cout_g, cin_g, k, k)
            gwin = np.einsum("ngohw,gocij->ngchwij", gg, wg, optimize=True).reshape(n, cin, ho, wo, k, k)
            for i in range(k):
                for j in range(k):
                    shifted(gxp, i, j)[...] += gwin[..., i, j]
        gx = gxp[:, :, padding : padding + h, padding : padding + w] if padding else gxp
        grads = [np.ascontiguousarray(gx), gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, parents, backward, "conv2d")


def depthwise_conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Per-channel convolution; ``weight`` is ``[C, 1, k, k]``."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4:
        raise ShapeError(f"depthwise_conv2d input must be 4-d NCHW, got shape {x.shape}", axis=0)
    c = x.shape[1]
    if weight.ndim != 4 or weight.shape[0] != c or weight.shape[1] != 1:
        raise ShapeError(
            f"depthwise_conv2d channel axis: weight {weight.shape} does not match {c} input channels", axis=1
        )
    return conv2d(x, weight, bias, stride=stride, padding=padding, groups=c)


def pointwise_conv2d(x, weight, bias=None) -> Tensor:
    """1x1 convolution, i.e. a per-pixel matrix multiply over channels."""
    weight = as_tensor(weight)
    if weight.ndim != 4 or weight.shape[2:] != (1, 1):
        raise ShapeError(f"pointwise weight must be [Cout, Cin, 1, 1], got {weight.shape}", axis=2)
    return conv2d(x, weight, bias, stride=1, padding=0, groups=1)


def group_norm(x, groups: int, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalise each (sample, channel-group) to zero mean / unit variance, then scale and shift."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim != 4:
        raise ShapeError(f"group_norm input must be 4-d NCHW, got shape {x.shape}", axis=0)
    n, c, h, w = x.shape
    if groups < 1 or c % groups:
        raise ConfigError(f"group_norm: {c} channels not divisible into {groups} groups")
    if eps <= 0:
        raise ConfigError("group_norm: eps must be positive")
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"group_norm affine parameters must have shape ({c},)", axis=1)
    xg = x.data.reshape(n, groups, -1)
    mu = xg.mean(axis=2, keepdims=True)
    xc = xg - mu
    var = np.einsum("ngk,ngk->ng", xc, xc)[..., None] / xc.shape[2]
    inv_std = 1.0 / np.sqrt(var + eps)
    xc *= inv_std
    xhat = xc.reshape(n, c, h, w)
    out = xhat * gamma.data[None, :, None, None]
    out += beta.data[None, :, None, None]

    def backward(g):
        gxhat = (g * gamma.data[None, :, None, None]).reshape(n, groups, -1)
        xh = xhat.reshape(n, groups, -1)
        m = gxhat.shape[2]
        proj = np.einsum("ngk,ngk->ng", gxhat, xh)[..., None] / m
        gx = gxhat - gxhat.mean(axis=2, keepdims=True)
        gx -= xh * proj
        gx *= inv_std
        ggamma = np.einsum("nchw,nchw->c", g, xhat)
        gbeta = g.sum(axis=(0, 2, 3))
        return gx.reshape(n, c, h, w), ggamma, gbeta

    return make_result(out, (x, gamma, beta), backward, "group_norm")


def interpolation_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic ``[n_out, n_in]`` matrix for half-pixel-centred linear resampling."""
    m = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for o in range(n_out):
        src = max((o + 0.5) * scale - 0.5, 0.0)
        i0 = min(int(np.floor(src)), n_in - 1)
        i1 = min(i0 + 1, n_in - 1)
        lam = src - i0
        m[o, i0] += 1.0 - lam
        m[o, i1] += lam
    return m


def resize_bilinear(x, out_hw: tuple[int, int]) -> Tensor:
    """Bilinear resize of NCHW maps (corners not aligned) to ``out_hw``."""
    x = as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"resize input must be 4-d NCHW, got shape {x.shape}", axis=0)
    h, w = x.shape[2:]
    ho, wo = out_hw
    mh = interpolation_matrix(h, ho)
    mw = interpolation_matrix(w, wo)
    out = np.matmul(np.matmul(mh, x.data), mw.T)

    def backward(g):
        return (np.matmul(np.matmul(mh.T, g), mw),)

    return make_result(out, (x,), backward, "resize_bilinear")


def bilinear_upsample(x, scale: int) -> Tensor:
    if int(scale) != scale or scale < 1:
        raise ConfigError(f"upsample scale must be a positive integer, got {scale}")
    x = as_tensor(x)
    return resize_bilinear(x, (x.shape[2] * int(scale), x.shape[3] * int(scale)))
