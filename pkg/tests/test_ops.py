import numpy as np
import pytest

from crackseg import ops
from crackseg.errors import ConfigError, ShapeError

from conftest import numeric_grad_check


def conv_loop(x, w, b, stride, padding, groups):
    n, cin, h, wd = x.shape
    cout, cin_g, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - k) // stride + 1
    wo = (wd + 2 * padding - k) // stride + 1
    out = np.zeros((n, cout, ho, wo))
    per_group = cout // groups
    for bi in range(n):
        for o in range(cout):
            g = o // per_group
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for c in range(cin_g):
                        for di in range(k):
                            for dj in range(k):
                                acc += w[o, c, di, dj] * xp[bi, g * cin_g + c, i * stride + di, j * stride + dj]
                    out[bi, o, i, j] = acc + (b[o] if b is not None else 0.0)
    return out


@pytest.mark.parametrize("cin,cout,k,stride,padding,groups,hw", [
    (3, 4, 3, 1, 1, 1, (5, 6)),
    (2, 3, 3, 2, 1, 1, (7, 5)),
    (3, 5, 1, 1, 0, 1, (4, 4)),
    (4, 4, 3, 1, 1, 4, (5, 5)),
    (4, 6, 3, 1, 0, 2, (5, 4)),
    (3, 2, 4, 4, 0, 1, (8, 8)),
])
def test_conv_matches_loop(cin, cout, k, stride, padding, groups, hw, rng):
    x = rng.normal(size=(2, cin, *hw))
    w = rng.normal(size=(cout, cin // groups, k, k))
    b = rng.normal(size=cout)
    got = ops.conv2d(x, w, b, stride=stride, padding=padding, groups=groups).data
    assert np.allclose(got, conv_loop(x, w, b, stride, padding, groups), atol=1e-12)


@pytest.mark.parametrize("fn,shapes", [
    (lambda x, w, b: ops.conv2d(x, w, b, stride=2, padding=1), [(1, 2, 5, 5), (3, 2, 3, 3), (3,)]),
    (lambda x, w, b: ops.conv2d(x, w, b, padding=1), [(2, 3, 4, 4), (2, 3, 3, 3), (2,)]),
    (lambda x, w: ops.depthwise_conv2d(x, w, padding=1), [(2, 3, 4, 4), (3, 1, 3, 3)]),
    (lambda x, w: ops.conv2d(x, w, groups=2, padding=1), [(1, 4, 4, 4), (6, 2, 3, 3)]),
    (lambda x, w, b: ops.pointwise_conv2d(x, w, b), [(2, 3, 3, 3), (4, 3, 1, 1), (4,)]),
    (lambda x, g, b: ops.group_norm(x, 2, g, b, 1e-5), [(2, 4, 3, 3), (4,), (4,)]),
    (lambda x: ops.bilinear_upsample(x, 3), [(1, 2, 3, 4)]),
    (lambda x: ops.resize_bilinear(x, (5, 7)), [(1, 2, 3, 4)]),
])
def test_op_gradients(fn, shapes, rng):
    arrays = [rng.uniform(-2, 2, size=s) for s in shapes]
    assert numeric_grad_check(fn, arrays, rng) < 1e-4


def test_conv_errors_name_axis():
    with pytest.raises(ShapeError) as info:
        ops.conv2d(np.zeros((1, 3, 4, 4)), np.zeros((2, 2, 3, 3)), padding=1)
    assert info.value.axis == 1
    with pytest.raises(ShapeError) as info:
        ops.conv2d(np.zeros((1, 2, 2, 5)), np.zeros((2, 2, 3, 3)))
    assert info.value.axis == 2
    with pytest.raises(ConfigError):
        ops.conv2d(np.zeros((1, 3, 4, 4)), np.zeros((2, 1, 3, 3)), groups=3)


def test_group_norm_oracle(rng):
    x = rng.normal(size=(2, 6, 3, 3))
    gamma, beta = rng.normal(size=6), rng.normal(size=6)
    out = ops.group_norm(x, 3, gamma, beta, 1e-5).data
    ref = np.empty_like(x)
    for n in range(2):
        for g in range(3):
            block = x[n, 2 * g:2 * g + 2]
            ref[n, 2 * g:2 * g + 2] = (block - block.mean()) / np.sqrt(block.var() + 1e-5)
    ref = ref * gamma[None, :, None, None] + beta[None, :, None, None]
    assert np.allclose(out, ref, atol=1e-12)


def test_group_norm_rejects_bad_groups():
    with pytest.raises(ConfigError):
        ops.group_norm(np.zeros((1, 6, 2, 2)), 4, np.ones(6), np.zeros(6))


def test_interpolation_rows_sum_to_one():
    for n_in, n_out in [(1, 4), (3, 12), (8, 64), (5, 5)]:
        m = ops.interpolation_matrix(n_in, n_out)
        assert np.allclose(m.sum(axis=1), 1.0)
    assert np.array_equal(ops.interpolation_matrix(4, 4), np.eye(4))


def test_upsample_half_pixel_values():
    x = np.array([[[[0.0, 1.0]]]])
    out = ops.bilinear_upsample(x, 2).data[0, 0, 0]
    assert np.allclose(out, [0.0, 0.25, 0.75, 1.0])


def test_upsample_preserves_constants():
    out = ops.bilinear_upsample(np.full((1, 2, 3, 3), 0.7), 4).data
    assert out.shape == (1, 2, 12, 12) and np.allclose(out, 0.7)
