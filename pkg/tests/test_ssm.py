import math

import numpy as np
import pytest

from crackseg.errors import ConfigError, NumericalError, ShapeError
from crackseg.scan_paths import generate
from crackseg.ssm import SsmParams, discretize, selective_scan, ss2d, ssm_recurrence, zoh_coefficient
from crackseg.tensor import Tensor, softplus

from conftest import numeric_grad_check


def naive_scan(seq, params):
    """Scalar loop over the discretised recurrence."""
    p = -np.exp(params.log_neg_p.data)
    wd, bd = params.delta_proj.weight.data, params.delta_proj.bias.data
    wq, wr = params.q_proj.weight.data, params.r_proj.weight.data
    skip = params.skip.data
    length, d_dim = seq.shape
    g_dim = p.shape[0]
    z = [[0.0] * d_dim for _ in range(g_dim)]
    out = np.zeros((length, d_dim))
    for k in range(length):
        w = seq[k]
        q = [sum(w[c] * wq[c, g] for c in range(d_dim)) for g in range(g_dim)]
        r = [sum(w[c] * wr[c, g] for c in range(d_dim)) for g in range(g_dim)]
        for d in range(d_dim):
            pre = sum(w[c] * wd[c, d] for c in range(d_dim)) + bd[d]
            delta = math.log1p(math.exp(-abs(pre))) + max(pre, 0.0)
            acc = 0.0
            for g in range(g_dim):
                pbar = math.exp(delta * p[g, d])
                qbar = (pbar - 1.0) / p[g, d] * q[g]
                z[g][d] = pbar * z[g][d] + qbar * w[d]
                acc += r[g] * z[g][d]
            out[k, d] = acc + skip[d] * w[d]
    return out


def random_params(rng, d, g):
    params = SsmParams(d, g, rng)
    params.log_neg_p.data = rng.normal(scale=0.7, size=(g, d))
    params.skip.data = rng.normal(size=d)
    params.delta_proj.weight.data = rng.normal(scale=0.5, size=(d, d))
    params.delta_proj.bias.data = rng.normal(size=d)
    return params


def test_scan_matches_naive_loop_small(rng):
    for _ in range(10):
        length, g, d = rng.integers(1, 12), rng.integers(1, 5), rng.integers(1, 5)
        params = random_params(rng, d, g)
        seq = rng.normal(size=(length, d))
        assert np.max(np.abs(selective_scan(seq, params).data - naive_scan(seq, params))) <= 1e-10


def test_batched_scan_equals_per_sample(rng):
    params = random_params(rng, 3, 4)
    seq = rng.normal(size=(3, 7, 3))
    batched = selective_scan(seq, params).data
    for i in range(3):
        assert np.allclose(batched[i], selective_scan(seq[i], params).data, atol=1e-14)


def test_causality(rng):
    params = random_params(rng, 3, 2)
    seq = rng.normal(size=(9, 3))
    changed = seq.copy()
    changed[5:] += 1.0
    a, b = selective_scan(seq, params).data, selective_scan(changed, params).data
    assert np.array_equal(a[:5], b[:5])


def test_zoh_small_step_limit(rng):
    p = -np.abs(rng.normal(size=(3, 4))) - 0.1
    delta = np.full((5, 4), 1e-8)
    q = rng.normal(size=(5, 3))
    pbar, qbar = discretize(p, delta, q)
    ref = delta[:, None, :] * q[:, :, None]
    assert np.all(np.abs(qbar - ref) <= 1e-6 * np.abs(ref))
    assert np.all(pbar <= 1.0)


def test_zoh_coefficient_is_continuous_at_cutoff():
    p = np.array(-1.0)
    below = zoh_coefficient(np.array(0.999e-6), p)
    above = zoh_coefficient(np.array(1.001e-6), p)
    assert abs(above - below) / below < 3e-3


def test_decay_is_negative_and_init_is_s4d_real(rng):
    params = SsmParams(5, 3, rng)
    assert np.allclose(params.decay().data, -np.arange(1, 4)[:, None] * np.ones((1, 5)))
    dt = softplus(Tensor(params.delta_proj.bias.data)).data
    assert np.all((dt >= 1e-3 - 1e-12) & (dt <= 1e-1 + 1e-12))


def test_nonpositive_step_rejected(rng):
    with pytest.raises(NumericalError):
        discretize(-np.ones((2, 2)), np.zeros((3, 2)), np.ones((3, 2)))


def test_shape_errors(rng):
    params = SsmParams(4, 2, rng)
    with pytest.raises(ShapeError):
        selective_scan(np.zeros((5, 3)), params)
    with pytest.raises(ShapeError):
        discretize(-np.ones((2, 3)), np.ones((4, 2)), np.ones((4, 2)))


def test_recurrence_gradient(rng):
    n, length, d, g = 2, 5, 3, 4

    def fn(dl, p, q, r, w):
        return ssm_recurrence(softplus(dl), p, q, r, w)

    arrays = [rng.normal(size=(n, length, d)), -np.abs(rng.normal(size=(g, d))) - 0.1,
              rng.normal(size=(n, length, g)), rng.normal(size=(n, length, g)), rng.normal(size=(n, length, d))]
    assert numeric_grad_check(fn, arrays, rng) < 1e-4


def test_recurrence_gradient_through_series_branch(rng):
    def fn(dl, p, w):
        q = Tensor(np.ones((1, 4, 2)))
        return ssm_recurrence(dl * 1e-7 + 1e-9, p, q, q, w)

    arrays = [rng.uniform(0.5, 1.5, size=(1, 4, 3)), -rng.uniform(0.5, 2, size=(2, 3)), rng.normal(size=(1, 4, 3))]
    assert numeric_grad_check(fn, arrays, rng, eps=1e-4) < 1e-4


def test_ss2d_averages_paths(rng):
    paths = generate("sass", 3, 2)
    params = [random_params(rng, 2, 2) for _ in range(4)]
    seq = rng.normal(size=(6, 2))
    expected = np.zeros((6, 2))
    for path, prm in zip(paths, params):
        out = naive_scan(seq[list(path.order)], prm)
        expected[list(path.order)] += out
    assert np.allclose(ss2d(seq, paths, params).data, expected / 4, atol=1e-12)


def test_ss2d_param_count_mismatch(rng):
    with pytest.raises(ConfigError):
        ss2d(np.zeros((4, 2)), generate("sass", 2, 2), [SsmParams(2, 2, rng)])
