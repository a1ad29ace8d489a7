import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crackseg import scan_paths
from crackseg.errors import ConfigError, PathError
from crackseg.scan_paths import Strategy, apply, generate, unapply
from crackseg.tensor import Tensor

ALL = [s.value for s in Strategy]
SNAKES = ("parallel-snake", "diagonal-snake", "sass")


def chebyshev_steps(path):
    cells = path.cells()
    return [max(abs(a[0] - b[0]), abs(a[1] - b[1])) for a, b in zip(cells, cells[1:])]


def test_sass_2x2_trace():
    ps = generate("sass", 2, 2)
    assert [list(p.order) for p in ps] == [[0, 2, 3, 1], [2, 3, 1, 0], [0, 1, 2, 3], [1, 0, 3, 2]]
    assert [p.kind for p in ps] == ["parallel-snake"] * 2 + ["diagonal-snake"] * 2


def test_sass_first_path_is_vertical_snake():
    p = generate("sass", 3, 4)[0]
    assert p.cells()[:4] == [(0, 0), (1, 0), (2, 0), (2, 1)]


def test_second_sass_path_starts_bottom_row():
    assert generate("sass", 3, 3)[1].cells()[0] == (2, 2)
    assert generate("sass", 4, 3)[1].cells()[0] == (3, 0)


def test_single_cell():
    for s in ALL:
        for p in generate(s, 1, 1):
            assert p.order == (0,) and p.inverse == (0,)
            assert p.directions == ("start",)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(ALL), st.integers(1, 12), st.integers(1, 12), st.sampled_from([2, 4]))
def test_bijective_with_inverse(strategy, h, w, n):
    ps = generate(strategy, h, w, n)
    assert len(ps) == n
    for p in ps:
        assert sorted(p.order) == list(range(h * w))
        order = np.array(p.order)
        assert (np.array(p.inverse)[order] == np.arange(h * w)).all()
        assert len(p.directions) == h * w and p.directions[0] == "start"


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(SNAKES), st.integers(1, 12), st.integers(1, 12))
def test_snakes_are_continuous(strategy, h, w):
    for p in generate(strategy, h, w):
        assert all(s == 1 for s in chebyshev_steps(p))


def test_parallel_snake_never_moves_diagonally():
    for p in generate("parallel-snake", 5, 7):
        assert "diag_step" not in p.directions


def test_direction_codes_match_displacements():
    p = generate("sass", 2, 2)[0]
    assert p.directions == ("start", "down", "right", "up")
    assert set(generate("sass", 4, 4)[2].directions) <= set(scan_paths.DIRECTION_CODES)


def test_two_path_mode():
    two = generate("sass", 4, 5, 2)
    four = generate("sass", 4, 5, 4)
    assert [p.order for p in two] == [four[0].order, four[2].order]
    assert [p.kind for p in two] == ["parallel-snake", "diagonal-snake"]


def test_apply_unapply_roundtrip(rng):
    p = generate("diagonal-snake", 3, 5)[3]
    seq = rng.normal(size=(2, 15, 4))
    out = apply(p, seq, axis=1)
    assert np.array_equal(out.data[:, 0], seq[:, p.order[0]])
    assert np.array_equal(unapply(p, out, axis=1).data, seq)


def test_apply_is_differentiable(rng):
    p = generate("sass", 3, 3)[1]
    x = Tensor(rng.normal(size=(9, 2)), requires_grad=True)
    w = rng.normal(size=(9, 2))
    (apply(p, x) * w).sum().backward()
    assert np.array_equal(x.grad, unapply(p, w).data)


def test_length_mismatch():
    with pytest.raises(PathError):
        apply(generate("sass", 2, 2)[0], np.zeros((5, 1)))


def test_bad_arguments():
    with pytest.raises(ConfigError):
        generate("zigzag", 2, 2)
    with pytest.raises(ConfigError):
        generate("sass", 2, 2, 3)
    with pytest.raises(ConfigError):
        generate("sass", 0, 2)


def test_aliases():
    assert Strategy.parse("diag") is Strategy.DIAGONAL
    assert Strategy.parse("Parallel_Snake") is Strategy.PARALLEL_SNAKE


def test_json_shape():
    d = json.loads(json.dumps(generate("parallel", 2, 3).to_dict()))
    assert d["strategy"] == "parallel" and d["H"] == 2 and d["W"] == 3
    assert set(d["paths"][0]) == {"order", "inverse", "directions"}


def test_generation_is_cached():
    assert generate("sass", 6, 6) is generate("sass", 6, 6)
