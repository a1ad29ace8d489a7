"""Serialisation orders for an H x W patch grid.

Each strategy yields up to four traversal orders. Paths are grouped as two
families (A1, A2, B1, B2); asking for two paths returns the first member of
each family (A1, B1), so the structure-aware set reduces to one parallel
snake plus one diagonal snake.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PathError
from .tensor import Tensor, as_tensor, check_permutation, permute_rows


class Strategy(str, enum.Enum):
    PARALLEL = "parallel"
    DIAGONAL = "diagonal"
    PARALLEL_SNAKE = "parallel-snake"
    DIAGONAL_SNAKE = "diagonal-snake"
    BIDIRECTIONAL = "bidirectional"
    SASS = "sass"

    @classmethod
    def parse(cls, value: "str | Strategy") -> "Strategy":
        if isinstance(value, Strategy):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"diag": "diagonal", "raster": "parallel", "snake": "parallel-snake",
                   "diag-snake": "diagonal-snake", "bidir": "bidirectional"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(s.value for s in cls)
            raise ConfigError(f"unknown scan strategy {value!r}; expected one of: {names}") from None


DIRECTION_CODES = ("start", "up", "down", "left", "right", "diag_step")


@dataclass(frozen=True)
class ScanPath:
    order: tuple[int, ...]
    inverse: tuple[int, ...]
    directions: tuple[str, ...]
    height: int
    width: int
    kind: str = ""

    @property
    def length(self) -> int:
        return len(self.order)

    def cells(self) -> list[tuple[int, int]]:
        return [divmod(idx, self.width) for idx in self.order]

    def to_dict(self) -> dict:
        return {"order": list(self.order), "inverse": list(self.inverse), "directions": list(self.directions)}


@dataclass(frozen=True)
class ScanPathSet:
    strategy: Strategy
    height: int
    width: int
    paths: tuple[ScanPath, ...]

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def __getitem__(self, i: int) -> ScanPath:
        return self.paths[i]

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "H": self.height,
            "W": self.width,
            "paths": [p.to_dict() for p in self.paths],
        }


def _direction(prev: tuple[int, int], cur: tuple[int, int]) -> str:
    di, dj = cur[0] - prev[0], cur[1] - prev[1]
    if di == 0:
        return "right" if dj > 0 else "left"
    if dj == 0:
        return "down" if di > 0 else "up"
    return "diag_step"


def _make_path(cells: list[tuple[int, int]], h: int, w: int, kind: str) -> ScanPath:
    order = [i * w + j for i, j in cells]
    p = check_permutation(order, h * w)
    inverse = np.empty_like(p)
    inverse[p] = np.arange(p.size)
    directions = ["start"] + [_direction(cells[t - 1], cells[t]) for t in range(1, len(cells))]
    return ScanPath(tuple(order), tuple(int(v) for v in inverse), tuple(directions), h, w, kind)


# -- cell sequences ---------------------------------------------------------

def _rows(h: int, w: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(h) for j in range(w)]


def _cols(h: int, w: int) -> list[tuple[int, int]]:
    return [(i, j) for j in range(w) for i in range(h)]


def _vertical_snake(h: int, w: int) -> list[tuple[int, int]]:
    """Column 0 top to bottom, column 1 bottom to top, and so on."""
    cells = []
    for j in range(w):
        rows = range(h) if j % 2 == 0 else range(h - 1, -1, -1)
        cells.extend((i, j) for i in rows)
    return cells


def _horizontal_snake_from_bottom(h: int, w: int) -> list[tuple[int, int]]:
    """Bottom row first, moving upward; the start corner makes row 0 end at (0, 0)."""
    cells = []
    leftward = h % 2 == 1
    for i in range(h - 1, -1, -1):
        cols = range(w - 1, -1, -1) if leftward else range(w)
        cells.extend((i, j) for j in cols)
        leftward = not leftward
    return cells


def _diagonal(h: int, w: int, snake: bool) -> list[tuple[int, int]]:
    """Anti-diagonals i + j = d from the (0, 0) corner.

    Even diagonals run from the bottom-left end to the top-right end; odd
    diagonals reverse that when ``snake`` is set, otherwise keep it.
    """
    cells = []
    for d in range(h + w - 1):
        lo, hi = max(0, d - (w - 1)), min(d, h - 1)
        rows = range(hi, lo - 1, -1)
        if snake and d % 2 == 1:
            rows = range(lo, hi + 1)
        cells.extend((i, d - i) for i in rows)
    return cells


def _mirror(cells, w: int):
    return [(i, w - 1 - j) for i, j in cells]


def _flip(cells, h: int):
    return [(h - 1 - i, j) for i, j in cells]


def _families(strategy: Strategy, h: int, w: int) -> list[tuple[str, list[tuple[int, int]]]]:
    if strategy is Strategy.SASS:
        return [
            ("parallel-snake", _vertical_snake(h, w)),
            ("parallel-snake", _horizontal_snake_from_bottom(h, w)),
            ("diagonal-snake", _diagonal(h, w, snake=True)),
            ("diagonal-snake", _mirror(_diagonal(h, w, snake=True), w)),
        ]
    if strategy is Strategy.PARALLEL:
        return [
            ("parallel", _rows(h, w)),
            ("parallel", _mirror(_rows(h, w), w)),
            ("parallel", _cols(h, w)),
            ("parallel", _flip(_cols(h, w), h)),
        ]
    if strategy is Strategy.BIDIRECTIONAL:
        return [
            ("bidirectional", _rows(h, w)),
            ("bidirectional", _rows(h, w)[::-1]),
            ("bidirectional", _cols(h, w)),
            ("bidirectional", _cols(h, w)[::-1]),
        ]
    if strategy is Strategy.DIAGONAL:
        diag = _diagonal(h, w, snake=False)
        return [
            ("diagonal", diag),
            ("diagonal", diag[::-1]),
            ("diagonal", _mirror(diag, w)),
            ("diagonal", _mirror(diag, w)[::-1]),
        ]
    if strategy is Strategy.PARALLEL_SNAKE:
        horiz = [(i, j if i % 2 == 0 else w - 1 - j) for i in range(h) for j in range(w)]
        vert = _vertical_snake(h, w)
        return [
            ("parallel-snake", horiz),
            ("parallel-snake", horiz[::-1]),
            ("parallel-snake", vert),
            ("parallel-snake", vert[::-1]),
        ]
    if strategy is Strategy.DIAGONAL_SNAKE:
        diag = _diagonal(h, w, snake=True)
        return [
            ("diagonal-snake", diag),
            ("diagonal-snake", diag[::-1]),
            ("diagonal-snake", _mirror(diag, w)),
            ("diagonal-snake", _mirror(diag, w)[::-1]),
        ]
    raise ConfigError(f"unhandled strategy {strategy}")


@functools.lru_cache(maxsize=256)
def _generate_cached(strategy: Strategy, h: int, w: int, num_paths: int) -> ScanPathSet:
    fams = _families(strategy, h, w)
    if num_paths == 4:
        chosen = fams
    elif strategy is Strategy.BIDIRECTIONAL:
        # forward + backward raster
        chosen = fams[:2]
    else:
        chosen = [fams[0], fams[2]]
    paths = tuple(_make_path(cells, h, w, kind) for kind, cells in chosen)
    return ScanPathSet(strategy, h, w, paths)


def generate(strategy: "str | Strategy", height: int, width: int, num_paths: int = 4) -> ScanPathSet:
    """Build (and cache) the scan paths of ``strategy`` over a ``height x width`` grid."""
    strategy = Strategy.parse(strategy)
    if num_paths not in (2, 4):
        raise ConfigError(f"num_paths must be 2 or 4, got {num_paths}")
    if int(height) < 1 or int(width) < 1:
        raise ConfigError(f"grid must be at least 1x1, got {height}x{width}")
    return _generate_cached(strategy, int(height), int(width), int(num_paths))


def apply(path: ScanPath, seq, axis: int = 0) -> Tensor:
    """Serialise: row ``t`` of the result is row ``order[t]`` of ``seq``."""
    seq = as_tensor(seq)
    if seq.shape[axis] != path.length:
        raise PathError(f"sequence length {seq.shape[axis]} != grid size {path.height}x{path.width}")
    return permute_rows(seq, path.order, axis=axis)


def unapply(path: ScanPath, seq, axis: int = 0) -> Tensor:
    """Inverse of :func:`apply`."""
    seq = as_tensor(seq)
    if seq.shape[axis] != path.length:
        raise PathError(f"sequence length {seq.shape[axis]} != grid size {path.height}x{path.width}")
    return permute_rows(seq, path.inverse, axis=axis)
