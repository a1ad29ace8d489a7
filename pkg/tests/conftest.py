import numpy as np
import pytest

from crackseg.tensor import Tensor

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def numeric_grad_check(fn, arrays, rng, eps=1e-5, coords=None):
    """Worst relative error between backprop and central differences of ``sum(fn(*xs) * w)``.

    ``coords`` limits the check to that many random entries per input.
    """
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    out = fn(*tensors)
    weights = rng.normal(size=out.shape)
    (out * weights).sum().backward()

    def value(args):
        return float((fn(*[Tensor(a) for a in args]).data * weights).sum())

    worst = 0.0
    for pos, (t, a) in enumerate(zip(tensors, arrays)):
        if coords is None:
            idxs = list(np.ndindex(a.shape))
        else:
            flat = rng.choice(a.size, size=min(coords, a.size), replace=False)
            idxs = [np.unravel_index(f, a.shape) for f in flat]
        for idx in idxs:
            plus = [x.copy() for x in arrays]
            minus = [x.copy() for x in arrays]
            plus[pos][idx] += eps
            minus[pos][idx] -= eps
            num = (value(plus) - value(minus)) / (2 * eps)
            ana = t.grad[idx]
            scale = max(abs(num), abs(ana), 1e-6)
            worst = max(worst, abs(num - ana) / scale)
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str = ""):
        ACCEPTANCE[number] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
