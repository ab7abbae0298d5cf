import numpy as np
import pytest

from hmgan.layers import LayerSpec, LayerStack, init_params
from hmgan.rng import rng_stream


def linear_stack(*mats, act="none"):
    """Bias-free stack of the given (n_in, n_out) weight matrices."""
    mats = [np.asarray(m, dtype=np.float64) for m in mats]
    specs = [LayerSpec(m.shape[0], m.shape[1], act) for m in mats]
    return LayerStack(specs, mats)


def random_stack(rng, widths, act="tanh", last="tanh"):
    specs = [LayerSpec(a, b, act) for a, b in zip(widths[:-2], widths[1:-1])]
    specs.append(LayerSpec(widths[-2], widths[-1], last))
    stack = init_params(LayerStack(specs), rng)
    for b in stack.biases:
        b[...] = rng.normal(scale=0.1, size=b.shape)
    return stack


@pytest.fixture
def rng():
    return rng_stream(12345, 0)


ACCEPTANCE = {}


def record(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
