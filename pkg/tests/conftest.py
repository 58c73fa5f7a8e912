import numpy as np
import pytest

from concavelift import generate as gen
from concavelift.operators import operator
from concavelift.spaces import space

NILPOTENT = np.array([[0, 0.5], [0, 0]], dtype=complex)


def nilpotent_core():
    return operator(NILPOTENT, space(("core", 2)))


def positive_instance(seed, depth=16, dim=None):
    rng = np.random.default_rng(seed)
    d = dim or int(rng.integers(1, 4))
    t_hat = gen.random_normal(rng, d, 0.9)
    gamma = 1.0 + rng.uniform(0.1, 1.0)
    return gen.gen_regular_concave_scalar(t_hat, gamma, depth)


def negative_instance(depth=16, gamma=1.2):
    return gen.gen_regular_concave_scalar(NILPOTENT, gamma, depth)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def brownian():
    return gen.gen_brownian_shift(2.0, 16)


@pytest.fixture
def positive():
    return positive_instance(7)


@pytest.fixture
def negative():
    return negative_instance()


# criterion id -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {key}: {detail}")
