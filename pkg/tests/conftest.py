import functools
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from parabolic_ssc import testbeds  # noqa: E402
from parabolic_ssc.optimizer import solve_ocp  # noqa: E402


@functools.lru_cache(maxsize=None)
def solved(name: str):
    """Testbed and its KKT triplet, solved once per session."""
    tb = testbeds.REGISTRY[name]()
    return tb, solve_ocp(tb.spec, tb.grid, tb.opts)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
