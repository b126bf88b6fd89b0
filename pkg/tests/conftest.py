import sys

import numpy as np
import pytest

from jointcs.core import ProblemDims
from jointcs.generation import Seed, draw_instance


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def instance():
    """A small well-posed instance: N=30, M=15, L=3, K=4, type II."""
    dims = ProblemDims(30, 15, 3, 4)
    x, phis, ys = draw_instance(dims, 2, Seed(11))
    return dims, x, phis, ys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
