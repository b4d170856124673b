import functools
import math

import numpy as np
import pytest

from fraceig.analysis import sweep_s
from fraceig.basis import BoxDomain, enumerate_modes
from fraceig.cli import preset_weight
from fraceig.environment import assemble_weight_matrix

SQUARE = BoxDomain((math.pi, math.pi))

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = {}


@functools.lru_cache(maxsize=None)
def preset_system(name, cutoff):
    return assemble_weight_matrix(preset_weight(name), enumerate_modes(SQUARE, cutoff))


@functools.lru_cache(maxsize=None)
def preset_sweep(name, cutoff=32):
    return sweep_s(preset_system(name, cutoff), 1.0)


@pytest.fixture
def square():
    return SQUARE


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
