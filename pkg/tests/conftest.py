from __future__ import annotations

import zlib

import numpy as np
import pytest

from dormrd.grid import Grid, State, constant_state
from dormrd.model import e1_params, e2_params


@pytest.fixture
def e1():
    return e1_params(0.5)


@pytest.fixture
def e2():
    return e2_params(0.5)


@pytest.fixture
def grid16():
    return Grid(dim=1, n=16, length=16.0)


@pytest.fixture
def grid64():
    return Grid(dim=1, n=64, length=16.0)


@pytest.fixture
def grid2d():
    return Grid(dim=2, n=16, length=8.0)


def flat(grid: Grid, u: float, v: float, w: float) -> State:
    return constant_state(grid, (u, v, w))


def rng_for(test_name: str, salt: int = 0) -> np.random.Generator:
    # stable per-test stream: the name keeps seeds from colliding across files
    return np.random.default_rng(zlib.crc32(test_name.encode()) + salt)
