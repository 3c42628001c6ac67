from __future__ import annotations

import os

import numpy as np
import pytest

from config.settings import get_settings
from services.tensor_core import AngleTable, FreqSpec, angle_table_nd, positions_1d


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Each test sees built-in defaults, not the developer's ROME_* environment."""
    for key in list(os.environ):
        if key.startswith("ROME_"):
            monkeypatch.delenv(key)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def make_table():
    """AngleTable for positions 0..S-1 on every axis (or explicit per-axis grids)."""

    def _make(seq_len, mode, dims, dtype=np.float64, grids=None, base=10000.0):
        dims = tuple(dims)
        if grids is None:
            grids = [positions_1d(seq_len)] * len(dims)
        theta = angle_table_nd(grids, FreqSpec(dims, base))
        return AngleTable.build(theta, mode, dims, dtype)

    return _make
