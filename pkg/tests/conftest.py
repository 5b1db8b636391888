"""
Pytest configuration and fixtures for globalctl tests.
"""

import shutil
import uuid
from pathlib import Path

import numpy as np
import pytest

from globalctl.chain_state import init
from globalctl.constants import PATTERN_SINGLE_CU, PATTERN_TRIPLE_CU
from globalctl.layout import build_layout
from globalctl.unitary import random_unitary


@pytest.fixture
def tmp_path(request):
    """
    Custom tmp_path fixture that uses workspace directory to avoid permission issues.
    """
    workspace_root = Path(__file__).parent.parent
    test_tmp_dir = workspace_root / ".test_tmp"
    test_tmp_dir.mkdir(exist_ok=True)

    test_dir = test_tmp_dir / f"test_{uuid.uuid4().hex[:8]}"
    test_dir.mkdir(exist_ok=True)

    yield test_dir

    try:
        shutil.rmtree(test_dir, ignore_errors=True)
    except Exception:
        pass


@pytest.fixture
def rng():
    """Seeded generator shared by a single test."""
    return np.random.default_rng(1234)


@pytest.fixture
def two_unit_layout():
    """n = 12 chain, two computational units, no stations."""
    return build_layout({"n_comp": 2})


@pytest.fixture
def four_unit_layout():
    """n = 24 chain, four computational units, no stations."""
    return build_layout({"n_comp": 4})


@pytest.fixture
def triple_layout():
    """Triple-CU layout with seven workspace units and three payload units."""
    return build_layout({"n_comp": 10, "margins": 7, "triple_cu": True})


@pytest.fixture
def station_layout():
    """Two blocks of two computational units behind single-bit stations."""
    return build_layout({"n_comp": 4, "L": 2, "ss_width": 1})


@pytest.fixture
def hierarchy_layout():
    """Four stations, L = 2, depth 2, canonical labels."""
    return build_layout({"n_comp": 8, "L": 2, "concat_depth": 2, "ss_width": 2})


def prepare_payload(state, cells, rng):
    """Apply an independent random unitary to each cell."""
    for cell in cells:
        state.apply_unitary1(cell, random_unitary(rng))
    return state


@pytest.fixture
def single_cu_state(four_unit_layout, rng):
    """Single-CU chain with a random product payload on every unit."""
    state = init(four_unit_layout, PATTERN_SINGLE_CU)
    cells = [four_unit_layout.comp_index(q) for q in range(four_unit_layout.n_comp)]
    return prepare_payload(state, cells, rng)


@pytest.fixture
def triple_state(triple_layout):
    """Triple-CU chain with clean workspace."""
    return init(triple_layout, PATTERN_TRIPLE_CU)
