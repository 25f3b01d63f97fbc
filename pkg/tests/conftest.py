"""Pytest configuration and fixtures."""

import pytest
from pathlib import Path
import tempfile
import shutil

import numpy as np

from roughdev.core import DevlabConfig


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test artifacts."""
    dirpath = tempfile.mkdtemp()
    yield Path(dirpath)
    shutil.rmtree(dirpath, ignore_errors=True)


@pytest.fixture
def rng():
    """Seeded generator for test data (never for the library's own draws)."""
    return np.random.default_rng(20240601)


@pytest.fixture
def small_config(temp_dir):
    """Additive single-scale scenario on a short grid."""
    return DevlabConfig(
        seed=11,
        output_dir=str(temp_dir / "runs"),
        gaussian={"hurst": 0.3, "n_steps": 32},
        single_scale={
            "drift": {"kind": "constant", "params": {"value": 0.0}},
            "sigma": {"kind": "constant", "params": {"value": 1.0}},
            "x0": [0.0],
        },
        deviation={
            "h_mode": "ldp",
            "eps_schedule": [0.5, 0.25, 0.125],
            "event": {"kind": "terminal", "component": 0, "threshold": 1.0},
        },
        optimizer={"n_cells": 8},
        monte_carlo={"n_runs": 1000, "chunk_size": 128},
    )


@pytest.fixture
def slow_fast_config(temp_dir):
    """Slow-fast scenario with an OU fast variable and a short horizon."""
    return DevlabConfig(
        seed=5,
        output_dir=str(temp_dir / "runs"),
        gaussian={"hurst": 0.3, "n_steps": 32},
        slow_fast={
            "eps": 0.1,
            "delta": 0.01,
            "f": {"kind": "linear", "params": {"matrix": [[-1.0, 1.0]]}},
            "sigma": {"kind": "constant", "params": {"value": 0.5}},
            "F": {"kind": "ou", "params": {"rate": 1.0}},
            "G": {"kind": "constant", "params": {"value": 1.0}},
            "x0": [0.5],
            "y0": [0.0],
            "fast_dt_factor": 10.0,
            "macro_substeps": 4,
            "ergodic_horizon": 40.0,
            "ergodic_burn_in": 2.0,
            "ergodic_dt": 0.02,
        },
        deviation={"problem": "slow-fast", "h_mode": "ldp"},
        optimizer={"n_cells": 4},
        monte_carlo={"n_runs": 1000, "chunk_size": 64},
    )
