"""Shared fixtures: the committed golden trajectory and cheap parameter sets."""

import os
import sys
from pathlib import Path

# Keep BLAS single-threaded for reproducible timings unless overridden.
os.environ.setdefault("OMP_NUM_THREADS", os.environ.get("TUBEFLOW_THREADS", "1"))
os.environ.setdefault("OPENBLAS_NUM_THREADS", os.environ.get("TUBEFLOW_THREADS", "1"))
os.environ.setdefault("MKL_NUM_THREADS", os.environ.get("TUBEFLOW_THREADS", "1"))

import pytest

from tubeflow.domain import FluidParams, TubeParams, build_grid, read_trajectory

REPO_ROOT = Path(__file__).resolve().parent.parent
GOLDEN_PATH = REPO_ROOT / "data" / "golden.csv"


@pytest.fixture(scope="session")
def golden():
    """The committed 200-step default-benchmark trajectory."""
    return read_trajectory(GOLDEN_PATH)


@pytest.fixture(scope="session")
def default_grid():
    return build_grid(0.05, 100)


@pytest.fixture(scope="session")
def tube_params():
    return TubeParams()


@pytest.fixture(scope="session")
def fluid_params():
    return FluidParams()
