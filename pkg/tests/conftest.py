"""Shared fixtures for the rnd test suite."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from lib.kernels import KernelSpec, write_sample_csv  # noqa: E402
from lib.synth import default_pair, draw  # noqa: E402

REPO_ROOT = Path(__file__).parent.parent


@pytest.fixture
def gaussian():
    """Gaussian kernel, sigma = 1, d = 1."""
    return KernelSpec(family="gaussian", bandwidth=1.0, dim=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def pair():
    """p = N(0, 1), q = N(0, 0.64)."""
    return default_pair()


@pytest.fixture
def small_samples(pair):
    """N = M = 30 draws from the default pair."""
    return draw(pair, "p", 30, seed=1), draw(pair, "q", 30, seed=2)


@pytest.fixture
def sample_csvs(tmp_path, small_samples):
    """The small samples written to p.csv and q.csv."""
    xp, xq = small_samples
    p_csv, q_csv = tmp_path / "p.csv", tmp_path / "q.csv"
    write_sample_csv(p_csv, xp)
    write_sample_csv(q_csv, xq)
    return p_csv, q_csv


@pytest.fixture
def rnd_script():
    """Path to the rnd.py launcher."""
    return REPO_ROOT / "rnd.py"


@pytest.fixture
def python_exe():
    """Path to Python executable in venv."""
    venv_python = REPO_ROOT / ".venv" / "bin" / "python"
    if venv_python.exists():
        return str(venv_python)
    return sys.executable
