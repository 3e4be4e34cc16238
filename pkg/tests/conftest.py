"""
Pytest configuration and shared fixtures for hodg testing
"""

import pytest
import tempfile
import shutil
from pathlib import Path
import os
import sys

import numpy as np

# Add the project root to the path so we can import hodg modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from hodg.meshfield import build_mesh, build_mesh_2d
from hodg.models import StudyConfig
from hodg.problems import get_problem


@pytest.fixture
def temp_output_dir():
    """Create a temporary directory for result files"""
    temp_dir = tempfile.mkdtemp()
    yield Path(temp_dir)
    shutil.rmtree(temp_dir)


@pytest.fixture
def rng():
    """Seeded random generator"""
    return np.random.default_rng(1234)


@pytest.fixture
def uniform_mesh():
    """Uniform 10-cell periodic mesh on [0, 2pi]"""
    return build_mesh(10)


@pytest.fixture
def perturbed_mesh():
    """12-cell mesh with jittered interior boundaries"""
    return build_mesh(12, perturbation=0.2, seed=7)


@pytest.fixture
def square_mesh():
    """4 x 4 periodic Cartesian mesh"""
    return build_mesh_2d(4)


@pytest.fixture
def fourth_order_problem():
    """u_t + u_xxxx = 0 with u = exp(-t) sin(x)"""
    return get_problem("ex7.1")


@pytest.fixture
def fifth_order_problem():
    """u_t + u_xxxxx = 0 with u = sin(x - t)"""
    return get_problem("ex7.2")


@pytest.fixture
def quick_config():
    """Small, fast convergence study"""
    return StudyConfig(problem="ex7.1", k=1, meshes=[8, 16], t_final=0.05, dt=0.01)


@pytest.fixture
def cli_runner():
    """Create a CLI test runner"""
    from click.testing import CliRunner
    return CliRunner()


@pytest.fixture
def clean_env():
    """Remove hodg environment variables for the duration of a test"""
    names = ["HODG_CONFIG", "HODG_OUTPUT_DIR", "HODG_LOG_LEVEL"]
    saved = {name: os.environ.pop(name) for name in names if name in os.environ}
    yield
    for name in names:
        os.environ.pop(name, None)
    os.environ.update(saved)


# Test markers
def pytest_configure(config):
    """Configure pytest markers"""
    config.addinivalue_line("markers", "unit: Unit tests for the numerical modules")
    config.addinivalue_line("markers", "integration: Integration tests for the CLI and full solves")
    config.addinivalue_line("markers", "slow: Convergence-table reproductions that take minutes")
