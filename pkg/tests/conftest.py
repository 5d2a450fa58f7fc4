import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT))

from src.core.builders import build_bound1, build_bound2, build_rw1, build_rw2, build_torus1  # noqa: E402
from src.utils.config_loader import load_config  # noqa: E402


@pytest.fixture(scope="session")
def settings():
    return load_config()


@pytest.fixture(scope="session")
def stencil_dir():
    return ROOT / "config" / "stencils"


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture(scope="session")
def small_models():
    """Every built-in class at a size small enough for dense checks"""
    return [
        build_rw1(10),
        build_rw2(12),
        build_bound1(6, 6),
        build_bound2(7, 6),
        build_torus1(7, 7, null_dim=1),
    ]
