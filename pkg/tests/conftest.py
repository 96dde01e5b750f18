import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from lab_config import ALPHA_DEFAULT  # noqa: E402
from pipeline.br_hamiltonian import CouplingParams, SpectralResult  # noqa: E402
from pipeline.field_utils import SpinorField, gaussian_field  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def params():
    return CouplingParams(alpha=ALPHA_DEFAULT, z=2.0)


@pytest.fixture
def small_field(rng):
    data = rng.normal(size=(16, 16, 16, 4)) + 1j * rng.normal(size=(16, 16, 16, 4))
    return SpinorField(16, 10.0, data).normalized()


@pytest.fixture
def synthetic_ground():
    """Stand-in for a Z = 2 ground state: a normalized Gaussian on a small grid."""
    state = gaussian_field(16, 6.0, (0.0, 0.0, 0.0), 0.8, (1.0, 0.0, 0.0, 0.0)).normalized()
    return SpectralResult(
        e1=0.9999,
        eigenvalues=(0.9999,),
        residual=0.0,
        iters=0,
        grid_n=16,
        box_l=6.0,
        alpha=ALPHA_DEFAULT,
        z=2.0,
        state=state,
    )
