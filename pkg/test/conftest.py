"""Shared fixtures of the test suite."""
from pathlib import Path

import pytest

from cable_sim2real.model import CableModel, default_bench_model, identification_subchain, with_pitch_parameters
from cable_sim2real.validation import two_link_model

INTEGRATION_DIR = Path(__file__).parent / 'integration_test'


@pytest.fixture
def bench_model() -> CableModel:
    return default_bench_model()


@pytest.fixture
def chain() -> CableModel:
    """The four joint identification chain with stiffness 0.5 and damping 0.1 on every joint."""
    return with_pitch_parameters(identification_subchain(default_bench_model()), [0.5] * 4, [0.1] * 4)


@pytest.fixture
def two_link() -> CableModel:
    return two_link_model()


@pytest.fixture
def integration_dir() -> Path:
    return INTEGRATION_DIR
