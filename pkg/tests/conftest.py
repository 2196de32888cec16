import math

import numpy as np
import pytest

from app.models.composite import CompositeSpace
from app.models.operators import HermitianOperator
from app.models.state import PureState
from app.services.composite import PAULI_X, PAULI_Y, PAULI_Z, entangled_state


@pytest.fixture
def sigma_x():
    return HermitianOperator(PAULI_X)


@pytest.fixture
def sigma_y():
    return HermitianOperator(PAULI_Y)


@pytest.fixture
def sigma_z():
    return HermitianOperator(PAULI_Z)


@pytest.fixture
def qubit_pair():
    """Two-qubit composite space with standard bases."""
    return CompositeSpace(2, 2)


@pytest.fixture
def singlet():
    """(e⁰⊗e¹ − e¹⊗e⁰)/√2"""
    return PureState(np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2))


@pytest.fixture
def three_term_state():
    """(e⁰⊗e⁰ + e⁰⊗e¹ + e¹⊗e⁰)/√3"""
    return PureState(np.array([1, 1, 1, 0], dtype=complex) / math.sqrt(3))


@pytest.fixture
def epr_state(qubit_pair):
    """Return a builder for c₁ e⁰⊗e¹ + c₂ e¹⊗e⁰ states."""

    def build(c1, c2, i=0, j=1):
        return entangled_state(c1, c2, i, j, qubit_pair)

    return build


@pytest.fixture
def rng():
    """Seeded generator for randomized property checks"""
    return np.random.default_rng(20240611)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """Point the default report directory at a temporary path"""
    from app.config import settings

    directory = tmp_path / "reports"
    monkeypatch.setattr(settings, "QMEAS_OUTPUT_DIR", str(directory))
    return directory
