"""Seed splitting for reproducible simulations and random fixtures for property checks.

Every random stream is derived from ``SeedSequence([master_seed, stream, index])``:

    stream 0 -- source (hidden angles, emission jitter), index 0
    stream 1 -- side A detection, index = setting index (a -> 0, a' -> 1)
    stream 2 -- side B detection, index = setting index (b -> 0, b' -> 1)
    stream 3 -- sampled quantum correlations, index = row index

A side's stream therefore never depends on the other side's setting, and the
result for a (seed, setting) pair does not depend on scheduling.
"""

from typing import Optional

import numpy as np
from scipy.stats import unitary_group

SOURCE_STREAM = 0
SIDE_A_STREAM = 1
SIDE_B_STREAM = 2
SAMPLING_STREAM = 3


def spawn_generator(master_seed: int, stream: int = 0, index: int = 0) -> np.random.Generator:
    """Independent generator for one (master_seed, stream, index) key."""
    if master_seed < 0:
        raise ValueError(f"Seed must be non-negative, got {master_seed}")
    return np.random.default_rng(np.random.SeedSequence([master_seed, stream, index]))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary matrix."""
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1), dtype=complex)
    return unitary_group.rvs(dim, random_state=rng)


def random_hermitian(
    dim: int,
    rng: np.random.Generator,
    eigenvalues: Optional[np.ndarray] = None,
    min_gap: float = 0.05,
) -> np.ndarray:
    """Random Hermitian matrix; eigenvalues drawn distinct (gap ≥ min_gap) unless given."""
    if eigenvalues is None:
        eigenvalues = np.cumsum(min_gap + rng.random(dim)) - dim / 2
    u = random_unitary(dim, rng)
    matrix = (u * np.asarray(eigenvalues, dtype=float)) @ u.conj().T
    return 0.5 * (matrix + matrix.conj().T)


def random_pure_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    vector = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return vector / np.linalg.norm(vector)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    rank = dim if rank is None else rank
    ginibre = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = ginibre @ ginibre.conj().T
    return rho / np.real(np.trace(rho))
