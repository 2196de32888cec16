"""Quantum correlations, analytic CHSH values and estimators over sampled outcome pairs."""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.errors import DimensionMismatch, EmptySample
from app.models.chsh import CHSH_SIGNS, UNDEFINED_STDERR, ChshSetting, CorrelationEstimate
from app.models.operators import HermitianOperator
from app.models.state import PureState, QuantumState
from app.services.composite import PAULI_X, PAULI_Z
from app.services.measurement import simultaneous_distribution
from app.services.spectral import spectral_decompose, tensor_product

logger = logging.getLogger(__name__)


def spin_observable(theta: float) -> HermitianOperator:
    """cosθ·σ_z + sinθ·σ_x."""
    return HermitianOperator(math.cos(theta) * PAULI_Z + math.sin(theta) * PAULI_X)


def quantum_correlation(
    state: QuantumState, obs_a: HermitianOperator, obs_b: HermitianOperator
) -> float:
    """⟨A⊗B⟩ on a composite state."""
    joint = tensor_product(obs_a, obs_b)
    if state.dim != joint.dim:
        raise DimensionMismatch(
            f"State dim {state.dim} does not match {obs_a.dim} x {obs_b.dim}", module="chsh"
        )
    if isinstance(state, PureState):
        psi = state.vector
        return float(np.real(np.vdot(psi, joint.entries @ psi)))
    return float(np.real(np.trace(state.density_matrix() @ joint.entries)))


def chsh_value(state: QuantumState, setting: ChshSetting) -> float:
    """S = E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′), signed."""
    terms = [
        quantum_correlation(state, spin_observable(theta_a), spin_observable(theta_b))
        for theta_a, theta_b in setting.pairs()
    ]
    return float(sum(sign * term for sign, term in zip(CHSH_SIGNS, terms)))


def estimate_correlation(pairs) -> CorrelationEstimate:
    """Sample mean of x·y with its standard error (undefined for a single pair)."""
    data = np.asarray(pairs, dtype=float).reshape(-1, 2)
    n = data.shape[0]
    if n == 0:
        raise EmptySample("Cannot estimate a correlation from an empty sample")
    products = data[:, 0] * data[:, 1]
    value = float(products.mean())
    std_error = UNDEFINED_STDERR if n < 2 else float(products.std(ddof=1) / math.sqrt(n))
    return CorrelationEstimate(value=value, n_pairs=n, std_error=std_error)


def chsh_from_samples(
    pairs: Sequence, return_estimates: bool = False
):
    """
    CHSH value from four lists of (±1, ±1) outcome pairs.

    Args:
        pairs: Four samples in CHSH order (a,b), (a,b′), (a′,b), (a′,b′)
        return_estimates: Also return the per-setting CorrelationEstimates

    Returns:
        (S, std_error), or (S, std_error, estimates) when requested. The
        standard error propagates the per-setting errors and is NaN when any
        setting has a single pair.
    """
    if len(pairs) != 4:
        raise ValueError(f"Expected four samples, got {len(pairs)}")
    estimates = [estimate_correlation(sample) for sample in pairs]
    value = float(sum(sign * e.value for sign, e in zip(CHSH_SIGNS, estimates)))
    std_error = float(math.sqrt(sum(e.std_error**2 for e in estimates)))
    if return_estimates:
        return value, std_error, estimates
    return value, std_error


def sample_correlation_pairs(
    state: QuantumState,
    obs_a: HermitianOperator,
    obs_b: HermitianOperator,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Draw ``n`` outcome pairs from the simultaneous measurement of A⊗I and I⊗B.

    Returns:
        ``n × 2`` array of eigenvalue pairs
    """
    identity_a = HermitianOperator.identity(obs_a.dim)
    identity_b = HermitianOperator.identity(obs_b.dim)
    lifted_a = spectral_decompose(tensor_product(obs_a, identity_b))
    lifted_b = spectral_decompose(tensor_product(identity_a, obs_b))
    distribution = simultaneous_distribution(state, lifted_a, lifted_b)

    outcomes = np.array(list(distribution.keys()), dtype=float)
    probabilities = np.clip(np.array(list(distribution.values())), 0.0, None)
    draws = rng.choice(len(outcomes), size=n, p=probabilities / probabilities.sum())
    return outcomes[draws]


def correlation_table(
    state: QuantumState,
    setting: ChshSetting,
    n: int,
    rng: np.random.Generator,
    grid: Optional[int] = None,
) -> Tuple[List[Dict[str, float]], List[np.ndarray]]:
    """
    Per-angle analytic and sampled correlations.

    The four CHSH rows come first (in CHSH order), followed by an optional
    ``grid × grid`` scan of θ_a, θ_b over [0, π).

    Returns:
        Tuple of (rows for the CSV report, sampled pairs of the four CHSH rows)
    """
    angles: List[Tuple[float, float]] = list(setting.pairs())
    if grid:
        steps = np.arange(grid) * math.pi / grid
        angles.extend((float(ta), float(tb)) for ta in steps for tb in steps)

    rows, samples = [], []
    for index, (theta_a, theta_b) in enumerate(angles):
        obs_a, obs_b = spin_observable(theta_a), spin_observable(theta_b)
        sample = sample_correlation_pairs(state, obs_a, obs_b, n, rng)
        estimate = estimate_correlation(sample)
        rows.append(
            {
                "theta_a": theta_a,
                "theta_b": theta_b,
                "E_quantum": quantum_correlation(state, obs_a, obs_b),
                "E_sampled": estimate.value,
                "n": estimate.n_pairs,
                "stderr": estimate.std_error,
            }
        )
        if index < 4:
            samples.append(sample)
    logger.info(f"Computed {len(rows)} correlation rows with n={n} samples each")
    return rows, samples
