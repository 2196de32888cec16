"""Spectral decomposition, tensor products and functional calculus for small Hilbert spaces."""

import logging
from typing import Callable, List, Optional

import numpy as np

from app.config import settings
from app.errors import DimensionMismatch, ToleranceCollapse
from app.models.operators import HermitianOperator, SpectralBranch, SpectralDecomposition
from app.models.state import PureState, QuantumState

logger = logging.getLogger(__name__)


def default_eig_tol(op: HermitianOperator) -> float:
    """Relative grouping tolerance: QMEAS_EIG_REL_TOL × spectral radius."""
    radius = op.spectral_radius()
    if radius == 0.0:
        return settings.QMEAS_EIG_REL_TOL
    return settings.QMEAS_EIG_REL_TOL * radius


def spectral_decompose(
    op: HermitianOperator, eig_tol: Optional[float] = None
) -> SpectralDecomposition:
    """
    Decompose a Hermitian operator into eigenvalue/projector branches.

    Neighbouring eigenvalues closer than ``eig_tol`` are merged into one
    degenerate branch whose eigenvalue is the group mean.

    Args:
        op: Operator to decompose
        eig_tol: Grouping tolerance. Defaults to the relative tolerance of
            :func:`default_eig_tol`.

    Returns:
        SpectralDecomposition with eigenvalues ascending

    Raises:
        ToleranceCollapse: If merging makes the reconstruction miss the operator.
    """
    if eig_tol is None:
        eig_tol = default_eig_tol(op)
    if eig_tol <= 0:
        raise ValueError(f"eig_tol must be positive, got {eig_tol}")

    values, vectors = np.linalg.eigh(op.entries)

    groups: List[List[int]] = [[0]]
    for index in range(1, len(values)):
        if values[index] - values[index - 1] < eig_tol:
            groups[-1].append(index)
        else:
            groups.append([index])

    branches = []
    for group in groups:
        basis = vectors[:, group]
        projector = basis @ basis.conj().T
        branches.append(
            SpectralBranch(float(np.mean(values[group])), projector, len(group))
        )

    decomposition = SpectralDecomposition(branches, op.dim, eig_tol)

    error = float(np.max(np.abs(decomposition.reconstruct() - op.entries)))
    scale = max(1.0, float(np.max(np.abs(values))))
    if error > 10 * eig_tol + 1e-12 * scale:
        raise ToleranceCollapse(
            f"Reconstruction error {error:.3e} exceeds 10 x eig_tol ({eig_tol:.3e}); "
            f"{len(values)} eigenvalues merged into {len(groups)} branches"
        )

    logger.debug(f"Decomposed dim={op.dim} operator into {decomposition}")
    return decomposition


def tensor_product(a: HermitianOperator, b: HermitianOperator) -> HermitianOperator:
    """Kronecker product a ⊗ b."""
    return HermitianOperator(np.kron(a.entries, b.entries))


def operator_function(
    d: SpectralDecomposition, f: Callable[[float], float]
) -> HermitianOperator:
    """Functional calculus: Σ f(αₘ) Pₘ."""
    total = np.zeros((d.source_dim, d.source_dim), dtype=complex)
    for branch in d.branches:
        total += float(f(branch.eigenvalue)) * branch.projector
    return HermitianOperator(total)


def commutator_norm(a: HermitianOperator, b: HermitianOperator) -> float:
    """Max-norm of ab − ba."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"Cannot commute operators of dims {a.dim} and {b.dim}")
    commutator = a.entries @ b.entries - b.entries @ a.entries
    return float(np.max(np.abs(commutator)))


def commutes(
    a: HermitianOperator, b: HermitianOperator, tol: Optional[float] = None
) -> bool:
    tol = settings.QMEAS_COMMUTE_TOL if tol is None else tol
    return commutator_norm(a, b) <= tol


def is_degenerate(d: SpectralDecomposition) -> bool:
    return any(branch.multiplicity > 1 for branch in d.branches)


def as_operator(obs) -> HermitianOperator:
    """Accept either an operator or its decomposition."""
    if isinstance(obs, SpectralDecomposition):
        return HermitianOperator(obs.reconstruct())
    return obs


def expectation(state: QuantumState, op: HermitianOperator) -> float:
    """⟨ψ, Aψ⟩ or Tr(ρA)."""
    op = as_operator(op)
    if state.dim != op.dim:
        raise DimensionMismatch(f"State dim {state.dim} does not match operator dim {op.dim}")
    if isinstance(state, PureState):
        psi = state.vector
        return float(np.real(np.vdot(psi, op.entries @ psi)))
    return float(np.real(np.trace(state.density_matrix() @ op.entries)))


def variance(state: QuantumState, op: HermitianOperator) -> float:
    """⟨A²⟩ − ⟨A⟩², clipped at zero."""
    op = as_operator(op)
    mean = expectation(state, op)
    square = HermitianOperator(op.entries @ op.entries)
    return max(0.0, expectation(state, square) - mean**2)
