"""Composite systems, entangled states, lifted observables and the EPR postulate comparison."""

import logging
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.errors import (
    DegenerateLocalObservable,
    DimensionMismatch,
    EqualIndices,
    IndexOutOfRange,
    NonUnitDirection,
    NotNormalized,
    ZeroProbabilityBranch,
)
from app.models.composite import (
    CompositeSpace,
    EprScenarioReport,
    LudersBranch,
    VonNeumannBranch,
)
from app.models.operators import HermitianOperator, OrthonormalBasisFamily
from app.models.state import DensityOperator, PureState, QuantumState, Undetermined
from app.services.measurement import (
    build_refinement,
    luders_measure,
    sample_outcome,
    von_neumann_measure,
)
from app.services.spectral import (
    expectation,
    is_degenerate,
    spectral_decompose,
    tensor_product,
    variance,
)

logger = logging.getLogger(__name__)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

NORMALIZATION_TOL = 1e-10


def _check_normalized(weights: np.ndarray) -> None:
    total = float(np.sum(np.abs(weights) ** 2))
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"Squared coefficients sum to {total:.12f}, expected 1")


def entangled_state(
    c1: complex, c2: complex, i: int, j: int, space: CompositeSpace
) -> PureState:
    """ψ = c₁ e₁ⁱ⊗e₂ʲ + c₂ e₁ʲ⊗e₂ⁱ."""
    _check_normalized(np.array([c1, c2], dtype=complex))
    limit = min(space.dim1, space.dim2)
    for index in (i, j):
        if not 0 <= index < limit:
            raise IndexOutOfRange(f"Index {index} outside 0..{limit - 1}")
    if i == j:
        raise EqualIndices(f"Indices must differ, got i = j = {i}")
    psi = c1 * space.product_vector(i, j) + c2 * space.product_vector(j, i)
    return PureState(psi)


def schmidt_like_state(coeffs: Sequence[complex], space: CompositeSpace) -> PureState:
    """ψ = Σ_γ c_γ e₁^γ⊗e₂^γ."""
    weights = np.asarray(coeffs, dtype=complex)
    if len(weights) > min(space.dim1, space.dim2):
        raise IndexOutOfRange(
            f"{len(weights)} coefficients exceed min dim {min(space.dim1, space.dim2)}"
        )
    _check_normalized(weights)
    psi = sum(c * space.product_vector(g, g) for g, c in enumerate(weights))
    return PureState(psi)


def state_from_coefficients(coefficients, space: CompositeSpace) -> PureState:
    """ψ = Σ c_{αβ} e₁^α⊗e₂^β for a ``dim1 × dim2`` coefficient matrix."""
    matrix = np.asarray(coefficients, dtype=complex)
    if matrix.shape != (space.dim1, space.dim2):
        raise DimensionMismatch(
            f"Coefficient matrix must be {space.dim1}x{space.dim2}, got {matrix.shape}",
            module="composite",
        )
    _check_normalized(matrix.reshape(-1))
    psi = space.basis1 @ matrix @ space.basis2.T
    return PureState(psi.reshape(-1))


def partial_trace(state: QuantumState, space: CompositeSpace, keep: int) -> DensityOperator:
    """Reduced state of subsystem ``keep`` (1 or 2)."""
    if state.dim != space.total_dim:
        raise DimensionMismatch(
            f"State dim {state.dim} does not match {space}", module="composite"
        )
    rho = state.density_matrix().reshape(space.dim1, space.dim2, space.dim1, space.dim2)
    if keep == 1:
        return DensityOperator(np.einsum("ijkj->ik", rho))
    if keep == 2:
        return DensityOperator(np.einsum("ijil->jl", rho))
    raise ValueError(f"keep must be 1 or 2, got {keep}")


def is_product_state(state: QuantumState, space: CompositeSpace, tol: float = 1e-9) -> bool:
    """True when the state factorizes as ψ₁⊗ψ₂ (or ρ₁⊗ρ₂ for mixed input)."""
    if isinstance(state, PureState):
        if state.dim != space.total_dim:
            raise DimensionMismatch(
                f"State dim {state.dim} does not match {space}", module="composite"
            )
        singular = np.linalg.svd(state.vector.reshape(space.dim1, space.dim2), compute_uv=False)
        return bool(np.all(singular[1:] <= tol))
    rho1 = partial_trace(state, space, keep=1).matrix
    rho2 = partial_trace(state, space, keep=2).matrix
    return bool(np.max(np.abs(np.kron(rho1, rho2) - state.density_matrix())) <= tol)


def lift_observable(local: HermitianOperator, side: int, space: CompositeSpace) -> HermitianOperator:
    """Â₁ = â₁⊗I (side 1) or Â₂ = I⊗â₂ (side 2)."""
    if side == 1:
        if local.dim != space.dim1:
            raise DimensionMismatch(
                f"Side-1 observable has dim {local.dim}, space needs {space.dim1}",
                module="composite",
            )
        return tensor_product(local, HermitianOperator.identity(space.dim2))
    if side == 2:
        if local.dim != space.dim2:
            raise DimensionMismatch(
                f"Side-2 observable has dim {local.dim}, space needs {space.dim2}",
                module="composite",
            )
        return tensor_product(HermitianOperator.identity(space.dim1), local)
    raise ValueError(f"side must be 1 or 2, got {side}")


def local_spin_observable(direction: Sequence[float]) -> HermitianOperator:
    """n·σ for a unit vector n ∈ ℝ³."""
    n = np.asarray(direction, dtype=float)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > NORMALIZATION_TOL:
        raise NonUnitDirection(f"Spin direction must be a unit 3-vector, got {n.tolist()}")
    return HermitianOperator(n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z)


def _local_eigensystem(local: HermitianOperator) -> Tuple[np.ndarray, np.ndarray]:
    decomposition = spectral_decompose(local)
    if is_degenerate(decomposition):
        raise DegenerateLocalObservable(
            f"Local observable must have nondegenerate spectrum, got {decomposition}"
        )
    return np.linalg.eigh(local.entries)


def product_refinement(
    a1: HermitianOperator, a2: HermitianOperator, space: Optional[CompositeSpace] = None
) -> Tuple[OrthonormalBasisFamily, HermitianOperator]:
    """
    Canonical refinement of Â₁ = â₁⊗I by the product eigenbasis e₁^α⊗e₂^β.

    α and β index the local eigenvalues in ascending order; the label of
    e₁^α⊗e₂^β is α + N₁·β.

    Args:
        a1: Nondegenerate observable on H₁
        a2: Nondegenerate observable on H₂
        space: Composite space, built from the operator dims if omitted

    Returns:
        Tuple of (basis family grouped by eigenspaces of Â₁, refinement operator d̂)
    """
    space = space or CompositeSpace(a1.dim, a2.dim)
    _, vectors1 = _local_eigensystem(a1)
    _, vectors2 = _local_eigensystem(a2)
    n1, n2 = space.dim1, space.dim2

    groups, labels = [], []
    for alpha in range(n1):
        groups.append(
            np.column_stack([np.kron(vectors1[:, alpha], vectors2[:, beta]) for beta in range(n2)])
        )
        labels.append([float(alpha + n1 * beta) for beta in range(n2)])

    lifted = spectral_decompose(lift_observable(a1, 1, space))
    return build_refinement(lifted, per_eigenspace_bases=groups, labels=labels, name="product")


class SpinRefinement(NamedTuple):
    operator: HermitianOperator
    decode_first: Callable[[float], float]
    decode_second: Callable[[float], float]


def product_label_decoders(
    a1: HermitianOperator, a2: HermitianOperator
) -> Tuple[Callable[[float], float], Callable[[float], float]]:
    """f₁(λ) and f₂(λ) for labels λ = α + N₁·β."""
    values1, _ = _local_eigensystem(a1)
    values2, _ = _local_eigensystem(a2)
    n1 = a1.dim

    def decode_first(label: float) -> float:
        return float(values1[int(round(label)) % n1])

    def decode_second(label: float) -> float:
        return float(values2[int(round(label)) // n1])

    return decode_first, decode_second


def spin_refinement_example(
    x: Sequence[float] = (0.0, 0.0, 1.0), y: Sequence[float] = (0.0, 0.0, 1.0)
) -> SpinRefinement:
    """
    Refinement Â of two spin measurements along unit directions x and y.

    Â e₁^α⊗e₂^β = (α + 2β) e₁^α⊗e₂^β with α, β ∈ {0 (−), 1 (+)}, i.e.
    −− = 0, +− = 1, −+ = 2, ++ = 3.
    """
    a1 = local_spin_observable(x)
    a2 = local_spin_observable(y)
    _, operator = product_refinement(a1, a2, CompositeSpace(2, 2))
    decode_first, decode_second = product_label_decoders(a1, a2)
    return SpinRefinement(operator, decode_first, decode_second)


def _sharpness(state: QuantumState, remote: HermitianOperator) -> Tuple[float, float, bool]:
    value = expectation(state, remote)
    spread = variance(state, remote)
    return value, spread, spread < settings.QMEAS_SHARPNESS_TOL


def run_epr_scenario(
    state: QuantumState,
    a1: HermitianOperator,
    a2: HermitianOperator,
    outcome_index: int,
    refinement_outcome: Optional[int] = None,
) -> EprScenarioReport:
    """
    Measure Â₁ = â₁⊗I on a composite state under both postulates.

    Args:
        state: State on H₁⊗H₂
        a1: Nondegenerate local observable measured on subsystem 1
        a2: Nondegenerate local observable whose sharpness on subsystem 2 is checked
        outcome_index: Branch index of the Â₁ outcome
        refinement_outcome: Optional index, inside the measured eigenspace, of
            an observed outcome of the product refinement

    Returns:
        EprScenarioReport comparing the Lüders and von Neumann branches
    """
    space = CompositeSpace(a1.dim, a2.dim)
    if state.dim != space.total_dim:
        raise DimensionMismatch(
            f"State dim {state.dim} does not match {space}", module="composite"
        )
    lifted1 = spectral_decompose(lift_observable(a1, 1, space))
    lifted2 = lift_observable(a2, 2, space)
    family, _ = product_refinement(a1, a2, space)

    luders = luders_measure(state, lifted1, outcome_index)
    l_value, l_spread, l_sharp = _sharpness(luders.post_state, lifted2)
    luders_branch = LudersBranch(
        outcome=luders.outcome,
        probability=luders.probability,
        post_state=luders.post_state,
        purity=luders.purity(),
        is_product=is_product_state(luders.post_state, space),
        remote_value=l_value,
        remote_variance=l_spread,
        remote_reduced_state=partial_trace(luders.post_state, space, keep=2),
        element_of_reality_assigned=l_sharp,
    )

    record = von_neumann_measure(state, lifted1, family, outcome_index)
    if refinement_outcome is not None:
        group = family.groups[outcome_index]
        if not 0 <= refinement_outcome < group.shape[1]:
            raise IndexOutOfRange(
                f"Refinement outcome {refinement_outcome} outside 0..{group.shape[1] - 1}"
            )
        phi = group[:, refinement_outcome]
        overlap = float(np.real(np.vdot(phi, state.density_matrix() @ phi)))
        if overlap <= settings.QMEAS_PROB_FLOOR:
            raise ZeroProbabilityBranch(
                f"Refinement outcome {refinement_outcome} has probability {overlap:.3e}"
            )
        post_state = PureState(phi)
        mixture = post_state.as_density()
    else:
        post_state = record.post_state
        mixture = DensityOperator(record.resulting_density())

    determined = not isinstance(post_state, Undetermined)
    v_value, v_spread, v_sharp = _sharpness(mixture, lifted2)
    von_neumann_branch = VonNeumannBranch(
        outcome=record.outcome,
        probability=record.probability,
        determined=determined,
        post_state=post_state,
        conditional_mixture=mixture,
        purity=mixture.purity(),
        refinement_id=family.basis_id,
        refinement_outcome=refinement_outcome,
        remote_value=v_value,
        remote_variance=v_spread,
        remote_reduced_state=partial_trace(mixture, space, keep=2),
        element_of_reality_assigned=determined and v_sharp,
    )

    logger.info(
        f"EPR outcome {luders.outcome:+.6g} (p={luders.probability:.6f}): "
        f"Lüders sharp={l_sharp}, von Neumann determined={determined}"
    )
    return EprScenarioReport(
        outcome_index=outcome_index,
        multiplicity=record.multiplicity,
        luders_branch=luders_branch,
        von_neumann_branch=von_neumann_branch,
    )


def sample_epr_scenario(
    state: QuantumState,
    a1: HermitianOperator,
    a2: HermitianOperator,
    rng: np.random.Generator,
) -> EprScenarioReport:
    """Run the scenario on a Born-sampled Â₁ outcome."""
    space = CompositeSpace(a1.dim, a2.dim)
    lifted1 = spectral_decompose(lift_observable(a1, 1, space))
    return run_epr_scenario(state, a1, a2, sample_outcome(state, lifted1, rng))
