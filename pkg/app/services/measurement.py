"""Born rule, Lüders and von Neumann projection postulates, joint and conditional probabilities."""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.errors import (
    DimensionMismatch,
    DuplicateLabels,
    IncompleteBasis,
    NonCommutingObservables,
    RefinementMismatch,
    ZeroProbabilityBranch,
)
from app.models.operators import (
    HermitianOperator,
    Interval,
    OrthonormalBasisFamily,
    SpectralDecomposition,
)
from app.models.state import (
    LUDERS,
    VON_NEUMANN,
    DensityOperator,
    MeasurementRecord,
    PureState,
    QuantumState,
    Undetermined,
)
from app.services.spectral import as_operator, commutator_norm, is_degenerate, spectral_decompose

logger = logging.getLogger(__name__)


def _check_dims(state: QuantumState, obs: SpectralDecomposition) -> None:
    if state.dim != obs.source_dim:
        raise DimensionMismatch(
            f"State dim {state.dim} does not match observable dim {obs.source_dim}",
            module="measurement",
        )


def _branch_probability(state: QuantumState, projector: np.ndarray) -> float:
    if isinstance(state, PureState):
        projected = projector @ state.vector
        value = float(np.real(np.vdot(projected, projected)))
    else:
        value = float(np.real(np.trace(state.density_matrix() @ projector)))
    return min(max(value, 0.0), 1.0)


def _check_outcome_index(obs: SpectralDecomposition, outcome_index: int) -> None:
    if not 0 <= outcome_index < len(obs):
        raise IndexError(f"Outcome index {outcome_index} outside 0..{len(obs) - 1}")


def born_probabilities(
    state: QuantumState, obs: SpectralDecomposition
) -> List[Tuple[float, float]]:
    """
    Born probabilities for every branch of an observable.

    Args:
        state: Pure or mixed state
        obs: Spectral decomposition of the measured observable

    Returns:
        List of (eigenvalue, probability) in branch order
    """
    _check_dims(state, obs)
    return [(b.eigenvalue, _branch_probability(state, b.projector)) for b in obs.branches]


def sample_outcome(
    state: QuantumState, obs: SpectralDecomposition, rng: np.random.Generator
) -> int:
    """Draw a branch index according to the Born probabilities."""
    probabilities = np.array([p for _, p in born_probabilities(state, obs)])
    return int(rng.choice(len(probabilities), p=probabilities / probabilities.sum()))


def luders_measure(
    state: QuantumState,
    obs: SpectralDecomposition,
    outcome_index: int,
    prob_floor: Optional[float] = None,
) -> MeasurementRecord:
    """Selective Lüders update: ψ′ = Pψ/‖Pψ‖ or ρ′ = PρP/Tr(ρP)."""
    _check_dims(state, obs)
    _check_outcome_index(obs, outcome_index)
    prob_floor = settings.QMEAS_PROB_FLOOR if prob_floor is None else prob_floor
    branch = obs[outcome_index]
    probability = _branch_probability(state, branch.projector)
    if probability <= prob_floor:
        raise ZeroProbabilityBranch(
            f"Outcome {branch.eigenvalue:.6g} has probability {probability:.3e}"
        )

    if isinstance(state, PureState):
        projected = branch.projector @ state.vector
        post = PureState(projected / np.linalg.norm(projected))
    else:
        rho = state.density_matrix()
        projected = branch.projector @ rho @ branch.projector
        post = DensityOperator(projected / np.real(np.trace(projected)))

    return MeasurementRecord(
        postulate=LUDERS,
        outcome=branch.eigenvalue,
        probability=probability,
        post_state=post,
        branch_index=outcome_index,
        multiplicity=branch.multiplicity,
    )


def luders_nonselective(state: QuantumState, obs: SpectralDecomposition) -> DensityOperator:
    """Nonselective Lüders update ρ′ = Σₘ Pₘ ρ Pₘ."""
    _check_dims(state, obs)
    rho = state.density_matrix()
    total = np.zeros_like(rho)
    for branch in obs.branches:
        total += branch.projector @ rho @ branch.projector
    return DensityOperator(total)


def _check_refinement(obs: SpectralDecomposition, refinement: OrthonormalBasisFamily) -> None:
    """Each refinement group must span the matching eigenspace of ``obs``."""
    if refinement.dim != obs.source_dim:
        raise DimensionMismatch(
            f"Refinement dim {refinement.dim} does not match observable dim {obs.source_dim}",
            module="measurement",
        )
    if len(refinement.groups) != len(obs):
        raise RefinementMismatch(
            f"Refinement has {len(refinement.groups)} groups, observable has {len(obs)} branches"
        )
    for branch, group in zip(obs.branches, refinement.groups):
        if group.shape[1] != branch.multiplicity:
            raise RefinementMismatch(
                f"Eigenspace of {branch.eigenvalue:.6g} has multiplicity "
                f"{branch.multiplicity} but refinement group holds {group.shape[1]} vectors"
            )
        if np.max(np.abs(branch.projector @ group - group)) > 1e-8:
            raise RefinementMismatch(
                f"Refinement vectors do not lie in the eigenspace of {branch.eigenvalue:.6g}"
            )


def _diagonal_weights(state: QuantumState, vectors: np.ndarray) -> np.ndarray:
    """⟨ρφ, φ⟩ for every column φ."""
    if isinstance(state, PureState):
        overlaps = vectors.conj().T @ state.vector
        return np.abs(overlaps) ** 2
    rho = state.density_matrix()
    return np.real(np.einsum("ik,ij,jk->k", vectors.conj(), rho, vectors))


def _mixture(weights: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    return (vectors * weights) @ vectors.conj().T


def von_neumann_measure(
    state: QuantumState,
    obs: SpectralDecomposition,
    refinement: OrthonormalBasisFamily,
    outcome_index: int,
    prob_floor: Optional[float] = None,
) -> MeasurementRecord:
    """
    Selective measurement under von Neumann's postulate.

    A nondegenerate outcome behaves exactly like Lüders. A degenerate outcome
    leaves the state undetermined; the record then carries the mixture obtained
    by conditioning on the supplied refinement basis inside that eigenspace.

    Args:
        state: Pure or mixed state
        obs: Measured observable
        refinement: Basis family whose groups span the eigenspaces of ``obs``
        outcome_index: Branch index of the observed outcome
        prob_floor: Probabilities at or below this count as zero

    Returns:
        MeasurementRecord with postulate ``von_neumann``
    """
    _check_dims(state, obs)
    _check_refinement(obs, refinement)
    _check_outcome_index(obs, outcome_index)
    branch = obs[outcome_index]

    if branch.multiplicity == 1:
        luders = luders_measure(state, obs, outcome_index, prob_floor=prob_floor)
        return MeasurementRecord(
            postulate=VON_NEUMANN,
            outcome=luders.outcome,
            probability=luders.probability,
            post_state=luders.post_state,
            branch_index=outcome_index,
            multiplicity=1,
        )

    prob_floor = settings.QMEAS_PROB_FLOOR if prob_floor is None else prob_floor
    probability = _branch_probability(state, branch.projector)
    if probability <= prob_floor:
        raise ZeroProbabilityBranch(
            f"Outcome {branch.eigenvalue:.6g} has probability {probability:.3e}"
        )

    vectors = refinement.groups[outcome_index]
    weights = _diagonal_weights(state, vectors)
    conditional = DensityOperator(_mixture(weights, vectors) / weights.sum())
    logger.debug(
        f"von Neumann outcome {branch.eigenvalue:.6g} left undetermined "
        f"(multiplicity {branch.multiplicity}, basis {refinement.basis_id})"
    )
    return MeasurementRecord(
        postulate=VON_NEUMANN,
        outcome=branch.eigenvalue,
        probability=probability,
        post_state=Undetermined(conditional, refinement),
        branch_index=outcome_index,
        multiplicity=branch.multiplicity,
    )


def von_neumann_nonselective(
    state: QuantumState, refinement: OrthonormalBasisFamily
) -> DensityOperator:
    """ρ′ = Σ ⟨ρφ, φ⟩ P_φ over a complete refinement basis."""
    if refinement.dim != state.dim:
        raise DimensionMismatch(
            f"Refinement dim {refinement.dim} does not match state dim {state.dim}",
            module="measurement",
        )
    if not refinement.is_complete():
        raise IncompleteBasis(
            f"Refinement holds {refinement.vectors.shape[1]} vectors for dim {refinement.dim}"
        )
    vectors = refinement.vectors
    return DensityOperator(_mixture(_diagonal_weights(state, vectors), vectors))


def _eigenspace_basis(projector: np.ndarray, multiplicity: int) -> np.ndarray:
    values, vectors = np.linalg.eigh(projector)
    return vectors[:, np.argsort(values)[::-1][:multiplicity]]


def build_refinement(
    obs: SpectralDecomposition,
    per_eigenspace_bases: Optional[Sequence[np.ndarray]] = None,
    labels: Optional[Sequence[Sequence[float]]] = None,
    name: str = "refinement",
) -> Tuple[OrthonormalBasisFamily, HermitianOperator]:
    """
    Construct a nondegenerate refinement d̂ = Σ γₙ P_φₙ of an observable.

    Args:
        obs: Observable to refine
        per_eigenspace_bases: One ``dim × multiplicity`` matrix per branch.
            Defaults to eigenvectors of each branch projector.
        labels: One label list per branch; all labels distinct. Defaults to the
            eigenvalues for nondegenerate observables, else 0..n-1 in branch order.
        name: Prefix of the refinement id

    Returns:
        Tuple of (basis family, refinement operator d̂)
    """
    if per_eigenspace_bases is None:
        per_eigenspace_bases = [
            _eigenspace_basis(b.projector, b.multiplicity) for b in obs.branches
        ]
    if len(per_eigenspace_bases) != len(obs):
        raise RefinementMismatch(
            f"Expected {len(obs)} eigenspace bases, got {len(per_eigenspace_bases)}"
        )

    if labels is None:
        if not is_degenerate(obs):
            labels = [[b.eigenvalue] for b in obs.branches]
        else:
            labels, start = [], 0
            for b in obs.branches:
                labels.append(list(range(start, start + b.multiplicity)))
                start += b.multiplicity

    family = OrthonormalBasisFamily(
        per_eigenspace_bases, labels, group_values=obs.eigenvalues, name=name
    )
    _check_refinement(obs, family)

    flat = np.sort(family.flat_labels)
    scale = max(1.0, float(np.max(np.abs(flat))))
    if len(flat) > 1 and np.min(np.diff(flat)) < settings.QMEAS_EIG_REL_TOL * scale * 10:
        raise DuplicateLabels("Refinement labels are too close to stay distinct eigenvalues")

    vectors = family.vectors
    d_hat = HermitianOperator((vectors * family.flat_labels) @ vectors.conj().T)
    return family, d_hat


def refinement_decoder(family: OrthonormalBasisFamily) -> Callable[[float], float]:
    """Map a refinement label back to the eigenvalue of the group it belongs to."""
    if family.group_values is None:
        raise RefinementMismatch("Refinement family carries no eigenvalues to decode to")
    flat = family.flat_labels
    values = np.concatenate(
        [np.full(len(tags), value) for tags, value in zip(family.labels, family.group_values)]
    )

    def decode(label: float) -> float:
        return float(values[int(np.argmin(np.abs(flat - label)))])

    return decode


def rotate_within_eigenspaces(
    family: OrthonormalBasisFamily, angle: float, name: Optional[str] = None
) -> OrthonormalBasisFamily:
    """Rotate the first two vectors of every multi-vector group by ``angle`` radians."""
    c, s = np.cos(angle), np.sin(angle)
    groups = []
    for group in family.groups:
        rotated = np.array(group)
        if group.shape[1] >= 2:
            rotated[:, 0] = c * group[:, 0] + s * group[:, 1]
            rotated[:, 1] = -s * group[:, 0] + c * group[:, 1]
        groups.append(rotated)
    return OrthonormalBasisFamily(
        groups,
        family.labels,
        group_values=family.group_values,
        name=name or f"{family.name}-rot",
    )


def _check_pairwise_commuting(operators: Sequence[HermitianOperator], tol: float) -> None:
    for (i, a), (j, b) in combinations(enumerate(operators), 2):
        norm = commutator_norm(a, b)
        if norm > tol:
            raise NonCommutingObservables(
                f"Observables {i} and {j} do not commute (‖[A,B]‖ = {norm:.3e})"
            )


def joint_probability_commuting(
    state: QuantumState,
    specs: Sequence[Tuple[SpectralDecomposition, Interval]],
    tol: Optional[float] = None,
) -> float:
    """‖E₁(Δ₁)…Eₙ(Δₙ)ψ‖² (or its density analogue) for pairwise commuting observables."""
    tol = settings.QMEAS_COMMUTE_TOL if tol is None else tol
    _check_pairwise_commuting([as_operator(d) for d, _ in specs], tol)

    product = np.eye(state.dim, dtype=complex)
    for decomposition, interval in specs:
        _check_dims(state, decomposition)
        product = product @ decomposition.spectral_projector(Interval(*interval))

    if isinstance(state, PureState):
        projected = product @ state.vector
        return float(np.real(np.vdot(projected, projected)))
    rho = state.density_matrix()
    return float(np.real(np.trace(product @ rho @ product.conj().T)))


@dataclass(frozen=True)
class CommonRefinement:
    """Nondegenerate d̂ with decoders back to both commuting observables."""

    family: OrthonormalBasisFamily
    operator: HermitianOperator
    decomposition: SpectralDecomposition
    decode_a: Callable[[float], float]
    decode_b: Callable[[float], float]
    a_index: Tuple[int, ...]
    b_index: Tuple[int, ...]


def common_refinement(
    a: SpectralDecomposition, b: SpectralDecomposition, tol: Optional[float] = None
) -> CommonRefinement:
    """
    Simultaneously diagonalize two commuting observables.

    ``b`` is diagonalized inside every eigenspace of ``a``; vectors are labelled
    0..n-1 lexicographically by (a-branch, b-branch).
    """
    tol = settings.QMEAS_COMMUTE_TOL if tol is None else tol
    if a.source_dim != b.source_dim:
        raise DimensionMismatch(
            f"Observables act on dims {a.source_dim} and {b.source_dim}", module="measurement"
        )
    b_matrix = b.reconstruct()
    _check_pairwise_commuting([as_operator(a), HermitianOperator(b_matrix)], tol)

    entries = []  # (a_idx, b_idx, vector)
    for a_idx, branch in enumerate(a.branches):
        basis = _eigenspace_basis(branch.projector, branch.multiplicity)
        restricted = basis.conj().T @ b_matrix @ basis
        _, rotation = np.linalg.eigh(0.5 * (restricted + restricted.conj().T))
        local = basis @ rotation
        for column in range(local.shape[1]):
            vector = local[:, column]
            b_value = float(np.real(np.vdot(vector, b_matrix @ vector)))
            b_idx = int(np.argmin([abs(b_value - v) for v in b.eigenvalues]))
            entries.append((a_idx, b_idx, vector))

    entries.sort(key=lambda item: (item[0], item[1]))
    groups, labels = [], []
    a_index, b_index = [], []
    for label, (a_idx, b_idx, vector) in enumerate(entries):
        while len(groups) <= a_idx:
            groups.append([])
            labels.append([])
        groups[a_idx].append(vector)
        labels[a_idx].append(float(label))
        a_index.append(a_idx)
        b_index.append(b_idx)

    family, d_hat = build_refinement(
        a,
        per_eigenspace_bases=[np.column_stack(g) for g in groups],
        labels=labels,
        name="common",
    )
    a_values = np.array([a.eigenvalues[i] for i in a_index])
    b_values = np.array([b.eigenvalues[i] for i in b_index])

    def decode_a(label: float) -> float:
        return float(a_values[int(round(label))])

    def decode_b(label: float) -> float:
        return float(b_values[int(round(label))])

    return CommonRefinement(
        family=family,
        operator=d_hat,
        decomposition=spectral_decompose(d_hat, eig_tol=0.5),
        decode_a=decode_a,
        decode_b=decode_b,
        a_index=tuple(a_index),
        b_index=tuple(b_index),
    )


@dataclass(frozen=True)
class SimultaneousOutcome:
    outcome_a: float
    outcome_b: float
    record: MeasurementRecord


def simultaneous_distribution(
    state: QuantumState, a: SpectralDecomposition, b: SpectralDecomposition
) -> Dict[Tuple[float, float], float]:
    """Enumerate the d-outcomes of the common refinement and aggregate them into pair probabilities."""
    refinement = common_refinement(a, b)
    distribution: Dict[Tuple[float, float], float] = {
        (alpha, beta): 0.0 for alpha in a.eigenvalues for beta in b.eigenvalues
    }
    for label, probability in born_probabilities(state, refinement.decomposition):
        key = (refinement.decode_a(label), refinement.decode_b(label))
        distribution[key] += probability
    return distribution


def simultaneous_measure(
    state: QuantumState,
    a: SpectralDecomposition,
    b: SpectralDecomposition,
    rng: np.random.Generator,
) -> SimultaneousOutcome:
    """
    Jointly measure two commuting observables through their common refinement.

    Measures d first, then decodes a = f₁(d) and b = f₂(d).

    Args:
        state: State to measure
        a: First observable
        b: Second observable, commuting with ``a``
        rng: Seeded random source choosing the d-outcome

    Returns:
        SimultaneousOutcome with the decoded pair and the d-record
    """
    refinement = common_refinement(a, b)
    index = sample_outcome(state, refinement.decomposition, rng)
    record = luders_measure(state, refinement.decomposition, index)
    return SimultaneousOutcome(
        outcome_a=refinement.decode_a(record.outcome),
        outcome_b=refinement.decode_b(record.outcome),
        record=record,
    )


def conditional_probability(
    state: QuantumState,
    a: SpectralDecomposition,
    k: int,
    b: SpectralDecomposition,
    m: int,
    prob_floor: Optional[float] = None,
) -> float:
    """
    P(b = βₘ | a = αₖ) with the Lüders post-state of the a-measurement.

    Pure states use ‖PₘᵇPₖᵃψ‖²/‖Pₖᵃψ‖²; density states use Tr(ρₖᵃPₘᵇ).
    """
    _check_dims(state, a)
    _check_dims(state, b)
    _check_outcome_index(b, m)
    post = luders_measure(state, a, k, prob_floor=prob_floor).post_state
    return _branch_probability(post, b[m].projector)


def transition_probability(
    a: SpectralDecomposition, k: int, b: SpectralDecomposition, m: int
) -> float:
    """|⟨eₘᵇ, eₖᵃ⟩|² for nondegenerate branches, which is also Tr(PₖᵃPₘᵇ)."""
    if a[k].multiplicity != 1 or b[m].multiplicity != 1:
        raise RefinementMismatch("Transition probability needs nondegenerate branches")
    return float(np.real(np.trace(a[k].projector @ b[m].projector)))


def conditional_probability_table(
    state: QuantumState, a: SpectralDecomposition, b: SpectralDecomposition
) -> List[Dict[str, Optional[float]]]:
    """Both conditional directions for every (k, m); ``None`` where the condition has zero probability."""
    rows = []
    for k, a_branch in enumerate(a.branches):
        for m, b_branch in enumerate(b.branches):
            row: Dict[str, Optional[float]] = {
                "k": k,
                "alpha_k": a_branch.eigenvalue,
                "m": m,
                "beta_m": b_branch.eigenvalue,
            }
            for key, args in (("p_b_given_a", (a, k, b, m)), ("p_a_given_b", (b, m, a, k))):
                try:
                    row[key] = conditional_probability(state, *args)
                except ZeroProbabilityBranch:
                    row[key] = None
            if a_branch.multiplicity == 1 and b_branch.multiplicity == 1:
                row["transition"] = transition_probability(a, k, b, m)
            else:
                row["transition"] = None
            rows.append(row)
    return rows
