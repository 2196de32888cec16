"""Composite-space and EPR report types."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.errors import DimensionMismatch
from app.models.state import DensityOperator, PostState


class CompositeSpace:
    """H = H₁ ⊗ H₂ with chosen local eigenbases (columns of ``basis1`` / ``basis2``)."""

    __slots__ = ("_dim1", "_dim2", "_basis1", "_basis2")

    def __init__(
        self,
        dim1: int,
        dim2: int,
        basis1: Optional[np.ndarray] = None,
        basis2: Optional[np.ndarray] = None,
    ):
        if dim1 < 2 or dim2 < 2:
            raise DimensionMismatch(
                f"Both factors need dim >= 2, got {dim1} x {dim2}", module="composite"
            )
        self._dim1 = int(dim1)
        self._dim2 = int(dim2)
        self._basis1 = self._check_basis(basis1, self._dim1)
        self._basis2 = self._check_basis(basis2, self._dim2)

    @staticmethod
    def _check_basis(basis: Optional[np.ndarray], dim: int) -> np.ndarray:
        matrix = np.eye(dim, dtype=complex) if basis is None else np.array(basis, dtype=complex)
        if matrix.shape != (dim, dim):
            raise DimensionMismatch(
                f"Local basis must be {dim}x{dim}, got {matrix.shape}", module="composite"
            )
        if np.max(np.abs(matrix.conj().T @ matrix - np.eye(dim))) > 1e-9:
            raise DimensionMismatch("Local basis is not orthonormal", module="composite")
        matrix.setflags(write=False)
        return matrix

    @property
    def dim1(self) -> int:
        return self._dim1

    @property
    def dim2(self) -> int:
        return self._dim2

    @property
    def total_dim(self) -> int:
        return self._dim1 * self._dim2

    @property
    def basis1(self) -> np.ndarray:
        return self._basis1

    @property
    def basis2(self) -> np.ndarray:
        return self._basis2

    def product_vector(self, alpha: int, beta: int) -> np.ndarray:
        """e₁^α ⊗ e₂^β."""
        return np.kron(self._basis1[:, alpha], self._basis2[:, beta])

    def __repr__(self) -> str:
        return f"CompositeSpace({self._dim1} x {self._dim2})"


@dataclass(frozen=True)
class LudersBranch:
    outcome: float
    probability: float
    post_state: PostState
    purity: float
    is_product: bool
    remote_value: float
    remote_variance: float
    remote_reduced_state: DensityOperator
    element_of_reality_assigned: bool


@dataclass(frozen=True)
class VonNeumannBranch:
    outcome: float
    probability: float
    determined: bool
    post_state: PostState
    conditional_mixture: DensityOperator
    purity: float
    refinement_id: str
    refinement_outcome: Optional[int]
    remote_value: float
    remote_variance: float
    remote_reduced_state: DensityOperator
    element_of_reality_assigned: bool


@dataclass(frozen=True)
class EprScenarioReport:
    """Side-by-side outcome of measuring Â₁ under both postulates."""

    outcome_index: int
    multiplicity: int
    luders_branch: LudersBranch
    von_neumann_branch: VonNeumannBranch
