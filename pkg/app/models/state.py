"""Quantum states and measurement records."""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from app.config import settings
from app.errors import DimensionMismatch, InvalidState
from app.models.operators import OrthonormalBasisFamily


class QuantumState:
    """Tagged union of :class:`PureState` and :class:`DensityOperator`."""

    kind: str = "abstract"

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def density_matrix(self) -> np.ndarray:
        raise NotImplementedError

    def as_density(self) -> "DensityOperator":
        return DensityOperator(self.density_matrix())

    def purity(self) -> float:
        rho = self.density_matrix()
        return float(np.real(np.trace(rho @ rho)))


class PureState(QuantumState):
    """Normalized complex vector."""

    kind = "pure"
    __slots__ = ("_vector",)

    def __init__(self, vector, tol: Optional[float] = None):
        psi = np.array(vector, dtype=complex).reshape(-1)
        if psi.shape[0] < 1:
            raise DimensionMismatch("State vector must have at least one component")
        tol = settings.QMEAS_STATE_TOL if tol is None else tol
        norm = float(np.linalg.norm(psi))
        if not np.isfinite(norm) or abs(norm - 1.0) > tol:
            raise InvalidState(f"State vector norm {norm:.12f} differs from 1")
        psi.setflags(write=False)
        self._vector = psi

    @classmethod
    def normalized(cls, vector) -> "PureState":
        psi = np.array(vector, dtype=complex).reshape(-1)
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise InvalidState("Cannot normalize the zero vector")
        return cls(psi / norm)

    @classmethod
    def basis(cls, dim: int, index: int) -> "PureState":
        psi = np.zeros(dim, dtype=complex)
        psi[index] = 1.0
        return cls(psi)

    @property
    def vector(self) -> np.ndarray:
        return self._vector

    @property
    def dim(self) -> int:
        return self._vector.shape[0]

    def density_matrix(self) -> np.ndarray:
        return np.outer(self._vector, self._vector.conj())

    def purity(self) -> float:
        return 1.0

    def __repr__(self) -> str:
        return f"PureState(dim={self.dim})"


class DensityOperator(QuantumState):
    """Positive semidefinite, unit-trace matrix."""

    kind = "density"
    __slots__ = ("_matrix",)

    def __init__(self, matrix, tol: Optional[float] = None):
        rho = np.array(matrix, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
            raise DimensionMismatch(f"Density operator must be square, got {rho.shape}")
        tol = settings.QMEAS_STATE_TOL if tol is None else tol
        if np.max(np.abs(rho - rho.conj().T)) > tol:
            raise InvalidState("Density operator is not Hermitian")
        rho = 0.5 * (rho + rho.conj().T)
        trace = float(np.real(np.trace(rho)))
        if abs(trace - 1.0) > tol:
            raise InvalidState(f"Density operator trace {trace:.12f} differs from 1")
        min_eig = float(np.min(np.linalg.eigvalsh(rho)))
        if min_eig < -tol:
            raise InvalidState(f"Density operator has negative eigenvalue {min_eig:.3e}")
        rho.setflags(write=False)
        self._matrix = rho

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim, dtype=complex) / dim)

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    def density_matrix(self) -> np.ndarray:
        return self._matrix

    def __repr__(self) -> str:
        return f"DensityOperator(dim={self.dim}, purity={self.purity():.6f})"


@dataclass(frozen=True)
class Undetermined:
    """Post-measurement state that the outcome alone does not fix.

    Carries the mixture obtained by conditioning on the refinement basis that
    was used, so the dependence on that basis stays visible.
    """

    conditional_mixture: DensityOperator
    basis_used: OrthonormalBasisFamily

    kind = "undetermined"


PostState = Union[PureState, DensityOperator, Undetermined]

LUDERS = "luders"
VON_NEUMANN = "von_neumann"


@dataclass(frozen=True)
class MeasurementRecord:
    """Outcome, Born probability and post-measurement state of one selective measurement."""

    postulate: str
    outcome: float
    probability: float
    post_state: PostState
    branch_index: int
    multiplicity: int

    @property
    def is_determined(self) -> bool:
        return not isinstance(self.post_state, Undetermined)

    def resulting_density(self) -> np.ndarray:
        """Density matrix of the post-state, or of the conditional mixture when undetermined."""
        if isinstance(self.post_state, Undetermined):
            return self.post_state.conditional_mixture.density_matrix()
        return self.post_state.density_matrix()

    def purity(self) -> float:
        rho = self.resulting_density()
        return float(np.real(np.trace(rho @ rho)))
