"""Immutable operator types: Hermitian matrices, spectral decompositions, refinement bases."""

import hashlib
import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.errors import DimensionMismatch, DuplicateLabels, NotHermitian, RefinementMismatch


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class HermitianOperator:
    """Dense complex self-adjoint matrix.

    Inputs within the hermiticity tolerance are symmetrized to (A + A†)/2;
    anything further from self-adjoint is rejected.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries, hermitian_tol: Optional[float] = None):
        matrix = np.array(entries, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatch(f"Operator must be square, got shape {matrix.shape}")
        if matrix.shape[0] < 1:
            raise DimensionMismatch("Operator dimension must be at least 1")
        if not np.all(np.isfinite(matrix)):
            raise NotHermitian("Operator has non-finite entries")

        tol = settings.QMEAS_HERMITIAN_TOL if hermitian_tol is None else hermitian_tol
        deviation = float(np.max(np.abs(matrix - matrix.conj().T)))
        if deviation > tol:
            raise NotHermitian(
                f"Max deviation from self-adjointness {deviation:.3e} exceeds {tol:.1e}"
            )
        self._entries = _frozen(0.5 * (matrix + matrix.conj().T))

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls(np.eye(dim, dtype=complex))

    @classmethod
    def diagonal(cls, values: Sequence[float]) -> "HermitianOperator":
        return cls(np.diag(np.asarray(values, dtype=complex)))

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(self._entries))))

    def allclose(self, other, atol: float = 1e-9) -> bool:
        other_entries = other.entries if isinstance(other, HermitianOperator) else other
        other_entries = np.asarray(other_entries)
        if other_entries.shape != self._entries.shape:
            return False
        return bool(np.max(np.abs(self._entries - other_entries)) <= atol)

    def __repr__(self) -> str:
        return f"HermitianOperator(dim={self.dim})"


class Interval(NamedTuple):
    """Closed real interval [low, high] used to select spectral branches."""

    low: float
    high: float

    @classmethod
    def point(cls, value: float) -> "Interval":
        return cls(float(value), float(value))

    @classmethod
    def everything(cls) -> "Interval":
        return cls(-math.inf, math.inf)

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.low - tol <= value <= self.high + tol


class SpectralBranch(NamedTuple):
    eigenvalue: float
    projector: np.ndarray
    multiplicity: int


class SpectralDecomposition:
    """Eigenvalue/projector pairs of a Hermitian operator, eigenvalues ascending."""

    __slots__ = ("_branches", "_source_dim", "_eig_tol")

    def __init__(self, branches: Sequence[SpectralBranch], source_dim: int, eig_tol: float):
        frozen = []
        for branch in branches:
            projector = np.array(branch.projector, dtype=complex)
            frozen.append(
                SpectralBranch(float(branch.eigenvalue), _frozen(projector), int(branch.multiplicity))
            )
        self._branches: Tuple[SpectralBranch, ...] = tuple(frozen)
        self._source_dim = int(source_dim)
        self._eig_tol = float(eig_tol)

    @property
    def branches(self) -> Tuple[SpectralBranch, ...]:
        return self._branches

    @property
    def source_dim(self) -> int:
        return self._source_dim

    @property
    def eig_tol(self) -> float:
        return self._eig_tol

    @property
    def eigenvalues(self) -> List[float]:
        return [b.eigenvalue for b in self._branches]

    @property
    def multiplicities(self) -> List[int]:
        return [b.multiplicity for b in self._branches]

    def __len__(self) -> int:
        return len(self._branches)

    def __getitem__(self, index: int) -> SpectralBranch:
        return self._branches[index]

    def __iter__(self):
        return iter(self._branches)

    def reconstruct(self) -> np.ndarray:
        """Σ αₘ Pₘ as a dense matrix."""
        total = np.zeros((self._source_dim, self._source_dim), dtype=complex)
        for branch in self._branches:
            total += branch.eigenvalue * branch.projector
        return total

    def branch_index(self, eigenvalue: float, tol: Optional[float] = None) -> int:
        """Index of the branch whose eigenvalue matches within tolerance."""
        tol = self._eig_tol if tol is None else tol
        for index, branch in enumerate(self._branches):
            if abs(branch.eigenvalue - eigenvalue) <= max(tol, 1e-12):
                return index
        raise IndexError(f"No branch with eigenvalue {eigenvalue}")

    def spectral_projector(self, interval: Interval) -> np.ndarray:
        """E(Δ): sum of the projectors whose eigenvalue lies in the interval."""
        total = np.zeros((self._source_dim, self._source_dim), dtype=complex)
        for branch in self._branches:
            if interval.contains(branch.eigenvalue, tol=self._eig_tol):
                total += branch.projector
        return total

    def is_valid(self, tol: float = 1e-9) -> bool:
        """Check projector, completeness, orthogonality, multiplicity and ordering invariants."""
        identity = np.eye(self._source_dim)
        total = np.zeros_like(identity, dtype=complex)
        for i, branch in enumerate(self._branches):
            p = branch.projector
            if np.max(np.abs(p @ p - p)) > tol or np.max(np.abs(p - p.conj().T)) > tol:
                return False
            if int(round(np.trace(p).real)) != branch.multiplicity:
                return False
            for other in self._branches[i + 1 :]:
                if np.max(np.abs(p @ other.projector)) > tol:
                    return False
            total += p
        if np.max(np.abs(total - identity)) > tol:
            return False
        if sum(self.multiplicities) != self._source_dim:
            return False
        values = self.eigenvalues
        return all(a < b for a, b in zip(values, values[1:]))

    def __repr__(self) -> str:
        spectrum = ", ".join(f"{b.eigenvalue:.6g}x{b.multiplicity}" for b in self._branches)
        return f"SpectralDecomposition(dim={self._source_dim}, [{spectrum}])"


class OrthonormalBasisFamily:
    """Orthonormal vectors grouped per eigenspace, each vector tagged with a distinct real label.

    ``groups[g]`` is a ``dim × n_g`` matrix whose columns span eigenspace ``g``;
    ``labels[g]`` holds the ``n_g`` tags of those columns.
    """

    __slots__ = ("_groups", "_labels", "_group_values", "_name", "_basis_id")

    def __init__(
        self,
        groups: Sequence[np.ndarray],
        labels: Sequence[Sequence[float]],
        group_values: Optional[Sequence[float]] = None,
        name: str = "refinement",
        tol: float = 1e-9,
    ):
        if len(groups) != len(labels):
            raise RefinementMismatch("Each vector group needs its own label group")
        frozen_groups = []
        frozen_labels = []
        dim = None
        for group, group_labels in zip(groups, labels):
            matrix = np.array(group, dtype=complex)
            if matrix.ndim == 1:
                matrix = matrix.reshape(-1, 1)
            if dim is None:
                dim = matrix.shape[0]
            elif matrix.shape[0] != dim:
                raise DimensionMismatch("All refinement vectors must share one dimension")
            tags = np.array(group_labels, dtype=float).reshape(-1)
            if tags.shape[0] != matrix.shape[1]:
                raise RefinementMismatch(
                    f"Group has {matrix.shape[1]} vectors but {tags.shape[0]} labels"
                )
            frozen_groups.append(_frozen(matrix))
            frozen_labels.append(_frozen(tags))

        self._groups = tuple(frozen_groups)
        self._labels = tuple(frozen_labels)
        self._group_values = None if group_values is None else tuple(float(v) for v in group_values)
        self._name = name

        vectors = self.vectors
        gram = vectors.conj().T @ vectors
        if np.max(np.abs(gram - np.eye(gram.shape[0]))) > tol:
            raise RefinementMismatch("Refinement vectors are not orthonormal")
        flat = self.flat_labels
        if len(np.unique(flat)) != len(flat):
            raise DuplicateLabels(f"Refinement labels must be distinct, got {flat.tolist()}")

        digest = hashlib.sha256()
        digest.update(name.encode("utf-8"))
        digest.update(np.round(vectors, 12).tobytes())
        digest.update(np.round(flat, 12).tobytes())
        self._basis_id = f"{name}-{digest.hexdigest()[:12]}"

    @property
    def groups(self) -> Tuple[np.ndarray, ...]:
        return self._groups

    @property
    def labels(self) -> Tuple[np.ndarray, ...]:
        return self._labels

    @property
    def group_values(self) -> Optional[Tuple[float, ...]]:
        return self._group_values

    @property
    def name(self) -> str:
        return self._name

    @property
    def basis_id(self) -> str:
        return self._basis_id

    @property
    def dim(self) -> int:
        return self._groups[0].shape[0]

    @property
    def vectors(self) -> np.ndarray:
        """All vectors as columns of a single ``dim × n`` matrix, group order preserved."""
        return np.hstack(self._groups)

    @property
    def flat_labels(self) -> np.ndarray:
        return np.concatenate(self._labels)

    @property
    def group_sizes(self) -> List[int]:
        return [g.shape[1] for g in self._groups]

    def is_complete(self) -> bool:
        return self.vectors.shape[1] == self.dim

    def __repr__(self) -> str:
        return f"OrthonormalBasisFamily(id={self._basis_id}, sizes={self.group_sizes})"
