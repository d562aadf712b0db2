"""Dense state-vector engine over named registers of arbitrary finite dimension.

Amplitudes are stored in row-major order over the layout: the first register
is the most significant index, so ``prepare`` on a product mapping is
``np.kron`` of the per-register vectors in layout order.  Basis index 0 of a
spin register is the "+" state along the reference (Oz) axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadDimension,
    DimensionMismatch,
    DuplicateRegister,
    InvalidProjectors,
    NonUnitary,
    StateTooLarge,
    UnknownLabel,
    UnknownRegister,
    ZeroNorm,
)

MAX_DIMENSION = 2**20
VALIDATION_TOL = 1e-10
NORM_TOL = 1e-12
NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple[tuple[str, int], ...]

    def __init__(self, registers: Iterable[tuple[str, int]] | Mapping[str, int]):
        if isinstance(registers, Mapping):
            registers = registers.items()
        regs = tuple((str(rid), int(dim)) for rid, dim in registers)
        seen: set[str] = set()
        total = 1
        for rid, dim in regs:
            if rid in seen:
                raise DuplicateRegister(f"register {rid!r} declared twice")
            if dim < 2:
                raise BadDimension(f"register {rid!r} has dimension {dim} < 2")
            seen.add(rid)
            total *= dim
        if total > MAX_DIMENSION:
            raise StateTooLarge(f"total dimension {total} exceeds {MAX_DIMENSION}")
        object.__setattr__(self, "registers", regs)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(rid for rid, _ in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.registers)

    @property
    def dimension(self) -> int:
        return math.prod(self.dims)

    def __contains__(self, rid: object) -> bool:
        return rid in self.ids

    def index(self, rid: str) -> int:
        try:
            return self.ids.index(rid)
        except ValueError:
            raise UnknownRegister(f"no register {rid!r} in layout {self.ids}") from None

    def dim(self, rid: str) -> int:
        return self.registers[self.index(rid)][1]

    def joint_dim(self, targets: Sequence[str]) -> int:
        return math.prod(self.dim(t) for t in targets)

    def extend(self, rid: str, dim: int) -> "RegisterLayout":
        if rid in self:
            raise DuplicateRegister(f"register {rid!r} already in layout")
        return RegisterLayout(self.registers + ((rid, dim),))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state; the amplitude array is read-only."""

    layout: RegisterLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.layout.dimension:
            raise DimensionMismatch(
                f"{amps.size} amplitudes for layout of dimension {self.layout.dimension}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped with one axis per register."""
        return self.amplitudes.reshape(self.layout.dims)

    def allclose(self, other: "StateVector", atol: float = NORM_TOL) -> bool:
        return self.layout == other.layout and np.allclose(
            self.amplitudes, other.amplitudes, rtol=0.0, atol=atol
        )


def _normalized(layout: RegisterLayout, amps: np.ndarray) -> StateVector:
    norm = np.linalg.norm(amps)
    if norm <= NORM_FLOOR:
        raise ZeroNorm("state has (numerically) zero norm")
    return StateVector(layout, amps / norm)


def prepare(
    layout: RegisterLayout,
    amplitudes: Sequence[complex] | None = None,
    product: Mapping[str, Sequence[complex]] | None = None,
) -> StateVector:
    """Build a normalized state from global amplitudes or per-register vectors.

    Exactly one of ``amplitudes`` and ``product`` must be given.  Registers
    missing from a product mapping start in basis state 0.
    """
    if (amplitudes is None) == (product is None):
        raise ValueError("give exactly one of amplitudes= or product=")
    if amplitudes is not None:
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if amps.size != layout.dimension:
            raise DimensionMismatch(
                f"{amps.size} amplitudes for layout of dimension {layout.dimension}"
            )
        return _normalized(layout, amps)
    unknown = set(product) - set(layout.ids)
    if unknown:
        raise UnknownRegister(f"product mapping names unknown registers {sorted(unknown)}")
    amps = np.ones(1, dtype=complex)
    for rid, dim in layout.registers:
        vec = np.asarray(product.get(rid, basis_vector(dim, 0)), dtype=complex).reshape(-1)
        if vec.size != dim:
            raise DimensionMismatch(f"register {rid!r} needs {dim} amplitudes, got {vec.size}")
        if np.linalg.norm(vec) <= NORM_FLOOR:
            raise ZeroNorm(f"register {rid!r} has an all-zero amplitude list")
        amps = np.kron(amps, vec / np.linalg.norm(vec))
    return _normalized(layout, amps)


def basis_vector(dim: int, index: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=complex)
    vec[index] = 1.0
    return vec


def _check_targets(layout: RegisterLayout, targets: Sequence[str], matrix: np.ndarray) -> None:
    if len(set(targets)) != len(targets):
        raise DuplicateRegister(f"repeated target in {targets}")
    joint = layout.joint_dim(targets)  # raises UnknownRegister
    if matrix.shape != (joint, joint):
        raise DimensionMismatch(
            f"matrix of shape {matrix.shape} does not act on {targets} (dimension {joint})"
        )


def apply_matrix(state: StateVector, targets: Sequence[str], matrix: np.ndarray) -> np.ndarray:
    """Act with ``matrix`` on ``targets`` (identity elsewhere); returns raw amplitudes.

    No normalization is performed, so this also serves for projections.
    """
    layout = state.layout
    matrix = np.asarray(matrix, dtype=complex)
    _check_targets(layout, targets, matrix)
    axes = [layout.index(t) for t in targets]
    psi = np.moveaxis(state.tensor(), axes, list(range(len(axes))))
    psi = (matrix @ psi.reshape(matrix.shape[0], -1)).reshape(psi.shape)
    return np.moveaxis(psi, list(range(len(axes))), axes).reshape(-1)


def _is_unitary(matrix: np.ndarray, tol: float = VALIDATION_TOL) -> bool:
    ident = np.eye(matrix.shape[0])
    return np.allclose(matrix.conj().T @ matrix, ident, rtol=0.0, atol=tol)


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    targets: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        targets = (self.targets,) if isinstance(self.targets, str) else tuple(self.targets)
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatch(f"unitary must be square, got shape {matrix.shape}")
        if not _is_unitary(matrix):
            raise NonUnitary(f"matrix on {targets} is not unitary within {VALIDATION_TOL}")
        matrix.setflags(write=False)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "matrix", matrix)


def apply_unitary(state: StateVector, op: UnitaryOp) -> StateVector:
    return StateVector(state.layout, apply_matrix(state, op.targets, op.matrix))


@dataclass(frozen=True, eq=False)
class ProjectorSet:
    """Labeled complete family of orthogonal projectors on ``targets``.

    Outcome order is significant: it is the order used for inverse-CDF
    sampling and for the basis of any memory register that records it.
    """

    targets: tuple[str, ...]
    outcomes: tuple[tuple[str, np.ndarray], ...]

    def __post_init__(self):
        targets = (self.targets,) if isinstance(self.targets, str) else tuple(self.targets)
        outcomes = self.outcomes.items() if isinstance(self.outcomes, Mapping) else self.outcomes
        cleaned = []
        for label, proj in outcomes:
            mat = np.array(proj, dtype=complex)
            mat.setflags(write=False)
            cleaned.append((str(label), mat))
        if not cleaned:
            raise InvalidProjectors("a projector set needs at least one outcome")
        labels = [label for label, _ in cleaned]
        if len(set(labels)) != len(labels):
            raise InvalidProjectors(f"duplicate outcome labels {labels}")
        _validate_projectors([m for _, m in cleaned])
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "outcomes", tuple(cleaned))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.outcomes)

    @property
    def dimension(self) -> int:
        return self.outcomes[0][1].shape[0]

    def projector(self, label: str) -> np.ndarray:
        for lab, mat in self.outcomes:
            if lab == label:
                return mat
        raise UnknownLabel(f"no outcome {label!r} among {self.labels}")

    def relabel(self, labels: Sequence[str]) -> "ProjectorSet":
        return ProjectorSet(self.targets, tuple(zip(labels, (m for _, m in self.outcomes))))


def _validate_projectors(mats: list[np.ndarray], tol: float = VALIDATION_TOL) -> None:
    dim = mats[0].shape[0]
    for m in mats:
        if m.shape != (dim, dim):
            raise InvalidProjectors("projectors must be square and of equal size")
        if not np.allclose(m, m.conj().T, rtol=0.0, atol=tol):
            raise InvalidProjectors("projector is not Hermitian")
        if not np.allclose(m @ m, m, rtol=0.0, atol=tol):
            raise InvalidProjectors("projector is not idempotent")
    for i, a in enumerate(mats):
        for b in mats[i + 1 :]:
            if not np.allclose(a @ b, 0.0, rtol=0.0, atol=tol):
                raise InvalidProjectors("projectors are not mutually orthogonal")
    if not np.allclose(sum(mats), np.eye(dim), rtol=0.0, atol=tol):
        raise InvalidProjectors("projectors do not sum to the identity")


def computational_projectors(
    targets: Sequence[str] | str, dim: int, labels: Sequence[str] | None = None
) -> ProjectorSet:
    """Rank-1 projectors onto the joint computational basis of ``targets``."""
    labels = [str(i) for i in range(dim)] if labels is None else list(labels)
    if len(labels) != dim:
        raise DimensionMismatch(f"{len(labels)} labels for a basis of size {dim}")
    outcomes = []
    for i, label in enumerate(labels):
        proj = np.zeros((dim, dim), dtype=complex)
        proj[i, i] = 1.0
        outcomes.append((label, proj))
    return ProjectorSet(targets, tuple(outcomes))


def spin_directions(angle: float) -> tuple[np.ndarray, np.ndarray]:
    """Spin-up/down vectors for the direction at ``angle`` from Oz in a fixed plane."""
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([c, s], dtype=complex), np.array([-s, c], dtype=complex)


def spin_projectors(angle: float, target: str, layout: RegisterLayout | None = None) -> ProjectorSet:
    if layout is not None and layout.dim(target) != 2:
        raise BadDimension(f"spin measurement needs a qubit, {target!r} has dimension {layout.dim(target)}")
    up, down = spin_directions(angle)
    return ProjectorSet(
        (target,),
        (("+", np.outer(up, up.conj())), ("-", np.outer(down, down.conj()))),
    )


def _check_projectors(state: StateVector, projectors: ProjectorSet) -> None:
    joint = state.layout.joint_dim(projectors.targets)
    if joint != projectors.dimension:
        if len(projectors.targets) == 1 and projectors.dimension == 2:
            raise BadDimension(
                f"qubit projectors applied to {projectors.targets[0]!r} of dimension {joint}"
            )
        raise DimensionMismatch(
            f"projectors of size {projectors.dimension} on {projectors.targets} (dimension {joint})"
        )


def project(state: StateVector, projectors: ProjectorSet, label: str) -> np.ndarray:
    """Unnormalized amplitudes of P_label |state>."""
    _check_projectors(state, projectors)
    return apply_matrix(state, projectors.targets, projectors.projector(label))


def outcome_probability(state: StateVector, projectors: ProjectorSet, label: str) -> float:
    amps = project(state, projectors, label)
    return float(np.vdot(amps, amps).real)


def distribution(state: StateVector, projectors: ProjectorSet) -> dict[str, float]:
    return {label: outcome_probability(state, projectors, label) for label in projectors.labels}


def extend_with_register(state: StateVector, rid: str, dim: int, index: int = 0) -> StateVector:
    layout = state.layout.extend(rid, dim)
    if not 0 <= index < dim:
        raise DimensionMismatch(f"basis index {index} out of range for dimension {dim}")
    return StateVector(layout, np.kron(state.amplitudes, basis_vector(dim, index)))


def fidelity(a: StateVector, b: StateVector) -> float:
    if a.layout != b.layout:
        raise DimensionMismatch("states live on different layouts")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def hadamard() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
