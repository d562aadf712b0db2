"""Branch decomposition of a global state relative to a projective measurement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnknownLabel, ZeroWeightBranch
from .hilbert import NORM_FLOOR, ProjectorSet, StateVector, project

WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class Branch:
    label: str
    weight: float
    relative_state: StateVector | None


@dataclass(frozen=True)
class BranchDecomposition:
    branches: tuple[Branch, ...]

    def __getitem__(self, label: str) -> Branch:
        for branch in self.branches:
            if branch.label == label:
                return branch
        raise UnknownLabel(f"no branch labeled {label!r}")

    @property
    def weights(self) -> dict[str, float]:
        return {b.label: b.weight for b in self.branches}


def fix_phase(amps: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the first nonzero amplitude is real-positive."""
    nonzero = np.flatnonzero(np.abs(amps) > NORM_FLOOR)
    if nonzero.size == 0:
        return amps
    lead = amps[nonzero[0]]
    return amps * (abs(lead) / lead)


def _normalize_branch(state: StateVector, amps: np.ndarray) -> StateVector:
    weight = float(np.vdot(amps, amps).real)
    return StateVector(state.layout, fix_phase(amps / np.sqrt(weight)))


def decompose(state: StateVector, projectors: ProjectorSet) -> BranchDecomposition:
    branches = []
    for label in projectors.labels:
        amps = project(state, projectors, label)
        weight = float(np.vdot(amps, amps).real)
        if weight > WEIGHT_FLOOR:
            branches.append(Branch(label, weight, _normalize_branch(state, amps)))
        else:
            branches.append(Branch(label, weight, None))
    return BranchDecomposition(tuple(branches))


def relative_state(state: StateVector, projectors: ProjectorSet, label: str) -> StateVector:
    """Normalized P_label |state>; the input state is left untouched."""
    amps = project(state, projectors, label)
    weight = float(np.vdot(amps, amps).real)
    if weight <= WEIGHT_FLOOR:
        raise ZeroWeightBranch(f"outcome {label!r} has weight {weight:.3g}")
    return _normalize_branch(state, amps)
