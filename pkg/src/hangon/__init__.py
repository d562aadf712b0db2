"""Observer-relative measurement simulator: one unitary global state, private hanging-on records."""

from .branching import Branch, BranchDecomposition, decompose, relative_state
from .hilbert import (
    ProjectorSet,
    RegisterLayout,
    StateVector,
    UnitaryOp,
    apply_unitary,
    extend_with_register,
    outcome_probability,
    prepare,
    spin_projectors,
)
from .observers import Anchor, Agent, Determined, MeasurementEvent, Simulation, Undetermined
from .scenarios import builtin, chsh_statistic, run_scenario
from .script import ScenarioScript, load_script

__all__ = [
    "Agent",
    "Anchor",
    "Branch",
    "BranchDecomposition",
    "Determined",
    "MeasurementEvent",
    "ProjectorSet",
    "RegisterLayout",
    "ScenarioScript",
    "Simulation",
    "StateVector",
    "Undetermined",
    "UnitaryOp",
    "apply_unitary",
    "builtin",
    "chsh_statistic",
    "decompose",
    "extend_with_register",
    "load_script",
    "outcome_probability",
    "prepare",
    "relative_state",
    "run_scenario",
    "spin_projectors",
]
