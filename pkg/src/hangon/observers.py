"""Agents that hang on to branches of a global state that never collapses.

An observation is modeled as a record-copy unitary that writes the measured
outcome into a fresh, write-once memory register, followed by a private
anchor: the agent's perception is the global state projected onto the
recorded value of each of its memory registers.  The global state is only
ever changed by unitaries, so it is the same whatever the agents perceive.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import (
    DuplicateAgent,
    ForbiddenComparison,
    ImmutableMemory,
    UnknownAgent,
    UnknownEvent,
    UnknownLabel,
    ZeroWeightBranch,
)
from .hilbert import (
    ProjectorSet,
    StateVector,
    UnitaryOp,
    apply_unitary,
    computational_projectors,
    distribution,
    extend_with_register,
)

PROBABILITY_FLOOR = 1e-12
CERTAINTY_TOL = 1e-9


def memory_register_id(agent: str, event_id: int) -> str:
    return f"{agent}.m{event_id}"


def memory_labels(projectors: ProjectorSet) -> tuple[str, ...]:
    """Labels of a memory register's basis; padded when there is a single outcome."""
    labels = projectors.labels
    return labels if len(labels) >= 2 else labels + ("<unused>",)


def record_copy_unitary(projectors: ProjectorSet, memory: str) -> UnitaryOp:
    """sum_i P_i (x) X^i, with X the cyclic increment on the memory register."""
    mem_dim = len(memory_labels(projectors))
    shift = np.roll(np.eye(mem_dim, dtype=complex), 1, axis=0)
    matrix = sum(
        np.kron(proj, np.linalg.matrix_power(shift, i))
        for i, (_, proj) in enumerate(projectors.outcomes)
    )
    return UnitaryOp(projectors.targets + (memory,), matrix)


@dataclass(frozen=True)
class Anchor:
    event_id: int
    memory: str
    outcome: str
    index: int
    time_index: int


@dataclass(frozen=True)
class MeasurementEvent:
    # Outcomes are deliberately absent: they live only in agents' records.
    event_id: int
    agent: str
    targets: tuple[str, ...]
    projectors: ProjectorSet
    memory: str
    time_index: int
    kind: str = "observe"
    asked_event: int | None = None

    @property
    def labels(self) -> tuple[str, ...]:
        return memory_labels(self.projectors)

    def memory_projectors(self) -> ProjectorSet:
        return computational_projectors((self.memory,), len(self.labels), self.labels)


@dataclass(frozen=True)
class Determined:
    outcome: str


@dataclass(frozen=True)
class Undetermined:
    pass


Determinacy = Union[Determined, Undetermined]


@dataclass(frozen=True)
class Agent:
    id: str
    record: tuple[Anchor, ...]
    perceptual_state: StateVector


def condition(state: StateVector, anchors: Sequence[Anchor]) -> StateVector:
    """normalize(product of anchor projectors . state)."""
    if not anchors:
        return state
    psi = state.tensor()
    index: list = [slice(None)] * psi.ndim
    for anchor in anchors:
        index[state.layout.index(anchor.memory)] = anchor.index
    kept = np.zeros_like(psi)
    kept[tuple(index)] = psi[tuple(index)]
    weight = float(np.vdot(kept, kept).real)
    if weight < PROBABILITY_FLOOR:
        raise ZeroWeightBranch(f"anchors {[a.outcome for a in anchors]} have weight {weight:.3g}")
    return StateVector(state.layout, kept.reshape(-1) / np.sqrt(weight))


def sample_label(dist: dict[str, float], u: float) -> str:
    """Inverse-CDF draw over labels in declared order; impossible labels never win."""
    possible = [(label, p) for label, p in dist.items() if p >= PROBABILITY_FLOOR]
    if not possible:
        raise ZeroWeightBranch("every outcome is below the probability floor")
    total = sum(p for _, p in possible)
    acc = 0.0
    for label, p in possible:
        acc += p / total
        if u < acc:
            return label
    return possible[-1][0]


def agent_key(agent: str) -> int:
    return int.from_bytes(hashlib.sha256(agent.encode("utf-8")).digest()[:8], "little")


def substream(seed: int, agent: str, event_id: int) -> np.random.Generator:
    """Generator for one (seed, agent, event) stream; its n-th draw belongs to trial n."""
    return np.random.default_rng(np.random.SeedSequence([seed, agent_key(agent), event_id]))


def trial_uniform(seed: int, agent: str, event_id: int, trial: int) -> float:
    return float(substream(seed, agent, event_id).random(trial + 1)[trial])


class Simulation:
    """Global state, event log and agents of one run.

    Single-writer: mutating calls must happen in scenario order.  Outcomes
    are drawn from per-(seed, agent, event) streams, so a run is a pure
    function of (initial state, calls, seed, trial).
    """

    def __init__(self, state: StateVector, *, seed: int = 0, trial: int = 0):
        self._state = state
        self.seed = seed
        self.trial = trial
        self._agents: dict[str, Agent] = {}
        self._events: list[MeasurementEvent] = []
        self._memories: set[str] = set()
        self.time = 0

    @property
    def state(self) -> StateVector:
        return self._state

    @property
    def events(self) -> tuple[MeasurementEvent, ...]:
        return tuple(self._events)

    @property
    def agent_ids(self) -> tuple[str, ...]:
        return tuple(self._agents)

    def fork(self) -> "Simulation":
        twin = Simulation(self._state, seed=self.seed, trial=self.trial)
        twin._agents = dict(self._agents)
        twin._events = list(self._events)
        twin._memories = set(self._memories)
        twin.time = self.time
        return twin

    def register_agent(self, name: str) -> str:
        if name in self._agents:
            raise DuplicateAgent(f"agent {name!r} already registered")
        self._agents[name] = Agent(name, (), self._state)
        return name

    def agent(self, name: str) -> Agent:
        try:
            return self._agents[name]
        except KeyError:
            raise UnknownAgent(f"no agent {name!r}") from None

    def event(self, event_id: int) -> MeasurementEvent:
        if not 0 <= event_id < len(self._events):
            raise UnknownEvent(f"no event {event_id}")
        return self._events[event_id]

    def perceptual_state(self, agent: str) -> StateVector:
        return self.agent(agent).perceptual_state

    def _set_state(self, state: StateVector) -> None:
        self._state = state
        self.time += 1
        for name, ag in self._agents.items():
            self._agents[name] = dataclasses.replace(
                ag, perceptual_state=condition(state, ag.record)
            )

    def apply_unitary(self, op: UnitaryOp) -> None:
        touched = self._memories.intersection(op.targets)
        if touched:
            raise ImmutableMemory(f"unitary targets memory registers {sorted(touched)}")
        self._set_state(apply_unitary(self._state, op))

    def record(
        self,
        agent: str,
        projectors: ProjectorSet,
        *,
        kind: str = "observe",
        asked_event: int | None = None,
    ) -> MeasurementEvent:
        """Adjoin a fresh memory register and entangle it with the targets.

        This is the only effect an observation has on the global state.
        """
        event_id = len(self._events)
        memory = memory_register_id(agent, event_id)
        extended = extend_with_register(self._state, memory, len(memory_labels(projectors)))
        after = apply_unitary(extended, record_copy_unitary(projectors, memory))
        self._set_state(after)
        self._memories.add(memory)
        event = MeasurementEvent(
            event_id, agent, projectors.targets, projectors, memory, self.time, kind, asked_event
        )
        self._events.append(event)
        return event

    def memory_distribution(self, agent: str, event_id: int) -> dict[str, float]:
        """Distribution of an event's recorded value in the agent's perception."""
        event = self.event(event_id)
        dist = distribution(self.perceptual_state(agent), event.memory_projectors())
        return {label: p for label, p in dist.items() if label in event.projectors.labels}

    def hang_on(self, agent: str, event_id: int, outcome: str) -> Anchor:
        ag = self.agent(agent)
        event = self.event(event_id)
        if outcome not in event.projectors.labels:
            raise UnknownLabel(f"event {event_id} has no outcome {outcome!r}")
        anchor = Anchor(
            event_id, event.memory, outcome, event.labels.index(outcome), event.time_index
        )
        perceptual = condition(self._state, ag.record + (anchor,))
        self._agents[agent] = Agent(agent, ag.record + (anchor,), perceptual)
        return anchor

    def _draw(self, agent: str, event_id: int, rng: np.random.Generator | None) -> float:
        if rng is not None:
            return float(rng.random())
        return trial_uniform(self.seed, agent, event_id, self.trial)

    def observe(
        self, agent: str, projectors: ProjectorSet, rng: np.random.Generator | None = None
    ) -> tuple[int, str]:
        self.agent(agent)
        event = self.record(agent, projectors)
        return self._settle(agent, event, rng)

    def ask(
        self, asker: str, target: str, event_id: int, rng: np.random.Generator | None = None
    ) -> tuple[int, str]:
        """Read another agent's memory register: the only cross-agent channel."""
        self.agent(asker)
        asked = self.event(event_id)
        if asked.agent != target:
            raise UnknownEvent(f"event {event_id} was performed by {asked.agent!r}, not {target!r}")
        event = self.record(asker, asked.memory_projectors(), kind="ask", asked_event=event_id)
        return self._settle(asker, event, rng)

    def _settle(
        self, agent: str, event: MeasurementEvent, rng: np.random.Generator | None
    ) -> tuple[int, str]:
        dist = self.memory_distribution(agent, event.event_id)
        outcome = sample_label(dist, self._draw(agent, event.event_id, rng))
        self.hang_on(agent, event.event_id, outcome)
        return event.event_id, outcome

    def predictive_distribution(self, agent: str, projectors: ProjectorSet) -> dict[str, float]:
        return distribution(self.perceptual_state(agent), projectors)

    def determinacy(self, agent: str, event_id: int) -> Determinacy:
        for label, p in self.memory_distribution(agent, event_id).items():
            if p >= 1.0 - CERTAINTY_TOL:
                return Determined(label)
        return Undetermined()

    def transcript(self, agent: str) -> list[tuple[int, str, int]]:
        if not isinstance(agent, str):
            raise ForbiddenComparison("a transcript belongs to exactly one agent")
        return [(a.event_id, a.outcome, a.time_index) for a in self.agent(agent).record]

    def joint_transcript(self, *agents: str):
        raise ForbiddenComparison(
            f"no joint outcome record exists for {agents}: outcomes are private to each agent"
        )
