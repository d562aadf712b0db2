"""Running scripts on the hanging-on engine.

Because observations never collapse anything, the global state after each
instruction is the same in every trial.  ``trajectory`` computes it once;
an agent's predictions at any point only need that shared global state and
the agent's own anchors.  Analytic transcript distributions enumerate the
agent's possible anchor histories, and batched sampling walks the same tree
with one uniform per (seed, agent, event, trial).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .errors import AssertionFailed, ScriptError
from .hilbert import StateVector, distribution, prepare
from .observers import (
    PROBABILITY_FLOOR,
    Anchor,
    MeasurementEvent,
    Simulation,
    agent_key,
    condition,
    substream,
)
from .script import CAssert, CPrepare, CRecord, CUnitary, Program, ScenarioScript, variant_key
from .transcripts import Transcript, TranscriptDistribution


def initial_state(program: Program) -> StateVector:
    first = program.instructions[0]
    if not isinstance(first, CPrepare):
        raise ScriptError("program does not start with a prepare instruction")
    if first.amplitudes is not None:
        return prepare(program.layout, amplitudes=first.amplitudes)
    return prepare(program.layout, product=first.product)


def execute(sim: Simulation, ins, *, settle: bool = True) -> MeasurementEvent | None:
    """Apply one compiled instruction to a simulation.

    With ``settle`` the acting agent samples and anchors its outcome;
    without it only the global record-copy happens.
    """
    if isinstance(ins, CUnitary):
        sim.apply_unitary(ins.op)
        return None
    if isinstance(ins, CRecord):
        if settle:
            if ins.kind == "ask":
                target = sim.event(ins.asked_event).agent
                eid, _ = sim.ask(ins.agent, target, ins.asked_event)
            else:
                eid, _ = sim.observe(ins.agent, ins.projectors)
            event = sim.event(eid)
        else:
            event = sim.record(ins.agent, ins.projectors, kind=ins.kind, asked_event=ins.asked_event)
        if event.event_id != ins.event_id or event.memory != ins.memory:
            raise ScriptError(f"event numbering drifted at event {ins.event_id}")
        return event
    return None


@dataclass(frozen=True)
class Trajectory:
    program: Program
    initial: StateVector
    states: tuple[StateVector, ...]  # global state after each instruction
    events: Mapping[int, MeasurementEvent]

    @property
    def final(self) -> StateVector:
        return self.states[-1]


def trajectory(program: Program) -> Trajectory:
    sim = Simulation(initial_state(program))
    states = []
    events = {}
    for ins in program.instructions:
        event = execute(sim, ins, settle=False)
        if event is not None:
            events[event.event_id] = event
        states.append(sim.state)
    return Trajectory(program, states[0], tuple(states), events)


def _branch(traj: Trajectory, idx: int, ins: CRecord, anchors: tuple[Anchor, ...]):
    """Possible outcomes of one record for an agent with the given anchors."""
    event = traj.events[ins.event_id]
    perceived = condition(traj.states[idx], anchors)
    dist = distribution(perceived, event.memory_projectors())
    out = []
    for label in event.projectors.labels:
        if dist[label] >= PROBABILITY_FLOOR:
            anchor = Anchor(event.event_id, event.memory, label, event.labels.index(label), event.time_index)
            out.append((label, dist[label], anchor))
    return out


def _check_assert(ins: CAssert, nodes) -> None:
    current: dict[Transcript, float] = {}
    for transcript, p, _ in nodes:
        current[transcript] = current.get(transcript, 0.0) + p
    keys = set(current) | set(ins.expected)
    bad = {
        k: (current.get(k, 0.0), ins.expected.get(k, 0.0))
        for k in keys
        if abs(current.get(k, 0.0) - ins.expected.get(k, 0.0)) > ins.tol
    }
    if bad:
        raise AssertionFailed(
            f"step {ins.step}: {ins.agent}'s distribution differs from expectation "
            f"(actual, expected) = {bad}"
        )


def transcript_distribution(
    program: Program, agent: str, traj: Trajectory | None = None, *, check_asserts: bool = True
) -> TranscriptDistribution:
    """Exact distribution of ``agent``'s transcript under the hanging-on rule."""
    traj = traj or trajectory(program)
    nodes: list[tuple[Transcript, float, tuple[Anchor, ...]]] = [((), 1.0, ())]
    for idx, ins in enumerate(program.instructions):
        if isinstance(ins, CRecord) and ins.agent == agent:
            nodes = [
                (transcript + (label,), p * q, anchors + (anchor,))
                for transcript, p, anchors in nodes
                for label, q, anchor in _branch(traj, idx, ins, anchors)
            ]
        elif isinstance(ins, CAssert) and ins.agent == agent and check_asserts:
            _check_assert(ins, nodes)
    merged: dict[Transcript, float] = {}
    for transcript, p, _ in nodes:
        merged[transcript] = merged.get(transcript, 0.0) + p
    return TranscriptDistribution(merged)


def sample_transcripts(
    program: Program,
    agent: str,
    trials: np.ndarray,
    seed: int,
    traj: Trajectory | None = None,
    n_total: int | None = None,
) -> tuple[np.ndarray, list[Transcript]]:
    """Sample ``agent``'s transcript for each trial index in ``trials``.

    Returns per-trial codes indexing into the returned transcript list.  The
    draw for trial t at event e is the t-th uniform of stream (seed, agent, e),
    so results do not depend on how trials are grouped or parallelized.
    """
    traj = traj or trajectory(program)
    trials = np.asarray(trials, dtype=np.int64)
    n_total = int(trials.max()) + 1 if n_total is None and trials.size else (n_total or 0)
    groups: list[tuple[Transcript, tuple[Anchor, ...], np.ndarray]] = [((), (), np.arange(trials.size))]
    for idx, ins in enumerate(program.instructions):
        if not (isinstance(ins, CRecord) and ins.agent == agent):
            continue
        uniforms = substream(seed, agent, ins.event_id).random(n_total)[trials]
        new_groups = []
        for transcript, anchors, members in groups:
            options = _branch(traj, idx, ins, anchors)
            probs = np.array([q for _, q, _ in options])
            cdf = np.cumsum(probs) / probs.sum()
            picks = np.searchsorted(cdf, uniforms[members], side="right")
            picks = np.minimum(picks, len(options) - 1)
            for k, (label, _, anchor) in enumerate(options):
                chosen = members[picks == k]
                if chosen.size:
                    new_groups.append((transcript + (label,), anchors + (anchor,), chosen))
        groups = new_groups
    transcripts = [t for t, _, _ in groups]
    codes = np.empty(trials.size, dtype=np.int64)
    for code, (_, _, members) in enumerate(groups):
        codes[members] = code
    return codes, transcripts


def setting_choices(script: ScenarioScript, seed: int, trials: int) -> np.ndarray:
    """Per-trial variant index, drawn independently for each parameter."""
    names = sorted(script.parameters)
    index = np.zeros(trials, dtype=np.int64)
    for name in names:
        n_opts = len(script.parameters[name])
        rng = np.random.default_rng(np.random.SeedSequence([seed, agent_key("setting:" + name)]))
        index = index * n_opts + rng.integers(n_opts, size=trials)
    return index


def variant_for_trial(script: ScenarioScript, seed: int, trial: int) -> dict[str, str]:
    variants = script.variants()
    return variants[int(setting_choices(script, seed, trial + 1)[trial])]


@dataclass
class VariantRun:
    program: Program
    trajectory: Trajectory
    trials: np.ndarray  # global trial indices assigned to this variant
    samples: dict[str, tuple[np.ndarray, list[Transcript]]]

    def frequencies(self, agent: str) -> dict[Transcript, float]:
        codes, transcripts = self.samples[agent]
        counts = np.bincount(codes, minlength=len(transcripts))
        n = max(codes.size, 1)
        return {t: counts[i] / n for i, t in enumerate(transcripts) if counts[i]}

    def counts(self, agent: str) -> dict[Transcript, int]:
        codes, transcripts = self.samples[agent]
        counts = np.bincount(codes, minlength=len(transcripts))
        return {t: int(counts[i]) for i, t in enumerate(transcripts) if counts[i]}

    def transcript_of(self, agent: str, position: int) -> Transcript:
        codes, transcripts = self.samples[agent]
        return transcripts[codes[position]]


def run_trials(
    script: ScenarioScript,
    trials: int,
    seed: int,
    agents: list[str] | None = None,
    jobs: int = 1,
) -> dict[str, VariantRun]:
    """Sample every agent's transcript in ``trials`` independent trials."""
    agents = list(script.agents) if agents is None else agents
    choice = setting_choices(script, seed, trials)
    runs: dict[str, VariantRun] = {}
    for k, variant in enumerate(script.variants()):
        members = np.flatnonzero(choice == k)
        program = script.compile(variant)
        runs[variant_key(variant)] = VariantRun(program, trajectory(program), members, {})

    tasks = [(key, agent) for key in runs for agent in agents]

    def work(task):
        key, agent = task
        run = runs[key]
        return task, sample_transcripts(run.program, agent, run.trials, seed, run.trajectory, trials)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]
    for (key, agent), sample in results:
        runs[key].samples[agent] = sample
    return runs


def iter_run(
    script: ScenarioScript,
    seed: int = 0,
    trial: int = 0,
    variant: Mapping[str, str] | None = None,
) -> Iterator[tuple[int, object, Simulation]]:
    """Step through one full trial with every agent sampling and anchoring.

    Yields ``(instruction index, instruction, simulation)`` after each
    instruction; the simulation is live, so callers may query it.
    """
    if variant is None:
        variant = variant_for_trial(script, seed, trial) if script.parameters else {}
    program = script.compile(variant)
    sim = Simulation(initial_state(program), seed=seed, trial=trial)
    for agent in script.agents:
        sim.register_agent(agent)
    for idx, ins in enumerate(program.instructions):
        execute(sim, ins)
        yield idx, ins, sim


def run_once(script: ScenarioScript, seed: int = 0, trial: int = 0, variant=None) -> Simulation:
    sim = None
    for _, _, sim in iter_run(script, seed, trial, variant):
        pass
    return sim
