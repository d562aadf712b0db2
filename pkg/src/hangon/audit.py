"""Reasoning audit for the Frauchiger-Renner protocol.

Each agent's certainties (rule Q) are computed by the hanging-on engine from
that agent's own perceptual state at the moment of its observation.  In
absolute-facts mode certainties are transferred between agents (rule C) and
the chain ends in a non-contradiction (rule S) violation.  In consol mode the
final agent reasons from its own record only; the first transfer attempt
needs another agent's record and is refused with ForbiddenComparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .engine import Trajectory, trajectory
from .errors import ForbiddenComparison, PreconditionNotMet
from .hilbert import distribution
from .observers import CERTAINTY_TOL, Anchor, condition
from .script import CRecord, Program

MODES = ("consol", "absolute-facts")
PREMISE = ("okbar", "ok")
FINAL = "Final"


@dataclass(frozen=True)
class TraceStep:
    rule: str  # "Q" | "C" | "S"
    agent: str
    premises: tuple[str, ...]
    conclusion: str
    probability: float | None = None


@dataclass(frozen=True)
class AuditResult:
    mode: str
    trace: tuple[TraceStep, ...]
    verdict: str  # "contradiction" | "consistent" | "blocked-at-C"
    blocked: str | None = None


@dataclass(frozen=True)
class Certainty:
    agent: str
    given: str
    statement: str
    probability: float


class _FRModel:
    def __init__(self):
        from .scenarios import builtin

        self.program: Program = builtin("frauchiger_renner").compile()
        self.traj: Trajectory = trajectory(self.program)
        self.index = {
            ins.name: (i, ins)
            for i, ins in enumerate(self.program.instructions)
            if isinstance(ins, CRecord)
        }

    def anchor(self, name: str, outcome: str) -> Anchor:
        event = self.traj.events[self.index[name][1].event_id]
        return Anchor(event.event_id, event.memory, outcome, event.labels.index(outcome), event.time_index)

    def predict(self, at: str, anchors: Sequence[Anchor], target: str) -> dict[str, float]:
        """Distribution an agent holding ``anchors`` assigns, just after ``at``, to ``target``'s outcome.

        A target that already happened is read off its memory register; a
        later one is predicted from its projectors.
        """
        idx, _ = self.index[at]
        t_idx, t_rec = self.index[target]
        perceived = condition(self.traj.states[idx], anchors)
        if t_idx <= idx:
            event = self.traj.events[t_rec.event_id]
            dist = distribution(perceived, event.memory_projectors())
            return {k: v for k, v in dist.items() if k in event.projectors.labels}
        return distribution(perceived, t_rec.projectors)


@lru_cache(maxsize=1)
def _model() -> _FRModel:
    return _FRModel()


def q_certainties() -> dict[str, Certainty]:
    """The three first-person certainties the FR chain relies on, computed by the engine."""
    m = _model()
    found = {
        "Wbar": Certainty("Wbar", "Wbar observed okbar", "F observed up",
                          m.predict("wbar_obs", [m.anchor("wbar_obs", "okbar")], "f_obs")["up"]),
        "F": Certainty("F", "F observed up", "Fbar observed t",
                       m.predict("f_obs", [m.anchor("f_obs", "up")], "fbar_obs")["t"]),
        "Fbar": Certainty("Fbar", "Fbar observed t", "W observes fail",
                          m.predict("f_obs", [m.anchor("fbar_obs", "t")], "w_obs")["fail"]),
    }
    for c in found.values():
        if c.probability < 1.0 - CERTAINTY_TOL:
            raise PreconditionNotMet(f"{c.agent} is not certain that {c.statement} (p={c.probability})")
    return found


def _outcomes(transcript) -> tuple[str, ...]:
    return tuple(entry[1] if isinstance(entry, (tuple, list)) else entry for entry in transcript)


class _Records:
    """Access to agents' certainties; consol mode only admits the reasoner's own."""

    def __init__(self, reasoner: str, mode: str, certainties: Mapping[str, Certainty]):
        self.reasoner = reasoner
        self.mode = mode
        self.certainties = certainties

    def certainty_of(self, agent: str) -> Certainty:
        if self.mode == "consol" and agent != self.reasoner:
            raise ForbiddenComparison(
                f"{self.reasoner} cannot use what {agent} is certain of: that needs {agent}'s private record"
            )
        return self.certainties[agent]


def fr_rule_audit(transcripts: Mapping[str, Sequence], mode: str) -> AuditResult:
    """Replay the FR argument for a run whose final agent heard (okbar, ok)."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    final = _outcomes(transcripts.get(FINAL, ()))
    if final != PREMISE:
        raise PreconditionNotMet(f"final agent's record is {final}, not {PREMISE}")
    certs = q_certainties()
    records = _Records(FINAL, mode, certs)
    heard_wbar, heard_w = "Wbar reported okbar", "W reported ok"
    trace: list[TraceStep] = []

    if mode == "consol":
        m = _model()
        anchors = [m.anchor("final_asks_wbar", "okbar"), m.anchor("final_asks_w", "ok")]
        for target, label, heard in (("wbar_obs", "okbar", heard_wbar), ("w_obs", "ok", heard_w)):
            p = m.predict("final_asks_w", anchors, target)[label]
            trace.append(TraceStep("Q", FINAL, (heard,), f"{FINAL} is certain that the record of {target} reads {label}", p))
        try:
            records.certainty_of("Wbar")
        except ForbiddenComparison as exc:
            return AuditResult(mode, tuple(trace), "blocked-at-C", str(exc))
        raise AssertionError("consol mode granted a cross-agent record")  # pragma: no cover

    wbar, f, fbar = (records.certainty_of(a) for a in ("Wbar", "F", "Fbar"))
    for c in (wbar, f, fbar):
        trace.append(TraceStep("Q", c.agent, (c.given,), f"{c.agent} is certain that {c.statement}", c.probability))
    trace.append(TraceStep("C", "Wbar", (trace[0].conclusion, trace[1].conclusion),
                           f"Wbar is certain that {f.statement}"))
    trace.append(TraceStep("C", "Wbar", (trace[3].conclusion, trace[2].conclusion),
                           f"Wbar is certain that {fbar.statement}"))
    trace.append(TraceStep("C", FINAL, (heard_wbar, trace[4].conclusion),
                           f"{FINAL} is certain that {fbar.statement}"))
    contradiction = fbar.statement == "W observes fail" and final[1] == "ok"
    trace.append(TraceStep("S", FINAL, (trace[5].conclusion, heard_w),
                           "W observes fail and W observes ok" if contradiction else "no conflict"))
    return AuditResult(mode, tuple(trace), "contradiction" if contradiction else "consistent")


def audit_report(report, script, runs, mode: str) -> None:
    """Audit every (okbar, ok) trial of a frauchiger_renner run and record the verdicts."""
    from .errors import WrongScenario

    if script.name != "frauchiger_renner":
        raise WrongScenario("the rule audit applies to frauchiger_renner runs only")
    mode = "absolute-facts" if mode == "absolute" else mode
    if runs is None:
        raise PreconditionNotMet("the audit needs sampled transcripts (engine enabled)")
    run = runs["default"]
    codes, transcripts = run.samples[FINAL]
    hits = np.flatnonzero(np.array([transcripts[c] == PREMISE for c in codes], dtype=bool))
    verdicts: dict[str, int] = {}
    example = None
    for position in hits:
        per_agent = {a: run.transcript_of(a, position) for a in run.samples}
        result = fr_rule_audit(per_agent, mode)
        verdicts[result.verdict] = verdicts.get(result.verdict, 0) + 1
        example = example or result
    expected = "contradiction" if mode == "absolute-facts" else "blocked-at-C"
    report.audit = {
        "mode": mode,
        "audited_trials": int(hits.size),
        "verdicts": verdicts,
        "example_trace": None if example is None else [
            {"rule": s.rule, "agent": s.agent, "premises": list(s.premises),
             "conclusion": s.conclusion, "probability": s.probability}
            for s in example.trace
        ],
        "blocked": None if example is None else example.blocked,
    }
    report.add_check(f"fr-audit[{mode}]", set(verdicts) <= {expected}, f"verdicts {verdicts}")
