"""Textbook-collapse reference simulator and statistical comparison.

This module deliberately shares no numerical code with the hanging-on
engine: states are kept as plain arrays over an explicitly tracked register
list, operators act through gather/scatter index permutations, and the
record-copy unitary is rebuilt here from its definition.  Only the compiled
script (a data structure) is shared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import OutcomeSpaceMismatch, ScriptError, StateTooLarge
from .observers import agent_key
from .script import CPrepare, CRecord, CUnitary, Program, ScenarioScript
from .transcripts import Transcript, TranscriptDistribution

MAX_PATHS = 2**20
MAX_DENSE_DIM = 2**12
BRANCH_FLOOR = 1e-12
Z_BOUND = 4.0

MODES = ("textbook", "premature-collapse")


def _as_program(script: Program | ScenarioScript, variant: Mapping[str, str] | None) -> Program:
    if isinstance(script, Program):
        return script
    if script.parameters and variant is None:
        raise ScriptError(f"script {script.name!r} has parameters; choose a variant")
    return script.compile(variant or {})


def _initial(program: Program) -> np.ndarray:
    prep = program.instructions[0]
    if not isinstance(prep, CPrepare):
        raise ScriptError("program does not start with a prepare instruction")
    if prep.amplitudes is not None:
        psi = np.array(prep.amplitudes, dtype=complex)
    else:
        psi = np.ones(1, dtype=complex)
        for rid, dim in program.layout.registers:
            v = np.zeros(dim, dtype=complex)
            v[0] = 1.0
            if rid in prep.product:
                v = np.array(prep.product[rid], dtype=complex)
            psi = np.kron(psi, v / np.sqrt(np.vdot(v, v).real))
    return psi / np.sqrt(np.vdot(psi, psi).real)


def _gather_order(positions: list[int], dims: list[int]) -> np.ndarray:
    """order[j] = flat index of the j-th basis state when targets come first."""
    rest = [k for k in range(len(dims)) if k not in positions]
    flat = np.arange(math.prod(dims)).reshape(dims)
    return np.transpose(flat, positions + rest).reshape(-1)


def _act(matrix: np.ndarray, positions: list[int], dims: list[int], columns: np.ndarray) -> np.ndarray:
    order = _gather_order(positions, dims)
    d = matrix.shape[0]
    block = columns[order].reshape(d, -1)
    out = np.empty_like(columns)
    out[order] = (matrix @ block).reshape(columns.shape)
    return out


def _shift(m: int, k: int) -> np.ndarray:
    s = np.zeros((m, m), dtype=complex)
    for j in range(m):
        s[(j + k) % m, j] = 1.0
    return s


def _record_copy(rec: CRecord) -> np.ndarray:
    return sum(np.kron(proj, _shift(rec.memory_dim, i)) for i, (_, proj) in enumerate(rec.projectors.outcomes))


class _Registers:
    def __init__(self, program: Program):
        self.ids = list(program.layout.ids)
        self.dims = list(program.layout.dims)

    def positions(self, targets) -> list[int]:
        return [self.ids.index(t) for t in targets]

    def add(self, rid: str, dim: int) -> None:
        self.ids.append(rid)
        self.dims.append(dim)
        if math.prod(self.dims) > MAX_DENSE_DIM:
            raise StateTooLarge(f"oracle dense limit {MAX_DENSE_DIM} exceeded")


def run_collapse(
    script: Program | ScenarioScript,
    agent: str,
    mode: str = "textbook",
    variant: Mapping[str, str] | None = None,
) -> TranscriptDistribution:
    """Exact transcript distribution for ``agent`` under projection postulates.

    textbook: the agent's own observations project the global state, every
    other interaction is unitary.  premature-collapse: every agent's
    observation projects the global state.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    program = _as_program(script, variant)
    regs = _Registers(program)
    columns = _initial(program)[:, None]
    probs = np.ones(1)
    paths: list[Transcript] = [()]
    for ins in program.instructions[1:]:
        if isinstance(ins, CUnitary):
            columns = _act(ins.op.matrix, regs.positions(ins.op.targets), regs.dims, columns)
        elif isinstance(ins, CRecord):
            m = ins.memory_dim
            fresh = np.zeros(m)
            fresh[0] = 1.0
            columns = (columns[:, None, :] * fresh[None, :, None]).reshape(-1, columns.shape[1])
            regs.add(ins.memory, m)
            targets = regs.positions(ins.projectors.targets + (ins.memory,))
            columns = _act(_record_copy(ins), targets, regs.dims, columns)
            if mode == "premature-collapse" or ins.agent == agent:
                columns, probs, paths = _collapse(
                    columns, probs, paths, m, ins.projectors.labels, record=ins.agent == agent
                )
    merged: dict[Transcript, float] = {}
    for path, p in zip(paths, probs):
        merged[path] = merged.get(path, 0.0) + float(p)
    return TranscriptDistribution(merged)


def _collapse(columns, probs, paths, m, labels, record):
    # The fresh memory register is the last (least significant) axis.
    shaped = columns.reshape(-1, m, columns.shape[1])
    new_cols, new_probs, new_paths = [], [], []
    for i, label in enumerate(labels):
        part = np.zeros_like(shaped)
        part[:, i, :] = shaped[:, i, :]
        part = part.reshape(columns.shape)
        weights = np.einsum("ij,ij->j", part.conj(), part).real
        for b in np.flatnonzero(weights >= BRANCH_FLOOR):
            new_cols.append(part[:, b] / np.sqrt(weights[b]))
            new_probs.append(probs[b] * weights[b])
            new_paths.append(paths[b] + (label,) if record else paths[b])
    if len(new_paths) > MAX_PATHS:
        raise StateTooLarge(f"more than {MAX_PATHS} collapse paths")
    return np.stack(new_cols, axis=1), np.array(new_probs), new_paths


def composed_final_state(script: Program | ScenarioScript, variant: Mapping[str, str] | None = None) -> np.ndarray:
    """Initial state times the product of every unitary, as one dense matrix.

    All memory registers are present from the start in state 0; each
    scenario unitary and record-copy unitary is embedded as a full matrix on
    the final layout and the matrices are multiplied before touching the state.
    """
    program = _as_program(script, variant)
    records = [ins for ins in program.instructions if isinstance(ins, CRecord)]
    regs = _Registers(program)
    for rec in records:
        regs.add(rec.memory, rec.memory_dim)
    dim = math.prod(regs.dims)
    psi = _initial(program)
    for rec in records:
        fresh = np.zeros(rec.memory_dim)
        fresh[0] = 1.0
        psi = np.kron(psi, fresh)
    total = np.eye(dim, dtype=complex)
    for ins in program.instructions[1:]:
        if isinstance(ins, CUnitary):
            full = _act(ins.op.matrix, regs.positions(ins.op.targets), regs.dims, np.eye(dim, dtype=complex))
        elif isinstance(ins, CRecord):
            targets = regs.positions(ins.projectors.targets + (ins.memory,))
            full = _act(_record_copy(ins), targets, regs.dims, np.eye(dim, dtype=complex))
        else:
            continue
        total = full @ total
    return total @ psi


def sample_frequencies(
    engine: str,
    script: Program | ScenarioScript,
    agent: str,
    trials: int,
    seed: int,
    variant: Mapping[str, str] | None = None,
    mode: str = "textbook",
) -> dict[Transcript, float]:
    """Empirical transcript frequencies from ``trials`` seeded trials."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    program = _as_program(script, variant)
    if engine == "hanging-on":
        from .engine import sample_transcripts

        codes, transcripts = sample_transcripts(program, agent, np.arange(trials), seed)
    elif engine == "collapse":
        dist = run_collapse(program, agent, mode)
        transcripts = list(dist)
        cdf = np.cumsum([dist[t] for t in transcripts])
        rng = np.random.default_rng(np.random.SeedSequence([seed, agent_key(agent), 1]))
        codes = np.minimum(np.searchsorted(cdf / cdf[-1], rng.random(trials), side="right"), len(transcripts) - 1)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    counts = np.bincount(codes, minlength=len(transcripts))
    return {t: counts[i] / trials for i, t in enumerate(transcripts) if counts[i]}


@dataclass(frozen=True)
class Verdict:
    passed: bool
    z_scores: dict[Transcript, float]
    bounds: dict[Transcript, float]


def z_bound(p: float, trials: int) -> float:
    return Z_BOUND * math.sqrt(p * (1.0 - p) / trials) + 1e-9


def compare(analytic: Mapping[Transcript, float], empirical: Mapping[Transcript, float], trials: int) -> Verdict:
    """Per-outcome 4-sigma normal-approximation test of frequencies against probabilities."""
    extra = set(empirical) - set(analytic)
    if extra:
        raise OutcomeSpaceMismatch(f"empirical outcomes {sorted(extra)} are not in the analytic outcome space")
    z_scores, bounds = {}, {}
    passed = True
    for key, p in analytic.items():
        f = empirical.get(key, 0.0)
        sigma = math.sqrt(max(p * (1.0 - p), 0.0) / trials)
        diff = abs(f - p)
        bounds[key] = z_bound(p, trials)
        if sigma > 0:
            z_scores[key] = (f - p) / sigma
        else:
            z_scores[key] = 0.0 if diff <= 1e-9 else math.inf
        passed = passed and diff <= bounds[key]
    return Verdict(passed, z_scores, bounds)
