"""Scenario scripts: declarative protocols and their structured-text form.

A script lists steps over declared registers and agents.  Targets of the
form ``"@name"`` denote the memory register written by the earlier
observation or ask called ``name``.  Spin angles may name a parameter; each
parameter is chosen uniformly at random per trial from its options, and every
combination of choices is a *variant* of the script.

Document schema (JSON or YAML)::

    name: str
    layout: [[register, dim], ...]
    agents: [agent, ...]
    parameters: {param: {option: angle}}          # optional
    steps:
      - {op: prepare, amplitudes: [...]} | {op: prepare, product: {reg: [...]}}
      - {op: unitary, targets: [...], matrix: [[...]]}
      - {op: observe, agent, targets, basis, name}
      - {op: ask, agent, target, event, name}
      - {op: assert, agent, expected: {"a,b": p}, tol}
    metadata: {...}                                # informational only

Complex numbers are written as plain numbers or ``[re, im]`` pairs.  A
basis is ``{spin: angle-or-param}``, ``{computational: [labels]}`` or
``{projectors: {label: matrix}}``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence, Union

import numpy as np

from .errors import (
    BadDimension,
    BadParams,
    ImmutableMemory,
    ScriptError,
    UnknownAgent,
    UnknownEvent,
    UnknownRegister,
)
from .hilbert import (
    ProjectorSet,
    RegisterLayout,
    UnitaryOp,
    computational_projectors,
    spin_projectors,
)
from .observers import memory_labels, memory_register_id

MEMORY_PREFIX = "@"


@dataclass(frozen=True)
class Basis:
    kind: str  # "spin" | "computational" | "projectors"
    angle: float | str | None = None
    labels: tuple[str, ...] = ()
    projectors: tuple[tuple[str, np.ndarray], ...] = ()


@dataclass(frozen=True)
class Prepare:
    amplitudes: tuple[complex, ...] | None = None
    product: Mapping[str, tuple[complex, ...]] | None = None


@dataclass(frozen=True, eq=False)
class Unitary:
    targets: tuple[str, ...]
    matrix: np.ndarray


@dataclass(frozen=True)
class Observe:
    agent: str
    targets: tuple[str, ...]
    basis: Basis
    name: str | None = None


@dataclass(frozen=True)
class Ask:
    agent: str
    target: str
    event: str
    name: str | None = None


@dataclass(frozen=True)
class AssertDistribution:
    agent: str
    expected: Mapping[tuple[str, ...], float]
    tol: float = 1e-9


Step = Union[Prepare, Unitary, Observe, Ask, AssertDistribution]


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    layout: RegisterLayout
    agents: tuple[str, ...]
    steps: tuple[Step, ...]
    parameters: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def variants(self) -> list[dict[str, str]]:
        """Every combination of parameter options, in sorted parameter order."""
        names = sorted(self.parameters)
        choices = [list(self.parameters[p]) for p in names]
        return [dict(zip(names, combo)) for combo in itertools.product(*choices)]

    def compile(self, variant: Mapping[str, str] | None = None) -> "Program":
        return compile_script(self, variant or {})


# --- compiled form -------------------------------------------------------


@dataclass(frozen=True)
class CPrepare:
    amplitudes: np.ndarray | None
    product: Mapping[str, np.ndarray] | None


@dataclass(frozen=True)
class CUnitary:
    op: UnitaryOp


@dataclass(frozen=True)
class CRecord:
    """One observation or ask; ``event_id`` and ``memory`` are fixed at compile time."""

    event_id: int
    agent: str
    projectors: ProjectorSet
    memory: str
    memory_dim: int
    kind: str
    asked_event: int | None
    name: str | None


@dataclass(frozen=True)
class CAssert:
    agent: str
    expected: Mapping[tuple[str, ...], float]
    tol: float
    step: int


Instruction = Union[CPrepare, CUnitary, CRecord, CAssert]


@dataclass(frozen=True)
class Program:
    script: ScenarioScript
    variant: Mapping[str, str]
    layout: RegisterLayout
    final_layout: RegisterLayout
    instructions: tuple[Instruction, ...]

    @property
    def records(self) -> list[CRecord]:
        return [ins for ins in self.instructions if isinstance(ins, CRecord)]

    def events_of(self, agent: str) -> list[CRecord]:
        return [r for r in self.records if r.agent == agent]

    def event_named(self, name: str) -> CRecord:
        for rec in self.records:
            if rec.name == name:
                return rec
        raise UnknownEvent(f"no event named {name!r}")

    @property
    def variant_key(self) -> str:
        return variant_key(self.variant)


def variant_key(variant: Mapping[str, str]) -> str:
    if not variant:
        return "default"
    return ",".join(f"{k}={variant[k]}" for k in sorted(variant))


def _resolve_angle(angle: float | str, params: Mapping[str, Mapping[str, float]], variant) -> float:
    if isinstance(angle, str):
        if angle not in params:
            raise BadParams(f"unknown parameter {angle!r}")
        if angle not in variant:
            raise BadParams(f"parameter {angle!r} has no chosen option")
        option = variant[angle]
        if option not in params[angle]:
            raise BadParams(f"parameter {angle!r} has no option {option!r}")
        return float(params[angle][option])
    return float(angle)


def compile_script(script: ScenarioScript, variant: Mapping[str, str]) -> Program:
    """Resolve names, parameters and memory references into concrete instructions."""
    for p in variant:
        if p not in script.parameters:
            raise BadParams(f"variant names unknown parameter {p!r}")
    agents = set(script.agents)
    layout = script.layout
    base_ids = set(layout.ids)
    named: dict[str, CRecord] = {}
    instructions: list[Instruction] = []
    event_id = 0
    memory_dims: dict[str, int] = {}

    def resolve(target: str) -> str:
        if target.startswith(MEMORY_PREFIX):
            ref = target[len(MEMORY_PREFIX):]
            if ref not in named:
                raise UnknownEvent(f"memory reference {target!r} does not point to an earlier event")
            return named[ref].memory
        if target not in base_ids:
            raise UnknownRegister(f"step targets undeclared register {target!r}")
        return target

    def dim_of(rid: str) -> int:
        return memory_dims[rid] if rid in memory_dims else layout.dim(rid)

    def check_agent(agent: str) -> None:
        if agent not in agents:
            raise UnknownAgent(f"agent {agent!r} is not declared by the script")

    def add_record(agent, projectors, kind, asked, name):
        nonlocal event_id
        memory = memory_register_id(agent, event_id)
        dim = len(memory_labels(projectors))
        rec = CRecord(event_id, agent, projectors, memory, dim, kind, asked, name)
        memory_dims[memory] = dim
        instructions.append(rec)
        if name is not None:
            if name in named:
                raise ScriptError(f"event name {name!r} used twice")
            named[name] = rec
        event_id += 1

    if not script.steps or not isinstance(script.steps[0], Prepare):
        raise ScriptError("a script starts with exactly one prepare step")
    for i, step in enumerate(script.steps):
        if isinstance(step, Prepare):
            if i != 0:
                raise ScriptError("prepare is only allowed as the first step")
            amps = None if step.amplitudes is None else np.asarray(step.amplitudes, dtype=complex)
            prod = None
            if step.product is not None:
                prod = {resolve(r): np.asarray(v, dtype=complex) for r, v in step.product.items()}
            instructions.append(CPrepare(amps, prod))
        elif isinstance(step, Unitary):
            if any(t.startswith(MEMORY_PREFIX) for t in step.targets):
                raise ImmutableMemory(f"step {i} applies a unitary to a memory register")
            targets = tuple(resolve(t) for t in step.targets)
            instructions.append(CUnitary(UnitaryOp(targets, step.matrix)))
        elif isinstance(step, Observe):
            check_agent(step.agent)
            targets = tuple(resolve(t) for t in step.targets)
            projectors = _basis_projectors(step.basis, targets, dim_of, script.parameters, variant)
            add_record(step.agent, projectors, "observe", None, step.name)
        elif isinstance(step, Ask):
            check_agent(step.agent)
            check_agent(step.target)
            if step.event not in named:
                raise UnknownEvent(f"ask refers to unknown or later event {step.event!r}")
            asked = named[step.event]
            if asked.agent != step.target:
                raise UnknownEvent(f"event {step.event!r} was performed by {asked.agent!r}, not {step.target!r}")
            labels = memory_labels(asked.projectors)
            projectors = computational_projectors((asked.memory,), asked.memory_dim, labels)
            add_record(step.agent, projectors, "ask", asked.event_id, step.name)
        elif isinstance(step, AssertDistribution):
            check_agent(step.agent)
            instructions.append(CAssert(step.agent, dict(step.expected), step.tol, i))
        else:  # pragma: no cover - guarded by the Step union
            raise ScriptError(f"unknown step {step!r}")

    final_layout = layout
    for rec in instructions:
        if isinstance(rec, CRecord):
            final_layout = final_layout.extend(rec.memory, rec.memory_dim)
    return Program(script, dict(variant), layout, final_layout, tuple(instructions))


def _basis_projectors(basis: Basis, targets, dim_of, params, variant) -> ProjectorSet:
    if basis.kind == "spin":
        if len(targets) != 1:
            raise ScriptError("a spin basis acts on exactly one register")
        if dim_of(targets[0]) != 2:
            raise BadDimension(f"spin measurement on {targets[0]!r} of dimension {dim_of(targets[0])}")
        return spin_projectors(_resolve_angle(basis.angle, params, variant), targets[0])
    joint = math.prod(dim_of(t) for t in targets)
    if basis.kind == "computational":
        labels = basis.labels or tuple(str(i) for i in range(joint))
        return computational_projectors(targets, joint, labels)
    if basis.kind == "projectors":
        return ProjectorSet(targets, basis.projectors)
    raise ScriptError(f"unknown basis kind {basis.kind!r}")


# --- structured-text serialization ----------------------------------------


def _encode_complex(z: complex) -> float | list[float]:
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def _decode_complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ScriptError(f"complex number must be [re, im], got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    return complex(value)


def _encode_matrix(m: np.ndarray) -> list:
    return [[_encode_complex(z) for z in row] for row in np.asarray(m)]


def _decode_matrix(rows) -> np.ndarray:
    return np.array([[_decode_complex(z) for z in row] for row in rows], dtype=complex)


def _encode_vector(v) -> list:
    return [_encode_complex(z) for z in v]


def _decode_vector(v) -> tuple[complex, ...]:
    return tuple(_decode_complex(z) for z in v)


def transcript_key(outcomes: Sequence[str]) -> str:
    return ",".join(outcomes)


def parse_transcript_key(key: str) -> tuple[str, ...]:
    return tuple(key.split(",")) if key else ()


def _encode_basis(basis: Basis) -> dict:
    if basis.kind == "spin":
        return {"spin": basis.angle}
    if basis.kind == "computational":
        return {"computational": list(basis.labels)}
    return {"projectors": {label: _encode_matrix(m) for label, m in basis.projectors}}


def _decode_basis(doc: Mapping) -> Basis:
    if not isinstance(doc, Mapping) or len(doc) != 1:
        raise ScriptError(f"basis must have exactly one of spin/computational/projectors: {doc!r}")
    (kind, value), = doc.items()
    if kind == "spin":
        return Basis("spin", angle=value if isinstance(value, str) else float(value))
    if kind == "computational":
        return Basis("computational", labels=tuple(str(v) for v in value))
    if kind == "projectors":
        return Basis("projectors", projectors=tuple((str(k), _decode_matrix(m)) for k, m in value.items()))
    raise ScriptError(f"unknown basis kind {kind!r}")


def script_to_dict(script: ScenarioScript) -> dict:
    steps = []
    for step in script.steps:
        if isinstance(step, Prepare):
            if step.amplitudes is not None:
                steps.append({"op": "prepare", "amplitudes": _encode_vector(step.amplitudes)})
            else:
                steps.append({"op": "prepare", "product": {k: _encode_vector(v) for k, v in step.product.items()}})
        elif isinstance(step, Unitary):
            steps.append({"op": "unitary", "targets": list(step.targets), "matrix": _encode_matrix(step.matrix)})
        elif isinstance(step, Observe):
            steps.append({"op": "observe", "agent": step.agent, "targets": list(step.targets),
                          "basis": _encode_basis(step.basis), "name": step.name})
        elif isinstance(step, Ask):
            steps.append({"op": "ask", "agent": step.agent, "target": step.target,
                          "event": step.event, "name": step.name})
        elif isinstance(step, AssertDistribution):
            steps.append({"op": "assert", "agent": step.agent,
                          "expected": {transcript_key(k): v for k, v in step.expected.items()},
                          "tol": step.tol})
    return {
        "name": script.name,
        "layout": [[rid, dim] for rid, dim in script.layout.registers],
        "agents": list(script.agents),
        "parameters": {p: dict(opts) for p, opts in script.parameters.items()},
        "steps": steps,
        "metadata": dict(script.metadata),
    }


def _require(doc: Mapping, key: str, where: str):
    if key not in doc:
        raise ScriptError(f"{where} is missing field {key!r}")
    return doc[key]


def script_from_dict(doc: Mapping) -> ScenarioScript:
    if not isinstance(doc, Mapping):
        raise ScriptError("script document must be a mapping")
    layout = RegisterLayout([(str(r), int(d)) for r, d in _require(doc, "layout", "script")])
    steps: list[Step] = []
    for i, s in enumerate(_require(doc, "steps", "script")):
        where = f"step {i}"
        op = _require(s, "op", where)
        if op == "prepare":
            if "amplitudes" in s:
                steps.append(Prepare(amplitudes=_decode_vector(s["amplitudes"])))
            else:
                prod = _require(s, "product", where)
                steps.append(Prepare(product={k: _decode_vector(v) for k, v in prod.items()}))
        elif op == "unitary":
            steps.append(Unitary(tuple(_require(s, "targets", where)), _decode_matrix(_require(s, "matrix", where))))
        elif op == "observe":
            steps.append(Observe(_require(s, "agent", where), tuple(_require(s, "targets", where)),
                                 _decode_basis(_require(s, "basis", where)), s.get("name")))
        elif op == "ask":
            steps.append(Ask(_require(s, "agent", where), _require(s, "target", where),
                             _require(s, "event", where), s.get("name")))
        elif op == "assert":
            expected = {parse_transcript_key(k): float(v) for k, v in _require(s, "expected", where).items()}
            steps.append(AssertDistribution(_require(s, "agent", where), expected, float(s.get("tol", 1e-9))))
        else:
            raise ScriptError(f"{where}: unknown op {op!r}")
    params = {str(p): {str(k): float(v) for k, v in opts.items()} for p, opts in doc.get("parameters", {}).items()}
    return ScenarioScript(
        name=str(doc.get("name", "script")),
        layout=layout,
        agents=tuple(_require(doc, "agents", "script")),
        steps=tuple(steps),
        parameters=params,
        metadata=dict(doc.get("metadata", {})),
    )


def dump_script(script: ScenarioScript, path: str | Path) -> None:
    path = Path(path)
    doc = script_to_dict(script)
    if path.suffix in (".yaml", ".yml"):
        import yaml

        path.write_text(yaml.safe_dump(doc, sort_keys=False))
    else:
        path.write_text(json.dumps(doc, indent=2))


def load_script(path: str | Path) -> ScenarioScript:
    path = Path(path)
    text = path.read_text()
    if path.suffix in (".yaml", ".yml"):
        import yaml

        doc = yaml.safe_load(text)
    else:
        doc = json.loads(text)
    return script_from_dict(doc)
