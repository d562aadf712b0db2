"""Scenario reports and their serializations.

A report is organized as variant -> agent -> table.  Every table belongs to
exactly one agent, so the format has no way to express a row that joins two
agents' outcomes; ``Report.joint_table`` and ``validate_report_dict`` are
the explicit guards.

JSON schema (stable)::

    {
      "scenario": str, "trials": int, "seed": int, "generated": str | null,
      "passed": bool,
      "variants": {
        <variant-key>: {
          "variant": {param: option}, "trials": int,
          "agents": {
            <agent>: {
              "analytic": {transcript: p} | null,
              "oracle_textbook": {transcript: p} | null,
              "oracle_premature": {transcript: p} | null,
              "empirical": {transcript: f} | null,
              "counts": {transcript: n} | null,
              "z_scores": {transcript: z} | null,
              "actions": {action: f} | null
            }
          }
        }
      },
      "statistics": {...}, "checks": [{"name", "passed", "detail"}],
      "global_state": {variant-key: {...}}, "audit": {...} | null
    }

Transcripts are written as comma-joined outcome labels in the agent's own
order of observation.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import ForbiddenComparison
from .script import transcript_key
from .transcripts import Transcript

AGENT_TABLE_KEYS = {
    "analytic",
    "oracle_textbook",
    "oracle_premature",
    "empirical",
    "counts",
    "z_scores",
    "actions",
}


@dataclass
class AgentTable:
    agent: str
    analytic: Mapping[Transcript, float] | None = None
    oracle_textbook: Mapping[Transcript, float] | None = None
    oracle_premature: Mapping[Transcript, float] | None = None
    empirical: Mapping[Transcript, float] | None = None
    counts: Mapping[Transcript, int] | None = None
    z_scores: Mapping[Transcript, float] | None = None
    actions: Mapping[str, float] | None = None


@dataclass
class VariantSection:
    key: str
    variant: Mapping[str, str]
    trials: int
    agents: dict[str, AgentTable] = field(default_factory=dict)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class Report:
    scenario: str
    trials: int
    seed: int
    sections: dict[str, VariantSection] = field(default_factory=dict)
    statistics: dict[str, Any] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    global_state: dict[str, Any] = field(default_factory=dict)
    audit: dict[str, Any] | None = None
    generated: str | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def table(self, agent: str, variant: str = "default") -> AgentTable:
        if not isinstance(agent, str):
            raise ForbiddenComparison("a table belongs to exactly one agent")
        return self.sections[variant].agents[agent]

    def joint_table(self, *agents: str):
        raise ForbiddenComparison(
            f"reports hold per-agent tables only; no joint outcome table for {agents}"
        )

    def add_check(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, bool(passed), detail))

    def to_dict(self, agents: list[str] | None = None) -> dict:
        variants = {}
        for key, section in self.sections.items():
            tables = {}
            for name, table in section.agents.items():
                if agents is not None and name not in agents:
                    continue
                tables[name] = {
                    "analytic": _table(table.analytic),
                    "oracle_textbook": _table(table.oracle_textbook),
                    "oracle_premature": _table(table.oracle_premature),
                    "empirical": _table(table.empirical),
                    "counts": _table(table.counts),
                    "z_scores": _table(table.z_scores),
                    "actions": None if table.actions is None else dict(table.actions),
                }
            variants[key] = {"variant": dict(section.variant), "trials": section.trials, "agents": tables}
        doc = {
            "scenario": self.scenario,
            "trials": self.trials,
            "seed": self.seed,
            "generated": self.generated,
            "passed": self.passed,
            "variants": variants,
            "statistics": _plain(self.statistics),
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
            "global_state": _plain(self.global_state),
            "audit": _plain(self.audit),
        }
        validate_report_dict(doc)
        return doc


def _table(mapping) -> dict | None:
    if mapping is None:
        return None
    return {transcript_key(k): _plain(v) for k, v in mapping.items()}


def _plain(value):
    if isinstance(value, dict):
        return {str(k) if not isinstance(k, tuple) else transcript_key(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):  # numpy scalars
        return value.item()
    return value


def validate_report_dict(doc: Mapping) -> None:
    """Reject any report document holding a table that is not per-agent."""
    for key, section in doc.get("variants", {}).items():
        agents = section.get("agents", {})
        for name, table in agents.items():
            if not isinstance(name, str) or "," in name or "&" in name:
                raise ForbiddenComparison(f"variant {key!r} has a table keyed by several agents: {name!r}")
            unknown = set(table) - AGENT_TABLE_KEYS
            if unknown:
                raise ForbiddenComparison(
                    f"table for {name!r} in {key!r} has non-per-agent fields {sorted(unknown)}"
                )
            for field_name, values in table.items():
                if isinstance(values, Mapping):
                    for v in values.values():
                        if isinstance(v, Mapping):
                            raise ForbiddenComparison(f"nested table under {name!r}/{field_name!r}")


def to_json(report: Report, agents: list[str] | None = None) -> str:
    return json.dumps(report.to_dict(agents), indent=2, sort_keys=True)


def to_csv(report: Report, agents: list[str] | None = None) -> str:
    doc = report.to_dict(agents)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["variant", "agent", "transcript", "analytic", "oracle_textbook",
                     "oracle_premature", "empirical", "count"])
    for key, section in doc["variants"].items():
        for name, table in section["agents"].items():
            transcripts: list[str] = []
            for col in ("analytic", "oracle_textbook", "oracle_premature", "empirical"):
                for t in table[col] or {}:
                    if t not in transcripts:
                        transcripts.append(t)
            for t in transcripts:
                row = [key, name, t]
                for col in ("analytic", "oracle_textbook", "oracle_premature", "empirical"):
                    row.append("" if table[col] is None else table[col].get(t, 0.0))
                row.append("" if table["counts"] is None else table["counts"].get(t, 0))
                writer.writerow(row)
    return buf.getvalue()


def to_text(report: Report, agents: list[str] | None = None) -> str:
    doc = report.to_dict(agents)
    lines = [f"scenario {doc['scenario']}  trials {doc['trials']}  seed {doc['seed']}"]
    for key, section in doc["variants"].items():
        lines.append(f"\n[{key}] trials={section['trials']}")
        for name, table in section["agents"].items():
            lines.append(f"  {name}")
            analytic = table["analytic"] or table["oracle_textbook"] or {}
            empirical = table["empirical"] or {}
            for t in sorted(set(analytic) | set(empirical)):
                a = analytic.get(t)
                e = empirical.get(t)
                a_s = "-" if a is None else f"{a:.6f}"
                e_s = "-" if e is None else f"{e:.6f}"
                lines.append(f"    {t:<24} analytic {a_s}  empirical {e_s}")
            if table["actions"]:
                acts = ", ".join(f"{k}: {v:.4f}" for k, v in table["actions"].items())
                lines.append(f"    actions  {acts}")
    if doc["statistics"]:
        lines.append("\nstatistics")
        lines.append(json.dumps(doc["statistics"], indent=2, sort_keys=True))
    lines.append("\nchecks")
    for c in doc["checks"]:
        lines.append(f"  [{'PASS' if c['passed'] else 'FAIL'}] {c['name']}  {c['detail']}")
    if doc["audit"]:
        lines.append("\naudit")
        lines.append(json.dumps(doc["audit"], indent=2, sort_keys=True))
    return "\n".join(lines) + "\n"


FORMATTERS = {"json": to_json, "csv": to_csv, "text": to_text}
