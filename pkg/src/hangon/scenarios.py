"""Built-in protocols and the scenario runner.

Conventions: spin registers use basis 0 = "+" along Oz.  In the
Frauchiger-Renner protocol the coin has basis (h, t) and the spin (down, up).
"""

from __future__ import annotations

import math
from datetime import datetime, timezone
from typing import Any, Callable, Mapping

import numpy as np

from .engine import run_once, run_trials, trajectory, transcript_distribution
from .errors import BadParams, UnknownScenario, WrongScenario
from .hilbert import RegisterLayout, hadamard
from .oracle import compare, composed_final_state, run_collapse, z_bound
from .report import AgentTable, Report, VariantSection
from .script import (
    AssertDistribution,
    Ask,
    Basis,
    Observe,
    Prepare,
    ScenarioScript,
    Unitary,
    variant_key,
)
from .transcripts import Transcript

SQRT_HALF = 1 / math.sqrt(2)
SINGLET = (0.0, SQRT_HALF, -SQRT_HALF, 0.0)
TSIRELSON = 2 * math.sqrt(2)
ORACLE_TOL = 1e-9
STATE_TOL = 1e-12

CHSH_ANGLES = {"a1": 0.0, "a2": math.pi / 2, "b1": math.pi / 4, "b2": 3 * math.pi / 4}
SUPERPOSED = "superposed-branch"


def _angle(params: dict, key: str, default: float) -> float:
    value = params.pop(key, default)
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise BadParams(f"{key} must be a number, got {value!r}") from None
    if not math.isfinite(value):
        raise BadParams(f"{key} must be finite")
    return value


def _no_leftovers(name: str, params: dict) -> None:
    if params:
        raise BadParams(f"{name} does not take parameters {sorted(params)}")


def _spin(angle) -> Basis:
    return Basis("spin", angle=angle)


def _outer(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex)
    return np.outer(v, v.conj())


def epr_singlet(params: dict) -> ScenarioScript:
    a = _angle(params, "angle_a", 0.0)
    b = _angle(params, "angle_b", 0.0)
    _no_leftovers("epr_singlet", params)
    steps = [
        Prepare(amplitudes=SINGLET),
        Observe("Alice", ("A",), _spin(a), "alice_A"),
        Observe("Bob", ("B",), _spin(b), "bob_B"),
        Ask("Alice", "Bob", "bob_B", "alice_asks_bob"),
        Ask("Bob", "Alice", "alice_A", "bob_asks_alice"),
    ]
    if a == b:
        anti = {("+", "-"): 0.5, ("-", "+"): 0.5}
        steps += [AssertDistribution("Alice", anti), AssertDistribution("Bob", anti)]
    return ScenarioScript(
        "epr_singlet",
        RegisterLayout([("A", 2), ("B", 2)]),
        ("Alice", "Bob"),
        tuple(steps),
        metadata={"spacelike": [["alice_A", "bob_B"]], "angles": {"a": a, "b": b}},
    )


def chsh(params: dict) -> ScenarioScript:
    angles = {k: _angle(params, k, v) for k, v in CHSH_ANGLES.items()}
    _no_leftovers("chsh", params)
    return ScenarioScript(
        "chsh",
        RegisterLayout([("A", 2), ("B", 2)]),
        ("Alice", "Bob"),
        (
            Prepare(amplitudes=SINGLET),
            Observe("Alice", ("A",), _spin("a"), "alice_A"),
            Observe("Bob", ("B",), _spin("b"), "bob_B"),
            Ask("Alice", "Bob", "bob_B", "alice_asks_bob"),
        ),
        parameters={
            "a": {"a1": angles["a1"], "a2": angles["a2"]},
            "b": {"b1": angles["b1"], "b2": angles["b2"]},
        },
        metadata={"spacelike": [["alice_A", "bob_B"]]},
    )


def wigner_projectors() -> tuple[tuple[str, np.ndarray], ...]:
    # (particle, friend memory): |+,0> + |-,1>, the friend's post-measurement state
    sup = _outer([SQRT_HALF, 0, 0, SQRT_HALF])
    return ((SUPERPOSED, sup), ("rest", np.eye(4) - sup))


def wigner_friend(params: dict) -> ScenarioScript:
    ask_first = params.pop("ask_first", False)
    if not isinstance(ask_first, bool):
        raise BadParams("ask_first must be a boolean")
    _no_leftovers("wigner_friend", params)
    steps = [
        Prepare(amplitudes=(SQRT_HALF, SQRT_HALF)),
        Observe("Friend", ("P",), _spin(0.0), "friend_obs"),
    ]
    if ask_first:
        steps += [
            Ask("Wigner", "Friend", "friend_obs", "wigner_asks_friend"),
            Observe("Wigner", ("P",), _spin(0.0), "wigner_particle"),
        ]
    steps.append(
        Observe("Wigner", ("P", "@friend_obs"), Basis("projectors", projectors=wigner_projectors()), "wigner_sup")
    )
    if not ask_first:
        steps.append(AssertDistribution("Wigner", {(SUPERPOSED,): 1.0}))
    return ScenarioScript(
        "wigner_friend",
        RegisterLayout([("P", 2)]),
        ("Friend", "Wigner"),
        tuple(steps),
        metadata={"ask_first": ask_first},
    )


def fr_controlled_preparation() -> np.ndarray:
    """|h><h| (x) 1 + |t><t| (x) H on (coin, spin): h -> down, t -> (down + up)/sqrt2."""
    h = np.diag([1.0, 0.0]).astype(complex)
    t = np.diag([0.0, 1.0]).astype(complex)
    return np.kron(h, np.eye(2)) + np.kron(t, hadamard())


def fr_lab_projectors(ok: str, fail: str) -> tuple[tuple[str, np.ndarray], ...]:
    # ok ~ |0,0> - |1,1> on (system, friend memory)
    ok_proj = _outer([SQRT_HALF, 0, 0, -SQRT_HALF])
    return ((ok, ok_proj), (fail, np.eye(4) - ok_proj))


def frauchiger_renner(params: dict) -> ScenarioScript:
    _no_leftovers("frauchiger_renner", params)
    return ScenarioScript(
        "frauchiger_renner",
        RegisterLayout([("R", 2), ("S", 2)]),
        ("Fbar", "F", "Wbar", "W", "Final"),
        (
            Prepare(product={"R": (math.sqrt(1 / 3), math.sqrt(2 / 3)), "S": (1.0, 0.0)}),
            Observe("Fbar", ("R",), Basis("computational", labels=("h", "t")), "fbar_obs"),
            Unitary(("R", "S"), fr_controlled_preparation()),
            Observe("F", ("S",), Basis("computational", labels=("down", "up")), "f_obs"),
            Observe("Wbar", ("R", "@fbar_obs"), Basis("projectors", projectors=fr_lab_projectors("okbar", "failbar")), "wbar_obs"),
            Observe("W", ("S", "@f_obs"), Basis("projectors", projectors=fr_lab_projectors("ok", "fail")), "w_obs"),
            Ask("Final", "Wbar", "wbar_obs", "final_asks_wbar"),
            Ask("Final", "W", "w_obs", "final_asks_w"),
        ),
        metadata={"final_agent": "Final", "premise": ["okbar", "ok"]},
    )


DEFAULT_ACTIONS = {"+": "tea", "-": "wine"}


def sync_actions(params: dict) -> ScenarioScript:
    actions = params.pop("actions", DEFAULT_ACTIONS)
    if not isinstance(actions, Mapping) or set(actions) != {"+", "-"}:
        raise BadParams("actions must map both '+' and '-' to an action")
    _no_leftovers("sync_actions", params)
    return ScenarioScript(
        "sync_actions",
        RegisterLayout([("A", 2), ("B", 2)]),
        ("Alice", "Bob"),
        (
            Prepare(amplitudes=SINGLET),
            Observe("Alice", ("A",), _spin(0.0), "alice_A"),
            Observe("Bob", ("B",), _spin(0.0), "bob_B"),
        ),
        metadata={
            "spacelike": [["alice_A", "bob_B"]],
            "actions": {"Alice": {"event": "alice_A", "map": dict(actions)},
                        "Bob": {"event": "bob_B", "map": dict(actions)}},
        },
    )


BUILTINS: dict[str, Callable[[dict], ScenarioScript]] = {
    "epr_singlet": epr_singlet,
    "chsh": chsh,
    "wigner_friend": wigner_friend,
    "frauchiger_renner": frauchiger_renner,
    "sync_actions": sync_actions,
}


def builtin(name: str, params: Mapping[str, Any] | None = None) -> ScenarioScript:
    if name not in BUILTINS:
        raise UnknownScenario(f"no built-in scenario {name!r}; choose from {sorted(BUILTINS)}")
    return BUILTINS[name](dict(params or {}))


# --- statistics --------------------------------------------------------------

SIGN = {"+": 1.0, "-": -1.0}


def correlation(dist: Mapping[Transcript, float]) -> float:
    """E = <s(own) s(heard)> over an agent's two-entry transcripts."""
    return float(sum(p * SIGN[t[0]] * SIGN[t[1]] for t, p in dist.items()))


def chsh_combination(corr: Mapping[tuple[str, str], float]) -> float:
    """S = E(a1,b1) - E(a1,b2) + E(a2,b1) + E(a2,b2)."""
    return corr[("a1", "b1")] - corr[("a1", "b2")] + corr[("a2", "b1")] + corr[("a2", "b2")]


def _pair(variant: Mapping[str, str]) -> tuple[str, str]:
    return variant["a"], variant["b"]


def chsh_statistic(report: Report) -> float:
    """S from the four empirical correlations in Alice's tables of a chsh report."""
    if report.scenario != "chsh":
        raise WrongScenario(f"chsh_statistic needs a chsh report, got {report.scenario!r}")
    corr = {}
    for section in report.sections.values():
        empirical = section.agents["Alice"].empirical
        if empirical is None:
            raise WrongScenario("report has no empirical frequencies")
        corr[_pair(section.variant)] = correlation(empirical)
    return chsh_combination(corr)


# --- runner ------------------------------------------------------------------


def _actions_for(script: ScenarioScript, agent: str, program, freqs) -> dict[str, float] | None:
    plan = script.metadata.get("actions", {}).get(agent)
    if plan is None or freqs is None:
        return None
    eid = program.event_named(plan["event"]).event_id
    position = [r.event_id for r in program.events_of(agent)].index(eid)
    out: dict[str, float] = {}
    for transcript, f in freqs.items():
        action = plan["map"][transcript[position]]
        out[action] = out.get(action, 0.0) + f
    return out


def run_scenario(
    script: ScenarioScript,
    trials: int,
    seed: int,
    *,
    agents: list[str] | None = None,
    jobs: int = 1,
    engine: bool = True,
    oracle: bool = True,
    audit: str | None = None,
    timestamp: bool = False,
) -> Report:
    """Run the hanging-on engine and the oracle on a script and collect checks.

    Raises AssertionFailed if an AssertDistribution step does not hold.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    agents = list(script.agents) if agents is None else agents
    report = Report(script.name, trials, seed)
    if timestamp:
        report.generated = datetime.now(timezone.utc).isoformat()

    runs = run_trials(script, trials, seed, agents=agents, jobs=jobs) if engine else None
    variants = script.variants()
    for variant in variants:
        key = variant_key(variant)
        program = script.compile(variant)
        traj = trajectory(program)
        n = int(runs[key].trials.size) if runs else 0
        section = VariantSection(key, variant, n)
        report.sections[key] = section
        for agent in agents:
            table = AgentTable(agent)
            section.agents[agent] = table
            table.analytic = transcript_distribution(program, agent, traj)
            if oracle:
                table.oracle_textbook = run_collapse(program, agent, "textbook")
                table.oracle_premature = run_collapse(program, agent, "premature-collapse")
                diff = table.analytic.max_difference(table.oracle_textbook)
                report.add_check(f"oracle-equivalence[{key}/{agent}]", diff <= ORACLE_TOL, f"max diff {diff:.3g}")
            if runs:
                run = runs[key]
                table.empirical = run.frequencies(agent)
                table.counts = run.counts(agent)
                table.actions = _actions_for(script, agent, program, table.empirical)
                if n:
                    verdict = compare(table.analytic, table.empirical, n)
                    table.z_scores = verdict.z_scores
                    report.add_check(f"frequencies[{key}/{agent}]", verdict.passed,
                                     f"max |z| {max(map(abs, verdict.z_scores.values()), default=0.0):.3g}")
        report.global_state[key] = _collapse_freedom(script, variant, seed, traj, oracle)
        report.add_check(f"collapse-freedom[{key}]", report.global_state[key]["collapse_free"],
                         f"seed deviation {report.global_state[key]['seed_deviation']:.3g}")

    stats = STATISTICS.get(script.name)
    if stats is not None:
        stats(report, script)
    if audit is not None:
        from .audit import audit_report

        audit_report(report, script, runs, audit)
    return report


def _collapse_freedom(script, variant, seed, traj, with_oracle: bool) -> dict:
    """Final global states of two differently seeded full runs, and the composed product."""
    first = run_once(script, seed, 0, variant).state.amplitudes
    second = run_once(script, seed + 1, 0, variant).state.amplitudes
    seed_dev = float(np.max(np.abs(first - second)))
    out = {
        "seed_deviation": seed_dev,
        "trajectory_deviation": float(np.max(np.abs(first - traj.final.amplitudes))),
    }
    ok = seed_dev <= STATE_TOL and out["trajectory_deviation"] <= STATE_TOL
    if with_oracle:
        composed = composed_final_state(traj.program)
        out["composed_deviation"] = float(np.max(np.abs(first - composed)))
        ok = ok and out["composed_deviation"] <= STATE_TOL
    out["collapse_free"] = bool(ok)
    return out


def _sigma_bound(p1: float, n1: int, p2: float, n2: int) -> float:
    p = (p1 * n1 + p2 * n2) / max(n1 + n2, 1)
    return 4.0 * math.sqrt(max(p * (1 - p), 0.0) * (1 / max(n1, 1) + 1 / max(n2, 1))) + 1e-9


def _epr_stats(report: Report, script: ScenarioScript) -> None:
    angles = script.metadata.get("angles", {})
    same_axis = bool(angles) and angles.get("a") == angles.get("b")
    stats = {}
    for agent in report.sections["default"].agents:
        table = report.table(agent)
        opposite = lambda d: sum(p for t, p in d.items() if t[0] != t[1])  # noqa: E731
        plus = lambda d: sum(p for t, p in d.items() if t[0] == "+")  # noqa: E731
        entry = {"opposite_answer": {"analytic": opposite(table.analytic)},
                 "own_plus": {"analytic": plus(table.analytic)}}
        if table.empirical is not None:
            entry["opposite_answer"]["empirical"] = opposite(table.empirical)
            entry["own_plus"]["empirical"] = plus(table.empirical)
            n = report.sections["default"].trials
            f = entry["own_plus"]["empirical"]
            report.add_check(f"born-frequency[{agent}]", abs(f - 0.5) <= z_bound(0.5, n), f"'+' frequency {f:.4f}")
            if same_axis:
                report.add_check(f"anticorrelation-empirical[{agent}]",
                                 entry["opposite_answer"]["empirical"] == 1.0)
        stats[agent] = entry
        if same_axis:
            report.add_check(f"anticorrelation-analytic[{agent}]",
                             abs(entry["opposite_answer"]["analytic"] - 1.0) <= STATE_TOL,
                             f"P(opposite) = {entry['opposite_answer']['analytic']!r}")
    report.statistics = stats


def _chsh_stats(report: Report, script: ScenarioScript) -> None:
    analytic, oracle_corr, empirical, counts = {}, {}, {}, {}
    for section in report.sections.values():
        pair = _pair(section.variant)
        alice = section.agents["Alice"]
        analytic[pair] = correlation(alice.analytic)
        if alice.oracle_textbook is not None:
            oracle_corr[pair] = correlation(alice.oracle_textbook)
        if alice.empirical is not None:
            empirical[pair] = correlation(alice.empirical)
            counts[pair] = section.trials
    s_analytic = chsh_combination(analytic)
    stats: dict[str, Any] = {
        "correlations": {f"{a},{b}": {"analytic": v} for (a, b), v in analytic.items()},
        "S": {"analytic": s_analytic},
    }
    if oracle_corr:
        s_oracle = chsh_combination(oracle_corr)
        stats["S"]["oracle"] = s_oracle
        report.add_check("chsh-analytic-vs-oracle", abs(abs(s_analytic) - abs(s_oracle)) < ORACLE_TOL,
                         f"|S| engine {abs(s_analytic):.12f} oracle {abs(s_oracle):.12f}")
    if empirical and all(counts.values()):
        s_emp = chsh_statistic(report)
        sigma = math.sqrt(sum((1 - empirical[k] ** 2) / counts[k] for k in empirical))
        stats["S"].update({"empirical": s_emp, "sigma": sigma})
        for (a, b), v in empirical.items():
            stats["correlations"][f"{a},{b}"]["empirical"] = v
        report.add_check("chsh-empirical", abs(s_emp - s_analytic) <= 4 * sigma,
                         f"S = {s_emp:.4f} vs {s_analytic:.4f} (4 sigma = {4 * sigma:.4f})")
    stats["no_signaling"] = _no_signaling(report)
    report.statistics = stats


def _no_signaling(report: Report) -> dict:
    """Bob's '+' marginal, per asker, for each of Bob's settings across Alice's settings."""
    out: dict[str, Any] = {}
    by_pair = {_pair(s.variant): s for s in report.sections.values()}
    a_opts = sorted({a for a, _ in by_pair})
    b_opts = sorted({b for _, b in by_pair})
    # Bob judged by Bob himself (first entry), and by Alice through her ask (second entry).
    for asker, position in (("Bob", 0), ("Alice", 1)):
        for b in b_opts:
            entry: dict[str, Any] = {}
            for kind in ("analytic", "empirical"):
                margins = {}
                for a in a_opts:
                    table = getattr(by_pair[(a, b)].agents[asker], kind)
                    if table is not None:
                        margins[a] = sum(p for t, p in table.items() if t[position] == "+")
                if len(margins) == len(a_opts):
                    entry[kind] = margins
            if "analytic" in entry:
                vals = list(entry["analytic"].values())
                diff = max(vals) - min(vals)
                report.add_check(f"no-signaling-analytic[{asker}/{b}]", diff < 1e-12, f"diff {diff:.3g}")
            if "empirical" in entry:
                (a1, f1), (a2, f2) = list(entry["empirical"].items())[:2]
                n1, n2 = by_pair[(a1, b)].trials, by_pair[(a2, b)].trials
                bound = _sigma_bound(f1, n1, f2, n2)
                report.add_check(f"no-signaling-empirical[{asker}/{b}]", abs(f1 - f2) <= bound,
                                 f"diff {abs(f1 - f2):.4f} bound {bound:.4f}")
            out[f"{asker}:{b}"] = entry
    return out


def _wigner_stats(report: Report, script: ScenarioScript) -> None:
    table = report.table("Wigner")
    idx = len(next(iter(table.analytic))) - 1

    def p_sup(d):
        return None if d is None else sum(p for t, p in d.items() if t[idx] == SUPERPOSED)

    report.statistics = {
        "Wigner": {
            "p_superposed": {
                "analytic": p_sup(table.analytic),
                "oracle_textbook": p_sup(table.oracle_textbook),
                "oracle_premature": p_sup(table.oracle_premature),
                "empirical": p_sup(table.empirical),
            }
        }
    }


def _fr_stats(report: Report, script: ScenarioScript) -> None:
    table = report.table("Final") if "Final" in report.sections["default"].agents else None
    if table is None:
        return
    key = ("okbar", "ok")
    entry = {"analytic": table.analytic.prob(key)}
    if table.oracle_textbook is not None:
        entry["oracle_textbook"] = table.oracle_textbook.prob(key)
        report.add_check("fr-okbar-ok-vs-oracle", abs(entry["analytic"] - entry["oracle_textbook"]) <= ORACLE_TOL,
                         f"P = {entry['analytic']:.12f}")
    if table.empirical is not None:
        entry["empirical"] = table.empirical.get(key, 0.0)
    report.statistics = {"Final": {"p_okbar_ok": entry}}


def _sync_stats(report: Report, script: ScenarioScript) -> None:
    report.statistics = {
        agent: {"actions": table.actions}
        for agent, table in report.sections["default"].agents.items()
        if table.actions is not None
    }


STATISTICS = {
    "epr_singlet": _epr_stats,
    "chsh": _chsh_stats,
    "wigner_friend": _wigner_stats,
    "frauchiger_renner": _fr_stats,
    "sync_actions": _sync_stats,
}
