import pytest

from hangon.audit import fr_rule_audit, q_certainties
from hangon.engine import run_trials
from hangon.errors import ForbiddenComparison, PreconditionNotMet, WrongScenario
from hangon.scenarios import builtin, run_scenario

PREMISE = {"Final": [(6, "okbar", 7), (7, "ok", 8)]}


def test_certainties_hold():
    certs = q_certainties()
    assert set(certs) == {"Wbar", "F", "Fbar"}
    for c in certs.values():
        assert c.probability == pytest.approx(1.0, abs=1e-9)


def test_absolute_facts_reaches_contradiction():
    result = fr_rule_audit(PREMISE, "absolute-facts")
    assert result.verdict == "contradiction"
    rules = [s.rule for s in result.trace]
    assert rules.count("Q") == 3 and "C" in rules and rules[-1] == "S"


def test_consol_is_blocked_at_transfer():
    result = fr_rule_audit(PREMISE, "consol")
    assert result.verdict == "blocked-at-C"
    assert all(s.rule == "Q" and s.agent == "Final" for s in result.trace)
    assert all(s.probability == pytest.approx(1.0) for s in result.trace)
    assert "Wbar" in result.blocked


def test_precondition():
    with pytest.raises(PreconditionNotMet):
        fr_rule_audit({"Final": ["failbar", "ok"]}, "consol")
    with pytest.raises(ValueError):
        fr_rule_audit(PREMISE, "relational")


@pytest.mark.parametrize("mode, verdict", [("consol", "blocked-at-C"), ("absolute", "contradiction")])
def test_report_audit(mode, verdict):
    report = run_scenario(builtin("frauchiger_renner"), 600, 5, audit=mode)
    assert report.passed
    assert set(report.audit["verdicts"]) == {verdict}
    assert report.audit["audited_trials"] == sum(report.audit["verdicts"].values()) > 0


def test_audit_needs_fr():
    with pytest.raises(WrongScenario):
        run_scenario(builtin("epr_singlet"), 10, 0, audit="consol")


def test_audit_of_sampled_runs():
    script = builtin("frauchiger_renner")
    run = run_trials(script, 300, 12)["default"]
    hits = 0
    for t in range(300):
        transcripts = {a: run.transcript_of(a, t) for a in script.agents}
        if transcripts["Final"] != ("okbar", "ok"):
            with pytest.raises(PreconditionNotMet):
                fr_rule_audit(transcripts, "consol")
            continue
        hits += 1
        assert fr_rule_audit(transcripts, "consol").verdict == "blocked-at-C"
    assert hits > 0


def test_consol_never_reads_other_records():
    from hangon.audit import _Records

    records = _Records("Final", "consol", q_certainties())
    with pytest.raises(ForbiddenComparison):
        records.certainty_of("F")
