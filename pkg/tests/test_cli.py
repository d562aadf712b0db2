import json
import subprocess
import sys

import pytest

from hangon.cli import main
from hangon.report import AGENT_TABLE_KEYS
from hangon.scenarios import BUILTINS, builtin
from hangon.script import dump_script


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_json_report_is_reproducible(capsys):
    args = ("--scenario", "epr_singlet", "--trials", "1000", "--seed", "3", "--no-timestamp")
    code, first, _ = _run(capsys, *args)
    assert code == 0
    _, second, _ = _run(capsys, *args)
    assert first == second
    doc = json.loads(first)
    assert doc["passed"] and doc["generated"] is None
    assert set(doc["variants"]["default"]["agents"]) == {"Alice", "Bob"}


def test_timestamp_present_by_default(capsys):
    _, out, _ = _run(capsys, "--scenario", "sync_actions", "--trials", "10")
    assert json.loads(out)["generated"]


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_report_schema(capsys, name):
    code, out, _ = _run(capsys, "--scenario", name, "--trials", "500", "--no-timestamp")
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {"scenario", "trials", "seed", "generated", "passed", "variants",
                        "statistics", "checks", "global_state", "audit"}
    for section in doc["variants"].values():
        assert set(section) == {"variant", "trials", "agents"}
        for agent, table in section["agents"].items():
            assert agent in builtin(name).agents
            assert set(table) == AGENT_TABLE_KEYS
            for column in table.values():
                assert column is None or all(not isinstance(v, dict) for v in column.values())


def test_csv_and_text(capsys, tmp_path):
    out_file = tmp_path / "r.csv"
    code, _, _ = _run(capsys, "--scenario", "chsh", "--trials", "800", "--format", "csv", "--out", str(out_file))
    assert code == 0
    lines = out_file.read_text().splitlines()
    assert lines[0].startswith("variant,agent,transcript")
    code, text, _ = _run(capsys, "--scenario", "wigner_friend", "--trials", "100", "--format", "text")
    assert code == 0 and "superposed-branch" in text


def test_agent_filter(capsys):
    _, out, _ = _run(capsys, "--scenario", "frauchiger_renner", "--trials", "100", "--agent", "Final")
    assert list(json.loads(out)["variants"]["default"]["agents"]) == ["Final"]


def test_params_and_audit(capsys):
    code, out, _ = _run(capsys, "--scenario", "wigner_friend", "--param", "ask_first=true", "--trials", "200")
    assert code == 0
    assert json.loads(out)["statistics"]["Wigner"]["p_superposed"]["analytic"] == pytest.approx(0.5)
    code, out, _ = _run(capsys, "--scenario", "frauchiger_renner", "--trials", "500", "--audit", "consol")
    assert code == 0 and json.loads(out)["audit"]["mode"] == "consol"


def test_oracle_only_and_engine_only(capsys):
    code, out, _ = _run(capsys, "--scenario", "chsh", "--oracle-only")
    table = json.loads(out)["variants"]["a=a1,b=b1"]["agents"]["Alice"]
    assert code == 0 and table["empirical"] is None and table["oracle_textbook"] is not None
    code, out, _ = _run(capsys, "--scenario", "chsh", "--engine-only", "--trials", "400")
    table = json.loads(out)["variants"]["a=a1,b=b1"]["agents"]["Alice"]
    assert code == 0 and table["oracle_textbook"] is None and table["empirical"] is not None


@pytest.mark.parametrize("argv", [
    [],
    ["--scenario", "nope"],
    ["--scenario", "chsh", "--trials", "0"],
    ["--scenario", "chsh", "--seed", "-1"],
    ["--scenario", "chsh", "--format", "xml"],
    ["--scenario", "chsh", "--agent", "Carol"],
    ["--scenario", "chsh", "--param", "angle"],
    ["--scenario", "epr_singlet", "--param", "angle_c=1"],
    ["--scenario", "epr_singlet", "--audit", "consol"],
    ["--scenario", "frauchiger_renner", "--audit", "consol", "--oracle-only"],
    ["--scenario", "chsh", "--oracle-only", "--engine-only"],
    ["--script", "/nonexistent/script.json"],
])
def test_usage_errors(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 1
    assert err


def test_failed_assertion_exit_code(capsys, tmp_path):
    from hangon.hilbert import RegisterLayout
    from hangon.script import AssertDistribution, Basis, Observe, Prepare, ScenarioScript

    script = ScenarioScript(
        "wrong", RegisterLayout([("A", 2)]), ("Alice",),
        (Prepare(amplitudes=(1, 1)), Observe("Alice", ("A",), Basis("spin", angle=0.0)),
         AssertDistribution("Alice", {("+",): 1.0})),
    )
    path = tmp_path / "wrong.yaml"
    dump_script(script, path)
    code, _, err = _run(capsys, "--script", str(path), "--trials", "10")
    assert code == 2 and "assertion" in err


def test_script_file(capsys, tmp_path):
    path = tmp_path / "fr.json"
    dump_script(builtin("frauchiger_renner"), path)
    code, out, _ = _run(capsys, "--script", str(path), "--trials", "300", "--no-timestamp")
    assert code == 0 and json.loads(out)["scenario"] == "frauchiger_renner"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hangon", "--scenario", "epr_singlet", "--trials", "50",
                           "--format", "text"], capture_output=True, text=True)
    assert proc.returncode == 0 and "checks" in proc.stdout


def test_failed_check_exit_code(capsys, monkeypatch):
    import hangon.cli as cli
    from hangon.report import Report

    def failing(script, *args, **kwargs):
        report = Report(script.name, 1, 0)
        report.add_check("forced", False, "injected")
        return report

    monkeypatch.setattr(cli, "run_scenario", failing)
    code, _, err = _run(capsys, "--scenario", "epr_singlet")
    assert code == 2 and "forced" in err
