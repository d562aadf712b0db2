import json

import numpy as np
import pytest

from hangon.engine import trajectory, transcript_distribution
from hangon.errors import (
    BadParams,
    ImmutableMemory,
    ScriptError,
    UnknownAgent,
    UnknownEvent,
    UnknownRegister,
)
from hangon.hilbert import RegisterLayout, hadamard
from hangon.scenarios import BUILTINS, builtin
from hangon.script import (
    Ask,
    Basis,
    Observe,
    Prepare,
    ScenarioScript,
    Unitary,
    dump_script,
    load_script,
    parse_transcript_key,
    script_from_dict,
    script_to_dict,
    transcript_key,
    variant_key,
)

LAYOUT = RegisterLayout([("A", 2), ("B", 2)])


def _script(*steps, agents=("Alice", "Bob")):
    return ScenarioScript("t", LAYOUT, agents, (Prepare(amplitudes=(1, 0, 0, 0)),) + steps)


def test_memory_reference_resolves():
    s = _script(
        Observe("Alice", ("A",), Basis("spin", angle=0.0), "first"),
        Observe("Bob", ("@first",), Basis("computational", labels=("x", "y")), "peek"),
    )
    program = s.compile()
    assert program.event_named("peek").projectors.targets == ("Alice.m0",)
    assert program.final_layout.ids == ("A", "B", "Alice.m0", "Bob.m1")


def test_compile_errors():
    spin = Basis("spin", angle=0.0)
    with pytest.raises(UnknownRegister):
        _script(Observe("Alice", ("C",), spin)).compile()
    with pytest.raises(UnknownAgent):
        _script(Observe("Carol", ("A",), spin)).compile()
    with pytest.raises(UnknownEvent):
        _script(Ask("Alice", "Bob", "nothing")).compile()
    with pytest.raises(UnknownEvent):
        _script(Observe("Alice", ("A",), spin, "x"), Ask("Bob", "Bob", "x")).compile()
    with pytest.raises(ImmutableMemory):
        _script(Observe("Alice", ("A",), spin, "x"), Unitary(("@x",), hadamard())).compile()
    with pytest.raises(ScriptError):
        ScenarioScript("t", LAYOUT, ("Alice",), (Observe("Alice", ("A",), spin),)).compile()
    with pytest.raises(ScriptError):
        _script(Prepare(amplitudes=(1, 0, 0, 0))).compile()
    with pytest.raises(ScriptError):
        _script(Observe("Alice", ("A",), spin, "x"), Observe("Alice", ("A",), spin, "x")).compile()
    with pytest.raises(BadParams):
        _script(Observe("Alice", ("A",), Basis("spin", angle="theta"))).compile()


def test_variants_and_keys():
    script = builtin("chsh")
    assert script.variants() == [
        {"a": "a1", "b": "b1"}, {"a": "a1", "b": "b2"}, {"a": "a2", "b": "b1"}, {"a": "a2", "b": "b2"},
    ]
    assert variant_key({"b": "b2", "a": "a1"}) == "a=a1,b=b2"
    assert variant_key({}) == "default"
    with pytest.raises(BadParams):
        script.compile({"a": "a3", "b": "b1"})
    with pytest.raises(BadParams):
        script.compile({"c": "x"})


def test_transcript_keys():
    assert transcript_key(("+", "-")) == "+,-"
    assert parse_transcript_key("okbar,ok") == ("okbar", "ok")


@pytest.mark.parametrize("name", sorted(BUILTINS))
@pytest.mark.parametrize("suffix", [".json", ".yaml"])
def test_builtin_round_trip(name, suffix, tmp_path):
    script = builtin(name)
    path = tmp_path / f"s{suffix}"
    dump_script(script, path)
    again = load_script(path)
    assert script_to_dict(again) == script_to_dict(script)
    for variant in script.variants():
        a, b = trajectory(script.compile(variant)), trajectory(again.compile(variant))
        assert np.max(np.abs(a.final.amplitudes - b.final.amplitudes)) <= 1e-15
        for agent in script.agents:
            d1 = transcript_distribution(script.compile(variant), agent, a)
            d2 = transcript_distribution(again.compile(variant), agent, b)
            assert d1.max_difference(d2) <= 1e-15


def test_document_is_plain_json():
    doc = script_to_dict(builtin("frauchiger_renner"))
    assert script_to_dict(script_from_dict(json.loads(json.dumps(doc)))) == doc


def test_complex_entries_round_trip():
    s = ScenarioScript(
        "phase", RegisterLayout([("A", 2)]), ("Alice",),
        (Prepare(amplitudes=(1 / np.sqrt(2), 1j / np.sqrt(2))), Observe("Alice", ("A",), Basis("spin", angle=0.0))),
    )
    again = script_from_dict(json.loads(json.dumps(script_to_dict(s))))
    assert np.allclose(again.steps[0].amplitudes, s.steps[0].amplitudes)


def test_load_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "x", "layout": [["A", 2]], "agents": ["a"], "steps": [{"op": "dance"}]}))
    with pytest.raises(ScriptError):
        load_script(bad)
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"name": "x"}))
    with pytest.raises(ScriptError):
        load_script(missing)
