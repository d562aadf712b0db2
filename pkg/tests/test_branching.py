import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state
from hangon.branching import decompose, fix_phase, relative_state
from hangon.errors import UnknownLabel, ZeroWeightBranch
from hangon.hilbert import (
    RegisterLayout,
    StateVector,
    computational_projectors,
    outcome_probability,
    prepare,
    spin_projectors,
)


def test_singlet_branches(singlet):
    d = decompose(singlet, spin_projectors(0.0, "A"))
    assert d["+"].weight == pytest.approx(0.5, abs=1e-12)
    assert d["-"].weight == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(d["+"].relative_state.amplitudes, [0, 1, 0, 0], atol=1e-12)  # |+->
    # -|-+> with the global phase fixed to make the first nonzero amplitude positive
    assert np.allclose(d["-"].relative_state.amplitudes, [0, 0, 1, 0], atol=1e-12)


def test_zero_weight_branch_kept_without_state():
    s = prepare(RegisterLayout([("A", 2)]), amplitudes=[1, 0])
    d = decompose(s, spin_projectors(0.0, "A"))
    assert d["-"].weight == 0.0
    assert d["-"].relative_state is None
    with pytest.raises(ZeroWeightBranch):
        relative_state(s, spin_projectors(0.0, "A"), "-")


def test_unknown_label(singlet):
    with pytest.raises(UnknownLabel):
        decompose(singlet, spin_projectors(0.0, "A"))["up"]


def test_fix_phase():
    v = fix_phase(np.array([0, -1j, 1]) / np.sqrt(2))
    assert v[1] == pytest.approx(1 / np.sqrt(2))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), angle=st.floats(-7, 7))
def test_reconstruction_and_weights(seed, angle):
    rng = np.random.default_rng(seed)
    layout = RegisterLayout([("A", 2), ("B", 3)])
    state = StateVector(layout, random_state(rng, 6))
    for ps in (spin_projectors(angle, "A"), computational_projectors(("B",), 3, "xyz")):
        d = decompose(state, ps)
        rebuilt = np.zeros(6, dtype=complex)
        for label in ps.labels:
            b = d[label]
            assert b.weight == pytest.approx(outcome_probability(state, ps, label), abs=1e-14)
            if b.relative_state is not None:
                overlap = np.vdot(b.relative_state.amplitudes, state.amplitudes)
                rebuilt += overlap * b.relative_state.amplitudes
        assert np.max(np.abs(rebuilt - state.amplitudes)) <= 1e-12
        assert sum(d.weights.values()) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), angle=st.floats(-7, 7))
def test_relative_state_is_idempotent(seed, angle):
    rng = np.random.default_rng(seed)
    state = StateVector(RegisterLayout([("A", 2), ("B", 2)]), random_state(rng, 4))
    ps = spin_projectors(angle, "A")
    for label in ps.labels:
        once = relative_state(state, ps, label)
        twice = relative_state(once, ps, label)
        assert np.max(np.abs(once.amplitudes - twice.amplitudes)) <= 1e-12
        assert outcome_probability(once, ps, label) == pytest.approx(1.0, abs=1e-12)


def test_singlet_relative_state_predicts_bob(singlet):
    up = relative_state(singlet, spin_projectors(0.0, "A"), "+")
    assert outcome_probability(up, spin_projectors(0.0, "B"), "-") == pytest.approx(1.0, abs=1e-12)
