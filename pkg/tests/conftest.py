import math

import numpy as np
import pytest

from hangon.hilbert import RegisterLayout, prepare

SQ = 1 / math.sqrt(2)

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def ab_layout():
    return RegisterLayout([("A", 2), ("B", 2)])


@pytest.fixture
def singlet(ab_layout):
    return prepare(ab_layout, amplitudes=[0, SQ, -SQ, 0])


def random_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def random_single_agent_script(seed: int):
    """A random script for one agent: up to 4 qubits, up to 6 observations.

    Steps mix random single-qubit unitaries, CNOTs, spin measurements at random
    angles, two-qubit parity measurements and re-readings of the agent's own
    memory registers.
    """
    from hangon.hilbert import RegisterLayout
    from hangon.script import Basis, Observe, Prepare, ScenarioScript, Unitary

    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    qubits = [f"q{i}" for i in range(n)]
    steps = [Prepare(amplitudes=tuple(random_state(rng, 2**n)))]
    n_obs = int(rng.integers(1, 7))
    names: list[str] = []
    while len(names) < n_obs:
        kind = rng.choice(["u1", "cnot", "spin", "spin", "parity", "memory"])
        if kind == "u1":
            steps.append(Unitary((qubits[rng.integers(n)],), random_unitary(rng, 2)))
        elif kind == "cnot" and n >= 2:
            a, b = rng.choice(n, size=2, replace=False)
            steps.append(Unitary((qubits[a], qubits[b]), CNOT))
        elif kind == "parity" and n >= 2:
            a, b = rng.choice(n, size=2, replace=False)
            even = np.diag([1.0, 0, 0, 1.0])
            basis = Basis("projectors", projectors=(("even", even), ("odd", np.eye(4) - even)))
            names.append(f"e{len(names)}")
            steps.append(Observe("Solo", (qubits[a], qubits[b]), basis, names[-1]))
        elif kind == "memory" and names:
            ref = names[rng.integers(len(names))]
            names.append(f"e{len(names)}")
            steps.append(Observe("Solo", ("@" + ref,), Basis("computational", labels=("r0", "r1")), names[-1]))
        elif kind == "spin":
            names.append(f"e{len(names)}")
            steps.append(Observe("Solo", (qubits[rng.integers(n)],), Basis("spin", angle=float(rng.uniform(0, 2 * np.pi))),
                                 names[-1]))
    return ScenarioScript(f"random-{seed}", RegisterLayout([(q, 2) for q in qubits]), ("Solo",), tuple(steps))
