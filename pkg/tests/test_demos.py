import time

import numpy as np
import pytest

from nmrqc.compiler import Circuit, circuit_unitary, compile_circuit
from nmrqc.demos import (
    DEUTSCH_ORACLES,
    GROVER_ITEMS,
    demo_system,
    deutsch_circuit,
    grover2_circuit,
    grover2_oracle,
    run_demo,
)
from nmrqc.sequence import sequence_unitary

import oracles


def test_demo_molecule_gives_70_ms_cphase():
    s = demo_system()
    assert 1 / (2 * s.effective_coupling(0, 1)) == pytest.approx(0.070, abs=1e-4)


@pytest.mark.parametrize("oracle", sorted(DEUTSCH_ORACLES))
def test_deutsch_circuit_reference(oracle):
    """Brute-force 4-dim simulation of the abstract circuit."""
    u = circuit_unitary(deutsch_circuit(oracle))
    probs = np.abs(u[:, 0]) ** 2
    query_one = probs[0b10] + probs[0b11]
    assert query_one == pytest.approx(0.0 if DEUTSCH_ORACLES[oracle][1] else 1.0, abs=1e-12)


@pytest.mark.parametrize("oracle", sorted(DEUTSCH_ORACLES))
@pytest.mark.parametrize("prep", ["pure", "pseudopure_spatial", "pseudopure_temporal"])
def test_deutsch_end_to_end(oracle, prep):
    result, expected, answer = run_demo("deutsch", oracle, prep)
    assert answer == expected


@pytest.mark.parametrize("marked", GROVER_ITEMS)
def test_grover_oracle_is_a_phase_flip(marked):
    u = circuit_unitary(Circuit(2, grover2_oracle(marked)))
    diag = np.ones(4)
    diag[int(marked, 2)] = -1
    assert oracles.phase_invariant_distance(u, np.diag(diag)) < 1e-12


@pytest.mark.parametrize("marked", GROVER_ITEMS)
def test_grover_compiled_matches_abstract(marked):
    s = demo_system()
    seq, _ = compile_circuit(grover2_circuit(marked), s)
    assert oracles.phase_invariant_distance(sequence_unitary(seq, s), circuit_unitary(grover2_circuit(marked))) < 1e-10


@pytest.mark.parametrize("marked", GROVER_ITEMS)
def test_grover_pure_is_certain(marked):
    result, expected, answer = run_demo("grover2", marked, "pure")
    assert answer == expected
    for q, bit in zip(result.readout.qubits, marked):
        assert abs(q.analog - float(bit)) < 1e-9


@pytest.mark.parametrize("marked", GROVER_ITEMS)
def test_grover_temporal_scales_spectrum_by_epsilon(marked):
    pure, _, _ = run_demo("grover2", marked, "pure")
    temporal, expected, answer = run_demo("grover2", marked, "pseudopure_temporal")
    assert answer == expected
    eps = temporal.structure["epsilon"]
    assert 0 < eps < 1e-3
    a = pure.spectra["H1"].amplitudes
    b = temporal.spectra["H1"].amplitudes
    k = int(np.argmax(np.abs(a)))
    assert abs(b[k] / a[k] - eps) <= 1e-6 * eps
    np.testing.assert_allclose(b, eps * a, atol=1e-6 * eps * np.abs(a).max())


def test_relaxation_blurs_but_keeps_the_answer():
    result, expected, _ = run_demo("grover2", "10", "pure", relaxation=True)
    analog = [q.analog for q in result.readout.qubits]
    assert tuple(float(round(a)) for a in analog) == expected
    assert abs(analog[0] - 1.0) > 1e-3


def test_unknown_names():
    with pytest.raises(KeyError):
        run_demo("shor", "15")
    with pytest.raises(KeyError):
        run_demo("deutsch", "balanced")
    with pytest.raises(ValueError):
        grover2_circuit("2")


def test_each_demo_is_fast():
    for name, variants in (("deutsch", sorted(DEUTSCH_ORACLES)), ("grover2", GROVER_ITEMS)):
        t0 = time.perf_counter()
        for v in variants:
            run_demo(name, v, "pseudopure_temporal")
        assert time.perf_counter() - t0 < 5.0
