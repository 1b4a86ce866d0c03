import csv
import math

import numpy as np
import pytest

from nmrqc import engine
from nmrqc.compiler import Circuit, Gate, compile_circuit
from nmrqc.preparation import polarization_override, pseudopure
from nmrqc.readout import (
    acquire_fid,
    block_decay,
    fit_decay_rate,
    parseval_error,
    peak_table,
    read_by_multiplet,
    read_by_phase,
    read_qubits,
    spectra,
    spectrum,
)
from nmrqc.spin_model import SpinSystem

import oracles


def single(offset=100.0, t2=math.inf, t1=math.inf):
    return SpinSystem.build(["H1"], [offset], t1_s=[t1], t2_s=[t2])


def two(j=10.0, offsets=(100.0, -100.0), species=("H1", "H1")):
    return SpinSystem.build(list(species), list(offsets), j_hz=[[0, j], [j, 0]])


def dense_fid(rho, offsets, jeff, species, channel, times):
    """Tr(U rho U^dag sum I_+) from dense propagators."""
    n = len(offsets)
    h = oracles.hamiltonian(offsets, jeff)
    iplus = oracles.SX + 1j * oracles.SY
    op = sum(oracles.embed(iplus, q, n) for q in range(n) if species[q] == channel)
    out = []
    for t in times:
        u = oracles.expm_hermitian(h, t)
        out.append(np.trace(u @ rho @ u.conj().T @ op))
    return np.array(out)


def test_maximally_mixed_gives_no_signal():
    fid = acquire_fid(engine.maximally_mixed(2), two(), dwell_s=1e-3, points=64)
    assert np.all(fid.samples["H1"] == 0)
    assert spectrum(fid).peaks == []


def test_single_spin_precesses_at_its_offset():
    rho = engine.maximally_mixed(1) - engine.spin_operator(1, 0, "y")
    fid = acquire_fid(rho, single(100.0), dwell_s=1e-3, points=200)
    s = fid.samples["H1"]
    np.testing.assert_allclose(np.abs(s), np.abs(s[0]), rtol=1e-12)
    np.testing.assert_allclose(s[1:] / s[:-1], np.exp(2j * math.pi * 100 * 1e-3), rtol=1e-12)
    np.testing.assert_allclose(s, dense_fid(rho, [100.0], np.zeros((1, 1)), ["H1"], "H1", fid.times), atol=1e-12)
    (peak,) = spectrum(fid).peaks
    assert peak.frequency_hz == pytest.approx(100.0)


def test_t2_envelope():
    system = single(100.0, t2=1.0, t1=1.0)
    params = engine.RelaxationParams.from_system(system)
    rho = engine.maximally_mixed(1) - engine.spin_operator(1, 0, "y")
    fid = acquire_fid(rho, system, params, dwell_s=5e-3, points=400)
    s = fid.samples["H1"]
    np.testing.assert_allclose(np.abs(s), np.abs(s[0]) * np.exp(-fid.times / 1.0), rtol=1e-10)
    free = acquire_fid(rho, system, None, dwell_s=5e-3, points=400).samples["H1"]
    np.testing.assert_allclose(s, free * np.exp(-fid.times), atol=1e-12)


def test_two_spin_doublets():
    system = two(10.0)
    rho = engine.apply_hard_pulse(polarization_override(2, 1e-4), [0, 1], math.pi / 2, 0.0)
    spec = spectrum(acquire_fid(rho, system, dwell_s=1e-3, points=1000))
    assert sorted(round(p.frequency_hz, 9) for p in spec.peaks) == [-105.0, -95.0, 95.0, 105.0]


def test_fid_is_linear_in_epsilon():
    system = SpinSystem.build(["H1", "C13", "H1"], [150.0, -40.0, -300.0],
                              j_hz=[[0, 140, 7], [140, 0, 0], [7, 0, 0]])
    rng = np.random.default_rng(3)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    ref = acquire_fid(np.outer(psi, psi.conj()), system, dwell_s=2e-4, points=256)
    for eps in (1e-4, 1e-2, 0.5, 1.0):
        fid = acquire_fid(pseudopure(3, eps, psi), system, dwell_s=2e-4, points=256)
        for chan in ("H1", "C13"):
            np.testing.assert_allclose(fid.samples[chan], eps * ref.samples[chan], atol=1e-10 * eps, rtol=0)


@pytest.mark.parametrize("seed", range(8))
def test_peak_count_matches_multiplet_theory(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    # integer line positions sit on the 1 Hz grid; superincreasing couplings keep every line distinct
    offsets = [float(-1050 + 700 * q + rng.integers(-20, 20)) for q in range(n)]
    couplings = iter(rng.permutation([4, 10, 22, 46, 94, 190]).tolist())
    jm = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            j = next(couplings)
            if rng.random() < 0.7:
                jm[a, b] = jm[b, a] = float(j * rng.choice([-1, 1]))
    system = SpinSystem.build(["H1"] * n, offsets, j_hz=jm)
    rho = engine.apply_hard_pulse(polarization_override(n, 1e-3), range(n), math.pi / 2, 0.0)
    spec = spectrum(acquire_fid(rho, system, dwell_s=2.5e-4, points=4000))
    expected = sorted({f for q in range(n) for f in oracles.transition_frequencies(offsets, jm, q)})
    theory = sum(2 ** int(np.count_nonzero(jm[q])) for q in range(n))
    assert len(expected) == theory
    assert sorted(round(p.frequency_hz, 6) for p in spec.peaks) == pytest.approx(expected, abs=1e-9)


def test_parseval():
    system = two(10.0)
    rho = engine.apply_hard_pulse(polarization_override(2, 0.3), [0, 1], 1.1, 0.4)
    fid = acquire_fid(rho, system, dwell_s=7e-4, points=777)
    assert parseval_error(fid, spectrum(fid)) < 1e-8
    hetero = two(140.0, (20.0, -35.0), ("H1", "C13"))
    fid = acquire_fid(engine.apply_hard_pulse(polarization_override(2, 1.0), [0, 1], 1.0), hetero, points=300)
    for chan, spec in spectra(fid).items():
        assert parseval_error(fid, spec, chan) < 1e-8


def test_heteronuclear_channels_are_separate():
    hetero = two(140.0, (20.0, -35.0), ("H1", "C13"))
    rho = engine.apply_hard_pulse(polarization_override(2, 1.0), [0, 1], math.pi / 2)
    specs = spectra(acquire_fid(rho, hetero, dwell_s=1e-3, points=1000))
    assert sorted(p.frequency_hz for p in specs["H1"].peaks) == pytest.approx([-50.0, 90.0])
    assert sorted(p.frequency_hz for p in specs["C13"].peaks) == pytest.approx([-105.0, 35.0])
    rows = peak_table(specs)
    assert {r["channel"] for r in rows} == {"H1", "C13"} and len(rows) == 4


def test_csv_exports(tmp_path):
    rho = engine.apply_hard_pulse(polarization_override(2, 1.0), [0], math.pi / 2)
    fid = acquire_fid(rho, two(), points=16)
    fid.to_csv(tmp_path / "fid.csv")
    rows = list(csv.reader(open(tmp_path / "fid.csv")))
    assert rows[0] == ["time_s", "H1_real", "H1_imag"] and len(rows) == 17
    assert complex(float(rows[3][1]), float(rows[3][2])) == fid.samples["H1"][2]
    spec = spectrum(fid)
    spec.to_csv(tmp_path / "spec.csv")
    assert next(csv.reader(open(tmp_path / "spec.csv"))) == ["freq_hz", "real", "imag"]
    spec.save_peaks(tmp_path / "peaks.json")
    assert (tmp_path / "peaks.json").read_text().startswith("[")


def test_acquire_rejects_bad_sampling():
    with pytest.raises(ValueError):
        acquire_fid(engine.maximally_mixed(1), single(), dwell_s=0.0)
    with pytest.raises(ValueError):
        acquire_fid(engine.maximally_mixed(1), single(), points=1)


# -- qubit values -------------------------------------------------------------

def test_pseudopure_basis_state_reads_exactly():
    r = read_qubits(pseudopure(2, 4e-5, 0b01))
    assert r.values() == (0.0, 1.0)
    assert r.epsilon == pytest.approx(4e-5) and r.mode == "pseudopure-basis"
    assert all(q.deterministic for q in r.qubits)
    assert r.qubits[1].analog == pytest.approx(1.0, abs=1e-9)


def test_uniform_superposition_is_analog():
    plus = np.array([1, 1]) / math.sqrt(2)
    r = read_qubits(engine.pure_state(plus))
    (q,) = r.qubits
    assert q.value == pytest.approx(0.5) and q.analog == pytest.approx(0.5) and not q.deterministic


def test_maximally_mixed_reports_no_signal():
    r = read_qubits(engine.maximally_mixed(3))
    assert r.mode == "no-signal" and r.epsilon == 0.0 and r.values() == (None, None, None)


def test_superposition_normalized_by_spectral_epsilon():
    psi = np.kron([1, 0], [math.cos(0.3), math.sin(0.3)])
    r = read_qubits(pseudopure(2, 1e-3, psi))
    assert r.mode == "pseudopure"
    assert r.values()[0] == 0.0
    assert r.qubits[1].analog == pytest.approx(math.sin(0.3) ** 2, abs=1e-9)


def test_rounding_window():
    psi = np.array([math.cos(0.1), math.sin(0.1)])
    q = read_qubits(engine.pure_state(psi)).qubits[0]
    assert q.value == 0.0 and q.analog == pytest.approx(math.sin(0.1) ** 2)


def test_phase_readout_sign():
    system = two(10.0)
    for index, expected in ((0b00, (1.0, 1.0)), (0b01, (1.0, -1.0)), (0b10, (-1.0, 1.0))):
        rho = pseudopure(2, 1.0, index)
        got = tuple(read_by_phase(rho, system, q) for q in range(2))
        assert got == pytest.approx(expected, abs=1e-9)
    assert read_by_phase(pseudopure(2, 3e-5, 0b11), system, 0) == pytest.approx(-3e-5, rel=1e-9)


def test_multiplet_readout_names_the_neighbor():
    system = two(10.0)
    assert read_by_multiplet(pseudopure(2, 1e-4, 0b00), system, 0, 1) == pytest.approx(0.0, abs=1e-9)
    assert read_by_multiplet(pseudopure(2, 1e-4, 0b01), system, 0, 1) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        read_by_multiplet(pseudopure(2, 1.0), two(0.0), 0, 1)


def test_off_grid_lines_are_rejected():
    with pytest.raises(ValueError):
        read_by_phase(pseudopure(2, 1.0), two(10.0, (100.3, -100.0)), 0)


# -- decay -------------------------------------------------------------------------

def test_identity_blocks_decay_at_the_t2_rate():
    t2 = 0.5
    system = SpinSystem.build(["H1", "C13"], [60.0, -30.0], j_hz=[[0, 50], [50, 0]],
                              t1_s=[math.inf, math.inf], t2_s=[t2, t2])
    block, _ = compile_circuit(Circuit(2, (Gate("CZ", (0, 1)), Gate("CZ", (0, 1)))), system)
    params = engine.RelaxationParams.from_system(system)
    rho = engine.apply_hard_pulse(polarization_override(2, 1.0), [0, 1], math.pi / 2, math.pi / 2)
    m, amps = block_decay(block, rho, system, params, range(0, 9))
    rate = fit_decay_rate(m, amps)
    assert rate == pytest.approx(block.duration_s / t2, rel=1e-6)
    np.testing.assert_allclose(amps, amps[0] * np.exp(-m * block.duration_s / t2), rtol=1e-9)
