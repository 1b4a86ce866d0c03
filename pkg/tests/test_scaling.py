import csv
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmrqc import constants
from nmrqc.preparation import epsilon_report
from nmrqc.scaling import (
    T1_CAUTION,
    critical_field,
    critical_temperature,
    decoherence_budget,
    epsilon_scaling_table,
    excess_population,
    qubit_limit,
    scaling_report,
    thermal_energy,
    write_epsilon_csv,
    zeeman_energy,
)

import oracles

GAMMA_H = constants.GAMMA["H1"]
HBAR = oracles.PLANCK / (2 * math.pi)


def test_critical_temperature_examples():
    assert critical_temperature(21.1) == pytest.approx(0.0431, rel=2e-3)
    assert critical_temperature(21.1) == pytest.approx(0.043, rel=0.02)
    assert critical_temperature(2.3) == pytest.approx(0.0047, rel=1e-2)
    assert critical_temperature(5.0, gamma=0.0) == 0.0
    assert critical_temperature(21.1) == HBAR * GAMMA_H * 21.1 / oracles.BOLTZMANN


def test_critical_field_examples():
    assert critical_field(300.0) == pytest.approx(1.47e5, rel=5e-3)
    assert critical_field(300.0) == pytest.approx(150000, rel=0.05)
    assert critical_field(critical_temperature(21.1)) == pytest.approx(21.1, rel=1e-12)
    assert critical_field(1e-300) < 1e-290


def test_nonpositive_inputs_rejected():
    for fn in (critical_temperature, critical_field, zeeman_energy):
        with pytest.raises(ValueError):
            fn(0.0)
    with pytest.raises(ValueError):
        excess_population(0.0, 300.0)
    with pytest.raises(ValueError):
        decoherence_budget(1.0, 0.0)
    with pytest.raises(ValueError):
        qubit_limit(0, ["H1"])
    with pytest.raises(ValueError):
        epsilon_scaling_table(0, 5e8, 300)


@settings(max_examples=50)
@given(st.floats(1e-3, 1e3), st.sampled_from(sorted(constants.GAMMA)))
def test_field_temperature_round_trip(field, species):
    gamma = constants.GAMMA[species]
    assert critical_field(critical_temperature(field, gamma), gamma) == pytest.approx(field, rel=1e-10)


def test_zeeman_energy_range():
    assert zeeman_energy(100e6) * 1e6 == pytest.approx(0.41, abs=0.005)
    assert zeeman_energy(900e6) * 1e6 == pytest.approx(3.72, abs=0.005)
    assert thermal_energy(300.0) * 1e3 == pytest.approx(25.85, abs=0.01)


def test_excess_population_examples():
    frac, _ = excess_population(500e6, 300.0)
    assert frac == pytest.approx(4.0e-5, rel=0.01) and frac < 1e-4
    assert frac == math.tanh(oracles.PLANCK * 500e6 / (2 * oracles.BOLTZMANN * 300.0))
    _, count = excess_population(500e6, 300.0, 1e17)
    assert 1e12 <= count <= 1e13 * 10
    assert excess_population(500e6, math.inf) == (0.0, 0.0)
    assert excess_population(500e6, 1e30)[0] < 1e-25


@pytest.mark.parametrize("capacity,species,expected", [
    (6, ["H1", "C13", "N15", "F19", "P31"], 30),
    (3, ["H1", "C13", "N15", "F19", "P31"], 15),
    (6, ["H1"], 6),
    (6, ["H1", "H1"], 6),
])
def test_qubit_limit(capacity, species, expected):
    assert qubit_limit(capacity, species) == expected


def test_decoherence_budget_examples():
    b = decoherence_budget(1.0, 1e-3)
    assert b.gates == 1000 and b.caution == T1_CAUTION
    assert decoherence_budget(10.0, 0.070).gates == 142
    assert decoherence_budget(2.5, 2.5).gates == 1
    assert decoherence_budget(0.999, 1.0).gates == 0


def test_epsilon_table_falls_off():
    rows = epsilon_scaling_table(12, 500e6, 300.0)
    eps = [r.epsilon_exact for r in rows]
    assert [r.n for r in rows] == list(range(1, 13))
    assert all(b < a for a, b in zip(eps[1:], eps[2:]))
    assert eps[11] / eps[1] < 1e-2
    for n in range(1, 12):
        assert rows[n].epsilon_hightemp / rows[n - 1].epsilon_hightemp == pytest.approx((n + 1) / (2 * n), rel=1e-10)
        assert eps[n] / eps[n - 1] == pytest.approx((n + 1) / (2 * n), rel=1e-8)
    assert rows[0].repetitions_model == 1.0
    assert rows[5].repetitions_model == pytest.approx((eps[0] / eps[5]) ** 2)


def test_epsilon_table_delegates_bit_for_bit():
    for r in epsilon_scaling_table(9, 321e6, 290.0):
        rep = epsilon_report(r.n, 321e6, 290.0)
        assert (r.epsilon_exact, r.epsilon_hightemp) == (rep.epsilon_exact, rep.epsilon_hightemp)


def test_epsilon_csv(tmp_path):
    rows = epsilon_scaling_table(4, 500e6, 300.0)
    write_epsilon_csv(rows, tmp_path / "eps.csv")
    lines = list(csv.reader(open(tmp_path / "eps.csv")))
    assert lines[0] == ["n", "epsilon_exact", "epsilon_hightemp", "repetitions_model"]
    assert float(lines[2][1]) == rows[1].epsilon_exact


def test_scaling_report_defaults():
    rep = scaling_report()
    assert rep.qubit_limit == 30 and rep.gate_budget.gates == 1000
    assert rep.inputs["larmor_hz"] == pytest.approx(500e6, rel=1e-3)
    d = rep.as_dict()
    assert d["repetitions_column"].startswith("model")
    assert set(d["zeeman_energy_ev"]) == {"100000000.0", "900000000.0"}
    assert len(d["epsilon_table"]) == 12


def test_negative_gamma_species_use_magnitude():
    assert critical_temperature(10.0, constants.GAMMA["N15"]) > 0
    assert scaling_report(species="N15").inputs["larmor_hz"] > 0
