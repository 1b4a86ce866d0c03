import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmrqc import constants, engine
from nmrqc.compiler import circuit_unitary
from nmrqc.errors import CapExceededError, StructureError, UnsupportedSystemError
from nmrqc.preparation import (
    ThermalConditions,
    cyclic_permutation,
    epsilon_by_species,
    epsilon_report,
    extract_epsilon,
    find_pseudopure,
    p_correct,
    p_wrong,
    polarization_override,
    prepare_pseudopure_spatial,
    prepare_pseudopure_temporal,
    prepare_state,
    pseudopure,
    spatial_sequence,
    spectral_epsilon,
    temporal_experiment_sequences,
    thermal_state,
    upper_bound_check,
)
from nmrqc.spin_model import SpinSystem

import oracles

NU_500 = constants.GAMMA["H1"] * 11.74 / (2 * math.pi)


def proton_pair(j=7.0):
    return SpinSystem.build(["H1", "H1"], [200.0, -150.0], j_hz=[[0, j], [j, 0]])


# -- thermal states and eps formulas ----------------------------------------------

def test_thermal_single_proton_excess():
    s = SpinSystem.build(["H1"], [0.0])
    rho = thermal_state(s, ThermalConditions(300.0, 11.74))
    excess = 2 * engine.expectation(rho, engine.spin_operator(1, 0, "z"))
    x = constants.PLANCK * NU_500 / (2 * constants.BOLTZMANN * 300.0)
    assert excess == pytest.approx(math.tanh(x), rel=1e-12)
    assert excess == pytest.approx(4.0e-5, rel=0.01)
    assert excess < 1e-4


def test_thermal_infinite_temperature_limit():
    s = SpinSystem.build(["H1", "C13"], [0.0, 0.0])
    rho = thermal_state(s, ThermalConditions(1e30, 11.74))
    np.testing.assert_allclose(rho, engine.maximally_mixed(2), atol=1e-15)


@pytest.mark.parametrize("species", [["H1", "H1"], ["H1", "C13"], ["H1", "C13", "N15"], ["F19", "P31", "H1"]])
@pytest.mark.parametrize("temperature", [300.0, 0.05, 2e-3])
def test_thermal_matches_boltzmann(species, temperature):
    s = SpinSystem.build(species, [0.0] * len(species), field_tesla=14.1)
    rho = thermal_state(s, ThermalConditions(temperature, 14.1))
    pops = oracles.boltzmann_populations(s.larmor_hz(), temperature)
    np.testing.assert_allclose(np.real(np.diagonal(rho)), pops, rtol=1e-10, atol=1e-300)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-14)


def test_homonuclear_pair_four_level_ladder():
    s = proton_pair()
    pops = np.real(np.diagonal(thermal_state(s, ThermalConditions(300.0, 11.74))))
    excess = pops - 0.25
    # first-order Boltzmann: excess proportional to -E, energies (-h nu, 0, 0, +h nu)
    # the middle levels differ from 1/4 only at second order
    assert abs(excess[1]) < 1e-4 * abs(excess[0]) and excess[1] == pytest.approx(excess[2], abs=1e-18)
    assert excess[0] == pytest.approx(-excess[3], rel=1e-4)


def test_epsilon_n1_is_tanh():
    for nu, t in ((NU_500, 300.0), (1e9, 1.0), (4e8, 0.01)):
        x = constants.PLANCK * nu / (2 * constants.BOLTZMANN * t)
        assert epsilon_report(1, nu, t).epsilon_exact == pytest.approx(math.tanh(x), abs=1e-12)


def test_epsilon_n10_hightemp_value():
    r = epsilon_report(10, 500e6, 300.0)
    assert r.epsilon_hightemp == pytest.approx(10 * 8.0e-5 / 1024, rel=0.01)
    assert r.epsilon_hightemp == pytest.approx(7.8e-7, rel=0.02)


def test_epsilon_hightemp_limit():
    ratios = [epsilon_report(4, 500e6, t).epsilon_exact / epsilon_report(4, 500e6, t).epsilon_hightemp
              for t in (1e-3, 1e-1, 10.0, 1e3)]
    assert abs(ratios[-1] - 1) < 1e-6
    assert all(abs(a - 1) >= abs(b - 1) for a, b in zip(ratios, ratios[1:]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.floats(1e7, 1e9), st.floats(1e-3, 1e3))
def test_epsilon_is_population_difference(n, nu, t):
    r = epsilon_report(n, nu, t)
    pops = oracles.boltzmann_populations([nu] * n, t)
    assert r.epsilon_exact <= 1
    assert r.epsilon_exact == pytest.approx(pops[0] - pops[-1], abs=1e-10)
    if constants.PLANCK * nu / (constants.BOLTZMANN * t) < 1e-3:
        assert r.epsilon_hightemp == pytest.approx(r.epsilon_exact, rel=0.01)


def test_epsilon_large_argument_stays_finite():
    r = epsilon_report(200, 1e9, 1e-3)
    assert r.epsilon_exact == pytest.approx(1.0)


def test_epsilon_report_preconditions():
    for args in ((0, 1e8, 300), (1, 0.0, 300), (1, 1e8, 0.0)):
        with pytest.raises(ValueError):
            epsilon_report(*args)


def test_epsilon_by_species_reports_each_species():
    s = SpinSystem.build(["H1", "C13", "H1"], [0.0, 0.0, 100.0])
    out = epsilon_by_species(s, ThermalConditions(300.0, 11.74))
    assert set(out) == {"H1", "C13"}
    assert out["H1"].n == 2 and out["C13"].n == 1


def test_p_correct_examples():
    assert p_correct(1.0, 4) == 1.0
    assert p_correct(0.0, 4) == 0.25
    assert p_correct(4e-5, 4) == pytest.approx(0.2500300, abs=1e-12)
    with pytest.raises(ValueError):
        p_correct(1.5, 4)


@settings(max_examples=50)
@given(st.floats(0, 1), st.integers(2, 1 << 20))
def test_p_correct_plus_wrong_is_one(eps, N):
    assert p_correct(eps, N) + p_wrong(eps, N) == pytest.approx(1.0, abs=1e-15)


# -- structure checks -------------------------------------------------------------

def test_extract_epsilon_examples():
    assert extract_epsilon(engine.maximally_mixed(2)) == pytest.approx(0.0, abs=1e-15)
    assert extract_epsilon(engine.basis_state(2, 0)) == pytest.approx(1.0)
    rho = 0.5 * engine.maximally_mixed(3) + 0.5 * engine.basis_state(3, 0)
    assert extract_epsilon(rho) == pytest.approx(0.5)


def test_extract_epsilon_reports_deviation():
    rho = engine.maximally_mixed(2).copy()
    rho[0, 1] = rho[1, 0] = 1e-6
    with pytest.raises(StructureError) as info:
        extract_epsilon(rho)
    assert info.value.deviation == pytest.approx(1e-6)


def test_find_pseudopure_locates_index():
    idx, eps = find_pseudopure(pseudopure(3, 0.2, 5))
    assert idx == 5 and eps == pytest.approx(0.2)


def test_spectral_epsilon_for_superposition():
    psi = np.array([1, 1, 1, -1]) / 2
    assert spectral_epsilon(pseudopure(2, 0.3, psi)) == pytest.approx(0.3)
    with pytest.raises(StructureError):
        spectral_epsilon(thermal_state(SpinSystem.build(["H1", "C13"], [0, 0]), ThermalConditions(0.01, 11.74)))


def test_polarization_override_examples():
    np.testing.assert_allclose(polarization_override(2, 1.0), engine.basis_state(2, 0))
    np.testing.assert_allclose(polarization_override(2, 0.0), engine.maximally_mixed(2))
    assert polarization_override(2, 0.1)[0, 0].real == pytest.approx(0.325)
    with pytest.raises(ValueError):
        polarization_override(2, -0.1)


# -- spatial averaging ------------------------------------------------------------

def _check_pseudopure(rho):
    pops = np.real(np.diagonal(rho))
    assert np.ptp(pops[1:]) < 1e-10
    return extract_epsilon(rho, 0, 1e-6)


@pytest.mark.parametrize("species", [["H1", "H1"], ["H1", "C13"], ["C13", "H1"], ["H1", "N15"], ["F19", "P31"]])
@pytest.mark.parametrize("j", [7.143, -12.0, 215.0])
def test_spatial_from_thermal(species, j):
    s = SpinSystem.build(species, [150.0, -90.0], j_hz=[[0, j], [j, 0]])
    cond = ThermalConditions(300.0, 11.74)
    rho = prepare_pseudopure_spatial(s, cond)
    eps = _check_pseudopure(rho)
    assert eps > 0
    assert upper_bound_check(eps, s, cond)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 1), min_size=4, max_size=4), st.floats(-50, 50).filter(lambda j: abs(j) > 0.1))
def test_spatial_any_diagonal_input(weights, j):
    s = SpinSystem.build(["H1", "H1"], [100.0, -100.0], j_hz=[[0, j], [j, 0]])
    pops = np.array(weights) / sum(weights)
    rho = np.diag(pops).astype(complex)
    try:
        out = prepare_pseudopure_spatial(s, rho=rho)
    except UnsupportedSystemError:
        return
    idx, _ = find_pseudopure(out, 1e-10)
    others = np.delete(np.real(np.diagonal(out)), idx)
    assert np.ptp(others) < 1e-10


def test_spatial_identity_input_untouched():
    s = proton_pair()
    out = prepare_pseudopure_spatial(s, rho=engine.maximally_mixed(2))
    np.testing.assert_allclose(out, engine.maximally_mixed(2), atol=1e-16)
    assert extract_epsilon(out) == pytest.approx(0.0, abs=1e-15)


def test_spatial_rejects_other_sizes():
    s = SpinSystem.build(["H1"] * 3, [0, 100, 200])
    with pytest.raises(UnsupportedSystemError):
        prepare_pseudopure_spatial(s)


def test_spatial_sequence_uses_two_crushes():
    s = proton_pair()
    seq = spatial_sequence(s, thermal_state(s, ThermalConditions()))
    assert [ev.kind for ev in seq].count("crush") == 2


# -- temporal averaging ---------------------------------------------------------

def test_cyclic_permutation_fixes_ground():
    for n in (1, 2, 3):
        for shift in range(2**n - 1):
            u = cyclic_permutation(n, shift)
            assert u[0, 0] == 1
            np.testing.assert_allclose(u @ u.T, np.eye(2**n))


def test_temporal_two_spins_epsilon_formula():
    s = proton_pair()
    cond = ThermalConditions(300.0, 11.74)
    th = thermal_state(s, cond)
    rho = prepare_pseudopure_temporal(s, cond)
    p0 = th[0, 0].real
    assert extract_epsilon(rho) == pytest.approx((4 * p0 - 1) / 3, rel=1e-12)


def test_temporal_three_spins_exact():
    s = SpinSystem.build(["H1", "C13", "N15"], [0.0, 0.0, 0.0])
    rho = prepare_pseudopure_temporal(s, ThermalConditions(1.0, 14.1))
    assert np.ptp(np.real(np.diagonal(rho))[1:]) < 1e-12


def test_temporal_identity_and_cap():
    s = SpinSystem.build(["H1"] * 3, [0, 100, 200])
    out = prepare_pseudopure_temporal(s, rho=engine.maximally_mixed(3))
    np.testing.assert_allclose(out, engine.maximally_mixed(3), atol=1e-16)
    with pytest.raises(CapExceededError):
        prepare_pseudopure_temporal(SpinSystem.build(["H1"] * 5, [0, 1, 2, 3, 4]))
    prepare_pseudopure_temporal(SpinSystem.build(["H1"] * 5, [0, 1, 2, 3, 4]), cap=5)


def test_temporal_bound_and_order_independence():
    s = SpinSystem.build(["H1"] * 4, [0, 100, 200, 300])
    cond = ThermalConditions(300.0, 11.74)
    rho = prepare_pseudopure_temporal(s, cond)
    assert upper_bound_check(extract_epsilon(rho), s, cond)
    # averaging the experiments in reverse order gives the same bits
    th = thermal_state(s, cond)
    exps = [engine.unitary_apply(th, cyclic_permutation(4, k)) for k in range(15)]
    from nmrqc.preparation import _compensated_mean

    np.testing.assert_array_equal(_compensated_mean(exps[::-1]), rho)


def test_temporal_cnot_networks_realize_cycle():
    circuits = temporal_experiment_sequences(2)
    perms = [circuit_unitary(c) for c in circuits]
    for u in perms:
        assert u[0, 0] == 1
    # the three relabelings are distinct powers of one 3-cycle
    np.testing.assert_array_equal(perms[2], perms[1] @ perms[1])
    assert not np.array_equal(perms[1], np.eye(4))
    with pytest.raises(UnsupportedSystemError):
        temporal_experiment_sequences(3)


def test_prepare_state_dispatch():
    s = proton_pair()
    assert extract_epsilon(prepare_state(s, "pure")) == pytest.approx(1.0)
    assert extract_epsilon(prepare_state(s, "override", 0.25)) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        prepare_state(s, "override")
    with pytest.raises(ValueError):
        prepare_state(s, "magic")
    th = prepare_state(s, "thermal")
    assert np.trace(th).real == pytest.approx(1.0)
