"""Feasibility arithmetic for liquid-state NMR quantum computing."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

from . import constants
from .preparation import epsilon_report
from .spin_model import larmor_frequency

T1_CAUTION = "T1 is not a decoherence time; gate budgets based on it overstate the usable depth"


def critical_temperature(field_tesla, gamma=constants.GAMMA["H1"]):
    """Temperature at which the Zeeman splitting matches kT: ``hbar gamma B / k``."""
    if field_tesla <= 0:
        raise ValueError("field must be positive")
    return constants.HBAR * abs(gamma) * field_tesla / constants.BOLTZMANN


def critical_field(temperature_k, gamma=constants.GAMMA["H1"]):
    """Field at which the Zeeman splitting matches kT: ``k T / (hbar gamma)``."""
    if temperature_k <= 0:
        raise ValueError("temperature must be positive")
    return constants.BOLTZMANN * temperature_k / (constants.HBAR * abs(gamma))


def zeeman_energy(nu_hz):
    """Photon energy h nu in electronvolts."""
    if nu_hz <= 0:
        raise ValueError("frequency must be positive")
    return constants.PLANCK * nu_hz / constants.ELECTRON_VOLT


def thermal_energy(temperature_k):
    """kT in electronvolts."""
    return constants.BOLTZMANN * temperature_k / constants.ELECTRON_VOLT


def excess_population(nu_hz, temperature_k, molecules=1.0):
    """Fractional population excess ``tanh(h nu / 2kT)`` and the excess count."""
    if nu_hz <= 0 or temperature_k <= 0:
        raise ValueError("frequency and temperature must be positive")
    if math.isinf(temperature_k):
        return 0.0, 0.0
    frac = math.tanh(constants.PLANCK * nu_hz / (2 * constants.BOLTZMANN * temperature_k))
    return frac, frac * molecules


def qubit_limit(per_species_capacity, species):
    if per_species_capacity < 1:
        raise ValueError("capacity must be at least 1")
    return per_species_capacity * len(set(species))


@dataclass(frozen=True)
class GateBudget:
    gates: int
    t2_s: float
    gate_time_s: float
    caution: str = T1_CAUTION


def decoherence_budget(t2_s, gate_time_s):
    """Number of gates that fit in one T2."""
    if gate_time_s <= 0:
        raise ValueError("gate time must be positive")
    # guard against 1.0/1e-3 landing a hair below 1000
    ratio = t2_s / gate_time_s
    gates = math.floor(ratio * (1 + 1e-12))
    return GateBudget(gates, t2_s, gate_time_s)


@dataclass(frozen=True)
class EpsilonRow:
    n: int
    epsilon_exact: float
    epsilon_hightemp: float
    repetitions_model: float


def epsilon_scaling_table(n_max, nu_hz, temperature_k):
    """Rows n = 1..n_max; repetitions follow a 1/eps^2 signal-to-noise model normalized at n=1."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    reports = [epsilon_report(n, nu_hz, temperature_k) for n in range(1, n_max + 1)]
    ref = reports[0].epsilon_exact
    return [EpsilonRow(r.n, r.epsilon_exact, r.epsilon_hightemp, (ref / r.epsilon_exact) ** 2) for r in reports]


def write_epsilon_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "epsilon_exact", "epsilon_hightemp", "repetitions_model"])
        for r in rows:
            w.writerow([r.n, repr(r.epsilon_exact), repr(r.epsilon_hightemp), repr(r.repetitions_model)])


@dataclass
class ScalingReport:
    critical_temperature_k: float
    critical_field_tesla: float
    zeeman_energy_ev: dict
    excess_fraction: float
    epsilon_table: list
    qubit_limit: int
    gate_budget: GateBudget
    inputs: dict = field(default_factory=dict)

    def as_dict(self):
        d = asdict(self)
        d["zeeman_energy_ev"] = {str(k): v for k, v in self.zeeman_energy_ev.items()}
        d["repetitions_column"] = "model: 1/eps^2, normalized to n=1"
        return d


def scaling_report(
    field_tesla=11.74,
    temperature_k=300.0,
    species="H1",
    frequencies_hz=(100e6, 900e6),
    n_max=12,
    per_species_capacity=6,
    species_list=tuple(constants.GAMMA),
    t2_s=1.0,
    gate_time_s=1e-3,
):
    gamma = constants.GAMMA[species]
    nu = larmor_frequency(abs(gamma), field_tesla)
    return ScalingReport(
        critical_temperature_k=critical_temperature(field_tesla, gamma),
        critical_field_tesla=critical_field(temperature_k, gamma),
        zeeman_energy_ev={f: zeeman_energy(f) for f in frequencies_hz},
        excess_fraction=excess_population(nu, temperature_k)[0],
        epsilon_table=epsilon_scaling_table(n_max, nu, temperature_k),
        qubit_limit=qubit_limit(per_species_capacity, species_list),
        gate_budget=decoherence_budget(t2_s, gate_time_s),
        inputs={
            "field_tesla": field_tesla,
            "temperature_k": temperature_k,
            "species": species,
            "larmor_hz": nu,
            "n_max": n_max,
        },
    )
