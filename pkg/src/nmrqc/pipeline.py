"""Prepare, compile, simulate and read out one circuit on one molecule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .compiler import compile_circuit
from .errors import StructureError
from .preparation import ThermalConditions, find_pseudopure, prepare_state
from .readout import acquire_fid, peak_table, read_qubits, spectra
from .sequence import run_sequence


# the report lists the main lines only; the peak file keeps everything above the picking floor
REPORT_PEAK_FRACTION = 1e-2


@dataclass
class RunResult:
    initial: np.ndarray
    final: np.ndarray
    sequence: object
    compilation: object
    readout: object
    fid: object
    spectra: dict
    structure: dict

    def report(self):
        return {
            "compilation": self.compilation.as_dict(),
            "initial_state": self.structure,
            "readout": self.readout.as_dict(),
            "peaks": peak_table(self.spectra, REPORT_PEAK_FRACTION),
        }


def structure_summary(rho):
    """Pseudo-pure index and eps of a state, or the deviation that rules it out."""
    try:
        index, eps = find_pseudopure(rho)
    except StructureError as exc:
        return {"pseudopure": False, "deviation": exc.deviation, "epsilon": None, "index": None}
    n = engine.n_spins(rho)
    return {"pseudopure": True, "epsilon": float(eps), "index": format(index, f"0{n}b"), "deviation": 0.0}


def read_pulse(rho):
    """(pi/2)_y on every spin so populations show up as in-phase lines."""
    n = engine.n_spins(rho)
    return engine.apply_hard_pulse(rho, range(n), math.pi / 2, math.pi / 2)


def execute(system, circuit, preparation="pure", epsilon=None, relaxation=False, conditions=None,
            dwell_s=1e-3, points=1024, rf_nutation_hz=None, crush_mode="physical"):
    conditions = conditions or ThermalConditions.for_system(system)
    rho0 = prepare_state(system, preparation, epsilon, conditions, crush_mode)
    kwargs = {} if rf_nutation_hz is None else {"rf_nutation_hz": rf_nutation_hz}
    seq, report = compile_circuit(circuit, system, **kwargs)
    params = engine.RelaxationParams.from_system(system, conditions) if relaxation else None
    rho = run_sequence(seq, rho0, system, params).rho
    fid = acquire_fid(read_pulse(rho), system, params, dwell_s, points)
    return RunResult(
        initial=rho0,
        final=rho,
        sequence=seq,
        compilation=report,
        readout=read_qubits(rho, system),
        fid=fid,
        spectra=spectra(fid),
        structure=structure_summary(rho0),
    )


STATE_FORMAT = "nmrqc-state/1"


def state_to_dict(rho):
    return {"format": STATE_FORMAT, "real": rho.real.tolist(), "imag": rho.imag.tolist()}


def state_from_dict(data, source=None):
    from .errors import ParseError

    try:
        rho = np.asarray(data["real"], dtype=float) + 1j * np.asarray(data.get("imag", 0.0), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"state file needs 'real' and 'imag' matrices ({exc})", source=source) from None
    try:
        engine.check_density_matrix(rho)
    except ValueError as exc:
        raise ParseError(str(exc), source=source) from None
    return rho
