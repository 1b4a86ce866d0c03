"""Desk-scale simulator and compiler for liquid-state NMR quantum computing."""

from .compiler import Circuit, Gate, compile_circuit, parse_circuit
from .demos import run_demo
from .engine import RelaxationParams, po_decompose
from .pipeline import execute
from .preparation import ThermalConditions, extract_epsilon, prepare_state, thermal_state
from .readout import acquire_fid, read_qubits, spectrum
from .sequence import PulseSequence, run_sequence
from .spin_model import SpinSystem, load_molecule

__version__ = "0.1.0"

__all__ = [
    "Circuit", "Gate", "PulseSequence", "RelaxationParams", "SpinSystem", "ThermalConditions",
    "acquire_fid", "compile_circuit", "execute", "extract_epsilon", "load_molecule", "parse_circuit",
    "po_decompose", "prepare_state", "read_qubits", "run_demo", "run_sequence", "spectrum", "thermal_state",
]
