"""Built-in two-qubit algorithm demonstrations."""

from __future__ import annotations

import math

from .compiler import Circuit, Gate
from .spin_model import molecule_from_dict

# Homonuclear proton pair; J = 7.143 Hz puts a CPhase(pi) at 70 ms.
DEMO_MOLECULE = {
    "field_tesla": 11.74,
    "temperature_k": 300.0,
    "spins": [
        {"species": "H1", "offset_hz": 250.0, "t1_s": 10.0, "t2_s": 2.0},
        {"species": "H1", "offset_hz": -250.0, "t1_s": 10.0, "t2_s": 2.0},
    ],
    "couplings": [{"i": 0, "j": 1, "j_hz": 7.143}],
}


def demo_system():
    return molecule_from_dict(DEMO_MOLECULE, source="<demo>")


def _x(q):
    return Gate("RX", (q,), math.pi)


def _ry(q, angle):
    return Gate("RY", (q,), angle)


# name -> (oracle gates on query 0 / ancilla 1, constant?)
DEUTSCH_ORACLES = {
    "constant0": ((), True),
    "constant1": ((_x(1),), True),
    "identity": ((Gate("CNOT", (0, 1)),), False),
    "negation": ((Gate("CNOT", (0, 1)), _x(1)), False),
}


def deutsch_circuit(oracle):
    """Query qubit 0, ancilla 1 (flipped to |1>); Ry(+-pi/2) stand in for Hadamards.

    Qubit 0 ends in |0> for a constant oracle and |1> for a balanced one.
    """
    gates, _ = DEUTSCH_ORACLES[oracle]
    prep = (_x(1), _ry(0, math.pi / 2), _ry(1, math.pi / 2))
    return Circuit(2, prep + tuple(gates) + (_ry(0, -math.pi / 2),))


def deutsch_expected(oracle):
    return 0.0 if DEUTSCH_ORACLES[oracle][1] else 1.0


GROVER_ITEMS = ("00", "01", "10", "11")


def grover2_oracle(marked):
    """Phase flip of one basis state: CZ conjugated by X on the qubits whose bit is 0."""
    flips = tuple(_x(q) for q, b in enumerate(marked) if b == "0")
    return flips + (Gate("CZ", (0, 1)),) + flips


def grover2_circuit(marked):
    """One Grover iteration over 4 items; the CZ oracle needs no ancilla."""
    if marked not in GROVER_ITEMS:
        raise ValueError(f"marked item must be one of {GROVER_ITEMS}")
    w = (_ry(0, math.pi / 2), _ry(1, math.pi / 2))
    w_inv = (_ry(0, -math.pi / 2), _ry(1, -math.pi / 2))
    reflect_zero = grover2_oracle("00")
    return Circuit(2, w + grover2_oracle(marked) + w_inv + reflect_zero + w)


def grover2_expected(marked):
    return tuple(float(b) for b in marked)


DEMOS = {
    "deutsch": (deutsch_circuit, tuple(DEUTSCH_ORACLES), lambda v: (deutsch_expected(v),)),
    "grover2": (grover2_circuit, GROVER_ITEMS, grover2_expected),
}


def run_demo(name, variant, preparation="pure", epsilon=None, relaxation=False, system=None):
    """Run one demo variant; returns ``(RunResult, expected, answer)``.

    ``answer`` holds the read qubit values that the demo checks (qubit 0 for
    Deutsch, both qubits for Grover).
    """
    from .pipeline import execute

    if name not in DEMOS:
        raise KeyError(f"unknown demo {name!r}; choose from {', '.join(DEMOS)}")
    build, variants, expected = DEMOS[name]
    if variant not in variants:
        raise KeyError(f"unknown variant {variant!r} for {name}; choose from {', '.join(variants)}")
    system = system or demo_system()
    result = execute(system, build(variant), preparation, epsilon, relaxation)
    exp = expected(variant)
    answer = result.readout.values()[: len(exp)]
    return result, exp, answer
