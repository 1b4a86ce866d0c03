"""Thermal states, polarization formulas and pseudo-pure state preparation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import constants
from .engine import gradient_crush, maximally_mixed, spin_operator, unitary_apply
from .errors import CapExceededError, StructureError, UnsupportedSystemError

STRUCTURE_TOL = 1e-8
TEMPORAL_CAP = 4


@dataclass(frozen=True)
class ThermalConditions:
    temperature_k: float = 300.0
    field_tesla: float = 11.74

    def __post_init__(self):
        if not self.temperature_k > 0:
            raise ValueError("temperature must be positive")
        if self.field_tesla < 0:
            raise ValueError("field must be nonnegative")

    @classmethod
    def for_system(cls, system, temperature_k=None):
        t = temperature_k if temperature_k is not None else (system.temperature_k or 300.0)
        return cls(t, system.field_tesla)


@dataclass(frozen=True)
class EpsilonReport:
    epsilon_exact: float
    epsilon_hightemp: float
    n: int
    nu_hz: float
    temperature_k: float


def _half_reduced_energy(nu_hz, temperature_k):
    """h nu / 2kT."""
    if math.isinf(temperature_k):
        return 0.0
    return constants.PLANCK * nu_hz / (2.0 * constants.BOLTZMANN * temperature_k)


def spin_polarizations(system, conditions):
    """Thermal ``<sigma_z>`` = tanh(h nu / 2kT) of each spin, from full Larmor frequencies."""
    nus = [s.nucleus.gamma * conditions.field_tesla / (2 * math.pi) for s in system.spins]
    return np.array([math.tanh(_half_reduced_energy(nu, conditions.temperature_k)) for nu in nus])


def thermal_state(system, conditions):
    """Boltzmann state of the Zeeman-only Hamiltonian.

    The state factorizes into single-spin states ``E/2 + tanh(h nu_i/2kT) I_z``;
    couplings and chemical shifts are negligible on the scale of kT.
    """
    rho = np.array([1.0])
    for z in spin_polarizations(system, conditions):
        rho = np.kron(rho, np.array([(1 + z) / 2, (1 - z) / 2]))
    return np.diag(rho).astype(complex)


def epsilon_report(n, nu_hz, temperature_k):
    """Largest pseudo-pure fraction extractable from a homonuclear thermal state."""
    if n < 1 or nu_hz <= 0 or temperature_k <= 0:
        raise ValueError("need n >= 1, nu > 0 and T > 0")
    x = _half_reduced_energy(nu_hz, temperature_k)
    # 2 sinh(n x) / (2^n cosh^n x), written to stay finite for large n x
    if n * x < 300:
        exact = 2.0 * math.sinh(n * x) / (2.0**n * math.cosh(x) ** n)
    else:
        exact = (1 - math.exp(-2 * n * x)) * math.exp(n * (x - math.log(2 * math.cosh(x))))
    hightemp = (2.0 * x * n) / 2.0**n
    # the exact value never exceeds 1; rounding can push it a hair above
    exact = min(exact, 1.0)
    return EpsilonReport(exact, hightemp, n, nu_hz, temperature_k)


def epsilon_by_species(system, conditions):
    """Per-species homonuclear bound; the mixed-species case has no closed form here."""
    out = {}
    for sp in dict.fromkeys(system.species):
        members = [s for s in system.spins if s.species == sp]
        nu = abs(members[0].nucleus.gamma) * conditions.field_tesla / (2 * math.pi)
        out[sp] = epsilon_report(len(members), nu, conditions.temperature_k)
    return out


def p_correct(epsilon, N):
    """Probability that a single readout of the pseudo-pure ensemble is right."""
    if not 0 <= epsilon <= 1 or N < 2:
        raise ValueError("need 0 <= epsilon <= 1 and N >= 2")
    return epsilon + (1 - epsilon) / N


def p_wrong(epsilon, N):
    if not 0 <= epsilon <= 1 or N < 2:
        raise ValueError("need 0 <= epsilon <= 1 and N >= 2")
    return (N - 1) * (1 - epsilon) / N


def polarization_override(system_or_n, epsilon):
    """Construct ``(1 - eps) 1/N + eps |0...0><0...0|`` directly."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    n = system_or_n if isinstance(system_or_n, int) else system_or_n.n
    rho = (1 - epsilon) * maximally_mixed(n)
    rho[0, 0] += epsilon
    return rho


def pseudopure(n, epsilon, psi=None):
    """``(1 - eps) 1/N + eps |psi><psi|``; ``psi`` a basis index or state vector."""
    rho = (1 - epsilon) * maximally_mixed(n)
    if psi is None:
        psi = 0
    if np.ndim(psi) == 0:
        rho[psi, psi] += epsilon
    else:
        v = np.asarray(psi, dtype=complex)
        v = v / np.linalg.norm(v)
        rho += epsilon * np.outer(v, v.conj())
    return rho


# -- structure checks ------------------------------------------------------------

def extract_epsilon(rho, index=0, tol=STRUCTURE_TOL):
    """Return eps for ``rho = (1 - eps) 1/N + eps |index><index|``.

    Raises StructureError when an off-diagonal element or the spread of the
    other populations exceeds ``tol``.
    """
    N = rho.shape[0]
    off = np.abs(rho - np.diag(np.diagonal(rho)))
    worst_off = float(off.max()) if N > 1 else 0.0
    pops = np.real(np.diagonal(rho))
    others = np.delete(pops, index)
    spread = float(others.max() - others.min()) if others.size else 0.0
    worst = max(worst_off, spread)
    if worst > tol:
        raise StructureError("state is not pseudo-pure", worst)
    return (N * pops[index] - 1) / (N - 1)


def find_pseudopure(rho, tol=STRUCTURE_TOL):
    """Locate the distinguished basis state of a diagonal pseudo-pure state.

    Returns ``(index, epsilon)``; raises StructureError if there is none.
    """
    pops = np.real(np.diagonal(rho))
    # the distinguished population is the one farthest from the median
    median = np.median(pops)
    index = int(np.argmax(np.abs(pops - median)))
    return index, extract_epsilon(rho, index, tol)


def epsilon_against(rho, psi):
    """``(N <psi|rho|psi> - 1)/(N - 1)``: pseudo-pure fraction along ``psi``."""
    v = np.asarray(psi, dtype=complex)
    v = v / np.linalg.norm(v)
    N = rho.shape[0]
    return float(((N * (v.conj() @ rho @ v)).real - 1) / (N - 1))


def spectral_epsilon(rho, tol=STRUCTURE_TOL):
    """eps of a state of the form ``(1-eps) 1/N + eps |psi><psi|`` for any psi.

    Uses the eigenvalues: N-1 equal small ones and one distinguished one.
    """
    w = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    N = len(w)
    rest = w[:-1]
    spread = float(rest.max() - rest.min()) if N > 1 else 0.0
    if spread > tol:
        raise StructureError("eigenvalues are not pseudo-pure", spread)
    return float(1 - N * rest.mean())


# -- preparation -------------------------------------------------------------------

def _two_spin_terms(rho):
    """Coefficients (a, b, c) of I_z, S_z and 2 I_z S_z in a 2-spin state."""
    iz = spin_operator(2, 0, "z")
    sz = spin_operator(2, 1, "z")
    a = float(np.trace(rho @ iz).real)
    b = float(np.trace(rho @ sz).real)
    c = float(np.trace(rho @ (2 * iz @ sz)).real)
    return a, b, c


def spatial_sequence(system, rho, crush_mode="physical"):
    """Pulse sequence for gradient-based pseudo-pure preparation on two spins.

    Steps: invert spins with negative polarization, ``(theta)_x`` on spin S and
    crush, ``(pi/4)_x`` on I, a refocused ``1/(2 J)`` coupling delay,
    ``(-+pi/4)_y`` on I, crush. ``theta`` is fixed by the input populations so
    that the surviving I_z, S_z and 2 I_z S_z terms come out equal.
    """
    from .sequence import Crush, Delay, HardPulse, PulseSequence

    if system.n != 2:
        raise UnsupportedSystemError(
            f"the gradient sequence is built for exactly 2 spins (got {system.n}); use temporal averaging")
    eff = system.effective_coupling(0, 1)
    events = []
    a, b, c = _two_spin_terms(rho)
    for spin, coef in ((0, a), (1, b)):
        if coef < 0:
            events.append(HardPulse((spin,), math.pi, 0.0))
    if a < 0:
        c = -c
    if b < 0:
        c = -c
    a, b = abs(a), abs(b)
    if a == 0 and b == 0 and c == 0:
        return PulseSequence(tuple(events))
    if eff == 0:
        raise UnsupportedSystemError("the two spins are not coupled")

    def ratio(p, q):
        den = 2 * q - c
        return math.inf if den == 0 else p / den

    if abs(ratio(a, b)) <= 1:
        i_spin, s_spin, r = 0, 1, ratio(a, b)
    elif abs(ratio(b, a)) <= 1:
        i_spin, s_spin, r = 1, 0, ratio(b, a)
    else:
        raise UnsupportedSystemError("no spin assignment balances the populations")
    theta = math.acos(r)
    tau = 1.0 / (2.0 * abs(eff))
    events += [
        HardPulse((s_spin,), theta, 0.0),
        Crush(crush_mode),
        HardPulse((i_spin,), math.pi / 4, 0.0),
        Delay(tau / 2),
        HardPulse((0, 1), math.pi, 0.0),
        Delay(tau / 2),
        HardPulse((0, 1), math.pi, 0.0),
        HardPulse((i_spin,), -math.copysign(math.pi / 4, eff), math.pi / 2),
        Crush(crush_mode),
    ]
    return PulseSequence(tuple(events))


def prepare_pseudopure_spatial(system, conditions=None, rho=None, crush_mode="physical"):
    """Gradient-based preparation for two spins, starting from ``rho`` or the thermal state."""
    from .sequence import run_sequence

    if system.n != 2:
        raise UnsupportedSystemError(
            f"the gradient sequence is built for exactly 2 spins (got {system.n}); use temporal averaging")
    if rho is None:
        rho = thermal_state(system, conditions or ThermalConditions.for_system(system))
    seq = spatial_sequence(system, rho, crush_mode)
    return run_sequence(seq, rho, system).rho


def cyclic_permutation(n, shift):
    """Permutation unitary fixing |0...0> and cycling the other 2^n - 1 basis states."""
    N = 2**n
    u = np.zeros((N, N), dtype=complex)
    u[0, 0] = 1
    for k in range(1, N):
        u[1 + (k - 1 + shift) % (N - 1), k] = 1
    return u


def _compensated_mean(states):
    stack = np.stack(states)
    re = np.apply_along_axis(math.fsum, 0, stack.real)
    im = np.apply_along_axis(math.fsum, 0, stack.imag)
    return (re + 1j * im) / len(states)


def prepare_pseudopure_temporal(system, conditions=None, rho=None, cap=TEMPORAL_CAP):
    """Temporal averaging: mean over the 2^n - 1 cyclic relabelings of the excited states.

    Exactly pseudo-pure for any diagonal input; off-diagonal input is crushed first.
    """
    n = system if isinstance(system, int) else system.n
    if n > cap:
        raise CapExceededError(f"temporal averaging needs {2**n - 1} experiments; n={n} exceeds cap {cap}")
    if rho is None:
        rho = thermal_state(system, conditions or ThermalConditions.for_system(system))
    if np.count_nonzero(np.abs(rho - np.diag(np.diagonal(rho))) > 0):
        warnings.warn("input has coherences; crushing them before averaging", stacklevel=2)
        rho = gradient_crush(rho, "ideal")
    N = 2**n
    experiments = [unitary_apply(rho, cyclic_permutation(n, s)) for s in range(N - 1)]
    if N == 2:
        return rho.copy()
    return _compensated_mean(experiments)


def temporal_experiment_sequences(n):
    """CNOT-network sequence realizing each cyclic relabeling for 2 spins.

    For two spins the 3-cycle 01 -> 11 -> 10 -> 01 is CNOT(1,0) after CNOT(0,1).
    """
    from .compiler import Circuit, Gate

    if n != 2:
        raise UnsupportedSystemError("explicit CNOT networks are provided for 2 spins only")
    cycle = [Gate("CNOT", (0, 1)), Gate("CNOT", (1, 0))]
    return [Circuit(2, tuple(cycle * s)) for s in range(3)]


def upper_bound_check(rho_epsilon, system, conditions):
    """True when a prepared eps does not exceed the homonuclear bound of the most polarized species."""
    bound = max(r.epsilon_exact for r in epsilon_by_species(system, conditions).values())
    return rho_epsilon <= bound * (1 + 1e-9)



PREPARATIONS = ("thermal", "pure", "override", "pseudopure_spatial", "pseudopure_temporal")


def prepare_state(system, method="pure", epsilon=None, conditions=None, crush_mode="physical"):
    """Initial state by name; ``override`` needs ``epsilon``."""
    if method == "pure":
        return polarization_override(system, 1.0)
    if method == "override":
        if epsilon is None:
            raise ValueError("override preparation needs an epsilon")
        return polarization_override(system, epsilon)
    conditions = conditions or ThermalConditions.for_system(system)
    if method == "thermal":
        return thermal_state(system, conditions)
    if method == "pseudopure_spatial":
        return prepare_pseudopure_spatial(system, conditions, crush_mode=crush_mode)
    if method == "pseudopure_temporal":
        return prepare_pseudopure_temporal(system, conditions)
    raise ValueError(f"unknown preparation {method!r}; choose from {', '.join(PREPARATIONS)}")
