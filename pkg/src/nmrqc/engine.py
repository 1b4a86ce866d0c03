"""Density-matrix engine: unitary evolution, RF pulses, gradients, relaxation.

States are plain ``(N, N)`` complex arrays. Every operation returns a new
array and leaves its input untouched.

Pulse convention: a pulse of angle ``theta`` and phase ``phi`` acts as
``rho -> R rho R^dag`` with ``R = exp(-i theta (I_x cos phi + I_y sin phi))``,
so a (pi/2)_x pulse takes ``I_z`` to ``-I_y``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .spin_model import magnetic_numbers

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = -1e-10

_PAULI = {
    "E": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
SINGLE_SPIN = {
    "E": _PAULI["E"],
    "x": _PAULI["x"] / 2,
    "y": _PAULI["y"] / 2,
    "z": _PAULI["z"] / 2,
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}


def n_spins(rho):
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    if rho.shape != (dim, dim) or 2**n != dim:
        raise ValueError(f"expected a square matrix of size 2**n, got shape {rho.shape}")
    return n


def spin_operator(n, i, axis):
    """``I_axis`` of spin ``i`` embedded in an n-spin space (axis in x, y, z, +, -)."""
    mats = [SINGLE_SPIN["E"]] * n
    mats[i] = SINGLE_SPIN[axis]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def product_operator(n, axes):
    """Tensor product of per-spin factors, ``axes`` a mapping spin -> axis."""
    mats = [SINGLE_SPIN[axes.get(i, "E")] for i in range(n)]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def check_density_matrix(rho, atol=HERMITIAN_TOL):
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit-trace and positive."""
    n_spins(rho)
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > atol:
        raise ValueError(f"not Hermitian (max deviation {herm:.2e})")
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_TOL * max(1, rho.shape[0]):
        raise ValueError(f"trace is {tr}")
    low = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    if low < POSITIVITY_TOL:
        raise ValueError(f"negative eigenvalue {low:.2e}")
    return rho


def maximally_mixed(n):
    return np.eye(2**n, dtype=complex) / 2**n


def basis_state(n, index):
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[index, index] = 1.0
    return rho


def pure_state(psi):
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


# -- unitary pieces ----------------------------------------------------------

def _apply_local(rho, n, ops):
    """Conjugate ``rho`` by a product of single-spin unitaries ``{spin: 2x2}``."""
    t = rho.reshape((2,) * (2 * n))
    for i, u in ops.items():
        t = np.tensordot(u, t, axes=([1], [i]))
        t = np.moveaxis(t, 0, i)
        t = np.tensordot(t, u.conj().T, axes=([n + i], [0]))
        t = np.moveaxis(t, -1, n + i)
    return t.reshape(rho.shape)


def rotation_matrix(angle, phase):
    """2x2 ``exp(-i angle (I_x cos phase + I_y sin phase))``."""
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([[c, -1j * s * np.exp(-1j * phase)], [-1j * s * np.exp(1j * phase), c]])


def z_rotation_matrix(angle):
    """2x2 ``exp(-i angle I_z)``."""
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def unitary_apply(rho, u):
    return u @ rho @ u.conj().T


def evolve(rho, H, t):
    """Free evolution ``U rho U^dag`` with ``U = exp(-i H t)``.

    ``H`` may be a full Hermitian matrix or the 1-D diagonal of a diagonal one.
    """
    if t < 0:
        raise ValueError("evolution time must be nonnegative")
    H = np.asarray(H)
    if H.ndim == 2 and H.shape != rho.shape or H.ndim == 1 and H.shape[0] != rho.shape[0]:
        raise ValueError(f"Hamiltonian shape {H.shape} does not match state {rho.shape}")
    if t == 0:
        return rho.copy()
    if H.ndim == 1:
        diag = H
    elif np.count_nonzero(H - np.diag(np.diagonal(H))) == 0:
        diag = np.real(np.diagonal(H))
    else:
        w, v = np.linalg.eigh(H)
        u = (v * np.exp(-1j * w * t)) @ v.conj().T
        return unitary_apply(rho, u)
    phases = np.exp(-1j * diag * t)
    return rho * np.outer(phases, phases.conj())


def apply_hard_pulse(rho, targets, angle, phase=0.0):
    """Simultaneous nonselective-style rotation on every spin in ``targets``."""
    targets = list(targets)
    if not targets:
        raise ValueError("a pulse needs at least one target")
    n = n_spins(rho)
    r = rotation_matrix(angle, phase)
    return _apply_local(rho, n, {i: r for i in targets})


def apply_z_rotation(rho, target, angle):
    n = n_spins(rho)
    return _apply_local(rho, n, {target: z_rotation_matrix(angle)})


def apply_soft_pulse(rho, target, angle, phase, system, duration, relaxation=None):
    """Ideal selective rotation of one spin followed by relaxation over ``duration``.

    Offset and coupling evolution during the pulse is neglected. ``relaxation``
    defaults to the spin system's own T1/T2 with zero equilibrium polarization.
    """
    if duration <= 0:
        raise ValueError("a soft pulse needs a positive duration")
    out = apply_hard_pulse(rho, [target], angle, phase)
    params = relaxation if relaxation is not None else RelaxationParams.from_system(system)
    return relax(out, params, duration)


# -- gradients ---------------------------------------------------------------

def coherence_orders(n):
    """Matrix of (sum m of ket) - (sum m of bra) for every element."""
    total = magnetic_numbers(n).sum(axis=1)
    return np.rint(total[:, None] - total[None, :]).astype(int)


def gradient_crush(rho, mode="physical"):
    """Idealized B0 gradient pulse.

    ``physical`` zeroes every element of nonzero coherence order (zero-quantum
    terms survive); ``ideal`` zeroes every off-diagonal element.
    """
    n = n_spins(rho)
    if mode == "physical":
        keep = coherence_orders(n) == 0
    elif mode == "ideal":
        keep = np.eye(rho.shape[0], dtype=bool)
    else:
        raise ValueError(f"unknown crush mode {mode!r}")
    return np.where(keep, rho, 0)


# -- relaxation ----------------------------------------------------------------

@dataclass(frozen=True)
class RelaxationParams:
    """Per-spin T1, T2 (s) and equilibrium polarization ``<sigma_z>`` of each spin."""

    t1_s: tuple
    t2_s: tuple
    equilibrium: tuple

    def __post_init__(self):
        if not (len(self.t1_s) == len(self.t2_s) == len(self.equilibrium)):
            raise ValueError("relaxation parameter lists differ in length")
        for t1, t2, z in zip(self.t1_s, self.t2_s, self.equilibrium):
            if not (t1 > 0 and t2 > 0) or t2 > 2 * t1:
                raise ValueError(f"invalid relaxation times T1={t1}, T2={t2}")
            if abs(z) > 1:
                raise ValueError("equilibrium polarization must lie in [-1, 1]")

    @classmethod
    def from_system(cls, system, conditions=None):
        """Use the spins' T1/T2; relax toward the thermal state when ``conditions`` is given."""
        if conditions is None:
            eq = (0.0,) * system.n
        else:
            from .preparation import spin_polarizations

            eq = tuple(float(z) for z in spin_polarizations(system, conditions))
        return cls(tuple(s.t1_s for s in system.spins), tuple(s.t2_s for s in system.spins), eq)


def _relaxation_superop(t1, t2, z, t):
    lam = math.exp(-t / t1)
    mu = math.exp(-t / t2)
    p0 = (1 + z) / 2
    p1 = (1 - z) / 2
    s = np.zeros((2, 2, 2, 2))  # s[a', b', a, b]
    s[0, 0, 0, 0] = lam + (1 - lam) * p0
    s[0, 0, 1, 1] = (1 - lam) * p0
    s[1, 1, 1, 1] = lam + (1 - lam) * p1
    s[1, 1, 0, 0] = (1 - lam) * p1
    s[0, 1, 0, 1] = mu
    s[1, 0, 1, 0] = mu
    return s


def relax(rho, params, t):
    """Independent per-spin generalized amplitude damping plus dephasing.

    Populations of spin i relax toward its equilibrium at rate 1/T1 and its
    coherences decay at rate 1/T2. The channel is applied in closed form.
    """
    if t < 0:
        raise ValueError("relaxation time must be nonnegative")
    n = n_spins(rho)
    if len(params.t1_s) != n:
        raise ValueError("relaxation parameters do not match the state size")
    if t == 0:
        return rho.copy()
    out = rho.reshape((2,) * (2 * n))
    for i in range(n):
        if math.isinf(params.t1_s[i]) and math.isinf(params.t2_s[i]):
            continue
        s = _relaxation_superop(params.t1_s[i], params.t2_s[i], params.equilibrium[i], t)
        out = np.tensordot(s, out, axes=([2, 3], [i, n + i]))
        out = np.moveaxis(out, [0, 1], [i, n + i])
    return out.reshape(rho.shape)


def thermal_fixed_point(params):
    """State that ``relax`` converges to as t grows without bound."""
    rho = np.array([[1.0]], dtype=complex)
    for z in params.equilibrium:
        rho = np.kron(rho, np.diag([(1 + z) / 2, (1 - z) / 2]))
    return rho


def expectation(rho, observable):
    """``Tr(rho O)``; real for Hermitian ``O``."""
    observable = np.asarray(observable)
    if observable.shape != rho.shape:
        raise ValueError(f"observable shape {observable.shape} does not match state {rho.shape}")
    value = np.einsum("ij,ji->", rho, observable)
    if np.allclose(observable, observable.conj().T, atol=1e-14, rtol=0):
        return float(value.real)
    return complex(value)


# -- product operators ---------------------------------------------------------

# rows: E, Ix, Iy, Iz as 2x2 operators; used to change basis on each tensor leg
_PO_BASIS = np.array([SINGLE_SPIN[a] for a in "Exyz"])


def po_label(axes):
    """Label of a product operator, e.g. ``{}`` -> ``E``, ``{0:'z',1:'z'}`` -> ``2Iz0Iz1``."""
    active = sorted((i, a) for i, a in axes.items() if a != "E")
    if not active:
        return "E"
    q = len(active)
    prefix = "" if q == 1 else str(2 ** (q - 1))
    return prefix + "".join(f"I{a}{i}" for i, a in active)


class ProductOperatorExpansion(dict):
    """Mapping from product-operator label to coefficient, with reconstruction."""

    def __init__(self, n, coefficients):
        super().__init__(coefficients)
        self.n = n

    def matrix(self, label):
        return _label_matrix(self.n, label)

    def reconstruct(self):
        dim = 2**self.n
        out = np.zeros((dim, dim), dtype=complex)
        for label, c in self.items():
            if c != 0:
                out += c * _label_matrix(self.n, label)
        return out

    def nonzero(self, tol=1e-12):
        return {k: v for k, v in self.items() if abs(v) > tol}


def _parse_label(n, label):
    axes = {}
    if label == "E":
        return axes
    body = label.lstrip("0123456789")
    for part in body.split("I")[1:]:
        axes[int(part[1:])] = part[0]
    return axes


def _label_matrix(n, label):
    axes = _parse_label(n, label)
    q = len(axes)
    scale = 1 if q == 0 else 2 ** (q - 1)
    return scale * product_operator(n, axes)


def po_decompose(rho):
    """Expand ``rho`` in the orthogonal product-operator basis.

    Basis: ``E`` (identity) and ``2^(q-1) I_a^i I_b^k ...`` for q active spins.
    Coefficients are ``Tr(B rho) / Tr(B B)``.
    """
    n = n_spins(rho)
    # interleave ket/bra legs so each spin owns one axis of size 4 (index 2a+b)
    t = rho.reshape((2,) * (2 * n))
    t = t.transpose([x for i in range(n) for x in (i, n + i)]).reshape((4,) * n)
    # Tr(b rho_leg) = sum_ab b[b, a] rho[a, b]; divide by Tr(b b) = 2 or 1/2
    leg = _PO_BASIS.transpose(0, 2, 1).reshape(4, 4) / np.array([2.0, 0.5, 0.5, 0.5])[:, None]
    for i in range(n):
        t = np.moveaxis(np.tensordot(leg, t, axes=([1], [i])), 0, i)
    hermitian = np.allclose(rho, rho.conj().T, atol=1e-14, rtol=0)
    coeffs = {}
    for idx in itertools.product(range(4), repeat=n):
        axes = {i: "Exyz"[a] for i, a in enumerate(idx) if a}
        q = len(axes)
        c = t[idx] / (2 ** (q - 1) if q else 1)
        coeffs[po_label(axes)] = float(c.real) if hermitian else complex(c)
    return ProductOperatorExpansion(n, coeffs)
