"""Nuclei, spin systems, coupling graphs and the weak-coupling Hamiltonian.

Conventions
-----------
- Spin 0 is the most significant bit of a computational basis index.
- ``|0>`` is the m = +1/2 state, so ``I_z |0> = +1/2 |0>``.
- Offsets are rotating-frame frequencies in Hz; the Hamiltonian is returned
  in rad/s (energies in units of hbar).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import constants
from .errors import ParseError


@dataclass(frozen=True)
class Nucleus:
    species: str
    gamma: float  # rad s^-1 T^-1

    def __post_init__(self):
        if not math.isfinite(self.gamma) or self.gamma == 0:
            raise ValueError(f"gyromagnetic ratio of {self.species} must be finite and nonzero")


_REGISTRY: dict[str, Nucleus] = {name: Nucleus(name, g) for name, g in constants.GAMMA.items()}


def register_nucleus(species, gamma):
    """Add a species to the registry. Re-registering a name is an error."""
    if species in _REGISTRY:
        raise ValueError(f"species {species!r} already registered")
    nucleus = Nucleus(species, float(gamma))
    _REGISTRY[species] = nucleus
    return nucleus


def nucleus(species):
    try:
        return _REGISTRY[species]
    except KeyError:
        raise KeyError(f"unknown nuclear species {species!r}") from None


def registered_species():
    return tuple(_REGISTRY)


@dataclass(frozen=True)
class Spin:
    """One spin-1/2 site. ``math.inf`` for a relaxation time means no relaxation."""

    nucleus: Nucleus
    offset_hz: float = 0.0
    t1_s: float = math.inf
    t2_s: float = math.inf

    def __post_init__(self):
        if not (self.t1_s > 0 and self.t2_s > 0):
            raise ValueError("relaxation times must be positive")
        if self.t2_s > 2.0 * self.t1_s:
            raise ValueError(f"T2={self.t2_s} exceeds 2*T1={2 * self.t1_s}")

    @property
    def species(self):
        return self.nucleus.species


@dataclass(frozen=True, eq=False)
class CouplingTable:
    """Symmetric scalar (J) and residual dipolar (D) couplings in Hz."""

    j_hz: np.ndarray
    d_hz: np.ndarray | None = None

    def __post_init__(self):
        j = np.array(self.j_hz, dtype=float)
        d = np.zeros_like(j) if self.d_hz is None else np.array(self.d_hz, dtype=float)
        if j.ndim != 2 or j.shape[0] != j.shape[1] or d.shape != j.shape:
            raise ValueError("coupling matrices must be square and of equal shape")
        for name, m in (("J", j), ("D", d)):
            if not np.allclose(m, m.T, rtol=0, atol=0):
                raise ValueError(f"{name} coupling matrix is not symmetric")
            if np.any(np.diag(m) != 0):
                raise ValueError(f"{name} coupling matrix has a nonzero diagonal")
        j.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "j_hz", j)
        object.__setattr__(self, "d_hz", d)

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((n, n)))

    @property
    def effective_hz(self):
        """J + 2D, the coupling that actually drives evolution."""
        return self.j_hz + 2.0 * self.d_hz

    def __eq__(self, other):
        if not isinstance(other, CouplingTable):
            return NotImplemented
        return np.array_equal(self.j_hz, other.j_hz) and np.array_equal(self.d_hz, other.d_hz)

    __hash__ = None


@dataclass(frozen=True)
class SpinSystem:
    spins: tuple[Spin, ...]
    couplings: CouplingTable
    field_tesla: float = 11.74
    temperature_k: float | None = None  # optional, carried from molecule files

    def __post_init__(self):
        object.__setattr__(self, "spins", tuple(self.spins))
        if len(self.spins) < 1:
            raise ValueError("a spin system needs at least one spin")
        if self.couplings.j_hz.shape != (len(self.spins),) * 2:
            raise ValueError("coupling table size does not match the number of spins")
        if self.field_tesla < 0:
            raise ValueError("field must be nonnegative")

    @property
    def n(self):
        return len(self.spins)

    @property
    def dim(self):
        return 2**self.n

    @property
    def species(self):
        return tuple(s.species for s in self.spins)

    def effective_coupling(self, i, k):
        return float(self.couplings.effective_hz[i, k])

    def same_species_partners(self, i):
        return [k for k, s in enumerate(self.spins) if k != i and s.species == self.spins[i].species]

    def larmor_hz(self):
        """Full (lab-frame) Larmor frequencies in Hz; signed by gamma."""
        return np.array([larmor_frequency(s.nucleus.gamma, self.field_tesla) for s in self.spins])

    def relabel(self, perm):
        """Return the system with spin ``perm[a]`` placed at position ``a``."""
        perm = list(perm)
        eff = CouplingTable(self.couplings.j_hz[np.ix_(perm, perm)], self.couplings.d_hz[np.ix_(perm, perm)])
        return SpinSystem(tuple(self.spins[p] for p in perm), eff, self.field_tesla, self.temperature_k)

    @classmethod
    def build(cls, species, offsets_hz, j_hz=None, d_hz=None, field_tesla=11.74, t1_s=math.inf, t2_s=math.inf,
              temperature_k=None):
        """Convenience constructor from parallel lists."""
        n = len(species)
        t1 = t1_s if np.ndim(t1_s) else [t1_s] * n
        t2 = t2_s if np.ndim(t2_s) else [t2_s] * n
        spins = tuple(Spin(nucleus(sp), float(o), float(a), float(b)) for sp, o, a, b in zip(species, offsets_hz, t1, t2))
        j = np.zeros((n, n)) if j_hz is None else np.asarray(j_hz, dtype=float)
        return cls(spins, CouplingTable(j, d_hz), field_tesla, temperature_k)


@dataclass(frozen=True)
class CouplingGraph:
    vertices: tuple[int, ...]
    edges: frozenset  # of frozenset({i, k})

    def neighbors(self, i):
        return sorted(k for e in self.edges if i in e for k in e if k != i)

    def has_edge(self, i, k):
        return frozenset((i, k)) in self.edges

    def is_complete(self):
        n = len(self.vertices)
        return len(self.edges) == n * (n - 1) // 2


def larmor_frequency(gamma, field):
    """Larmor frequency gamma*B/2pi in Hz."""
    if field < 0:
        raise ValueError("field must be nonnegative")
    return gamma * field / (2.0 * math.pi)


def magnetic_numbers(n):
    """Array of shape (2**n, n) with m_i = +1/2 for bit 0 and -1/2 for bit 1."""
    idx = np.arange(2**n)
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return 0.5 - bits


def hamiltonian_diagonal(system):
    """Diagonal of the weak-coupling Hamiltonian in rad/s."""
    m = magnetic_numbers(system.n)
    omega = 2.0 * math.pi * np.array([s.offset_hz for s in system.spins])
    eff = system.couplings.effective_hz
    diag = m @ omega
    # sum_{i<k} pi*Jeff*2*m_i*m_k == pi * m^T Jeff m (symmetric, zero diagonal)
    diag = diag + math.pi * np.einsum("bi,ik,bk->b", m, eff, m)
    return diag


def build_hamiltonian(system):
    return np.diag(hamiltonian_diagonal(system)).astype(complex)


@dataclass(frozen=True)
class WeakCouplingEntry:
    i: int
    k: int
    ratio: float
    passed: bool


def weak_coupling_check(system, threshold=constants.WEAK_COUPLING_RATIO, warn=True):
    """Ratio |2 pi Jeff| / |omega_i - omega_k| for every pair.

    Heteronuclear pairs are compared using their lab-frame Larmor frequencies,
    which makes them pass trivially.
    """
    larmor = system.larmor_hz()
    eff = system.couplings.effective_hz
    out = []
    for i in range(system.n):
        for k in range(i + 1, system.n):
            coupling = abs(2.0 * math.pi * eff[i, k])
            if system.spins[i].species == system.spins[k].species:
                sep = abs(system.spins[i].offset_hz - system.spins[k].offset_hz)
            else:
                sep = abs(larmor[i] - larmor[k]) + abs(system.spins[i].offset_hz - system.spins[k].offset_hz)
            sep *= 2.0 * math.pi
            if coupling == 0:
                ratio = 0.0
            elif sep == 0:
                ratio = math.inf
            else:
                ratio = coupling / sep
            out.append(WeakCouplingEntry(i, k, ratio, ratio < threshold))
    if warn:
        bad = [e for e in out if not e.passed]
        if bad:
            pairs = ", ".join(f"({e.i},{e.k}) ratio={e.ratio:.3g}" for e in bad)
            warnings.warn(f"weak coupling limit violated for {pairs}", stacklevel=2)
    return out


def coupling_graph(system, threshold_hz=0.0):
    if threshold_hz < 0:
        raise ValueError("threshold must be nonnegative")
    eff = system.couplings.effective_hz
    edges = frozenset(
        frozenset((i, k)) for i in range(system.n) for k in range(i + 1, system.n) if abs(eff[i, k]) > threshold_hz
    )
    return CouplingGraph(tuple(range(system.n)), edges)


# -- molecule files ---------------------------------------------------------

def _number(value, what, source):
    if value is None:
        return math.inf
    if isinstance(value, str) and value.lower() in ("inf", "none"):
        return math.inf
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParseError(f"{what} must be a number, got {value!r}", source=source) from None


def molecule_from_dict(data, source=None):
    """Build a SpinSystem from the molecule-file mapping.

    Keys: ``field_tesla``, optional ``temperature_k``, ``spins`` (list of
    ``{species, offset_hz, t1_s, t2_s}``) and ``couplings`` (list of
    ``{i, j, j_hz, d_hz}`` with 0-based indices).
    """
    if not isinstance(data, dict):
        raise ParseError("molecule file must contain a mapping", source=source)
    try:
        raw_spins = data["spins"]
    except KeyError:
        raise ParseError("missing 'spins'", source=source) from None
    if not isinstance(raw_spins, list) or not raw_spins:
        raise ParseError("'spins' must be a nonempty list", source=source)
    spins = []
    for a, entry in enumerate(raw_spins):
        try:
            nuc = nucleus(entry["species"])
        except KeyError as exc:
            raise ParseError(f"spin {a}: {exc}", source=source) from None
        try:
            spins.append(Spin(nuc, _number(entry.get("offset_hz", 0.0), "offset_hz", source),
                              _number(entry.get("t1_s"), "t1_s", source), _number(entry.get("t2_s"), "t2_s", source)))
        except ValueError as exc:
            raise ParseError(f"spin {a}: {exc}", source=source) from None
    n = len(spins)
    j = np.zeros((n, n))
    d = np.zeros((n, n))
    seen = {}
    for entry in data.get("couplings", []) or []:
        try:
            i, k = int(entry["i"]), int(entry["j"])
        except (KeyError, TypeError, ValueError):
            raise ParseError(f"coupling entry needs integer 'i' and 'j': {entry!r}", source=source) from None
        if not (0 <= i < n and 0 <= k < n) or i == k:
            raise ParseError(f"coupling indices ({i},{k}) out of range or equal", source=source)
        jv = _number(entry.get("j_hz", 0.0), "j_hz", source)
        dv = _number(entry.get("d_hz", 0.0), "d_hz", source)
        key = (min(i, k), max(i, k))
        if key in seen:
            if seen[key] != (jv, dv):
                raise ParseError(f"conflicting duplicate coupling for pair {key}", source=source)
            continue
        seen[key] = (jv, dv)
        j[i, k] = j[k, i] = jv
        d[i, k] = d[k, i] = dv
    field_tesla = _number(data.get("field_tesla", 11.74), "field_tesla", source)
    temperature = data.get("temperature_k")
    temperature = None if temperature is None else _number(temperature, "temperature_k", source)
    try:
        return SpinSystem(tuple(spins), CouplingTable(j, d), field_tesla, temperature)
    except ValueError as exc:
        raise ParseError(str(exc), source=source) from None


def molecule_to_dict(system):
    def enc(x):
        return None if math.isinf(x) else x

    couplings = []
    for i in range(system.n):
        for k in range(i + 1, system.n):
            jv, dv = system.couplings.j_hz[i, k], system.couplings.d_hz[i, k]
            if jv or dv:
                couplings.append({"i": i, "j": k, "j_hz": float(jv), "d_hz": float(dv)})
    out = {
        "field_tesla": system.field_tesla,
        "spins": [{"species": s.species, "offset_hz": s.offset_hz, "t1_s": enc(s.t1_s), "t2_s": enc(s.t2_s)}
                  for s in system.spins],
        "couplings": couplings,
    }
    if system.temperature_k is not None:
        out["temperature_k"] = system.temperature_k
    return out


def load_molecule(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, source=path) from None
    return molecule_from_dict(data, source=path)


def save_molecule(system, path):
    Path(path).write_text(json.dumps(molecule_to_dict(system), indent=2) + "\n")
