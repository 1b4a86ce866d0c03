"""Lowering of quantum circuits to refocused NMR pulse sequences.

Two-qubit gates are built from a controlled phase: a coupling delay whose
unwanted Larmor and coupling terms are removed by pi pulses placed according
to rows of a Sylvester-Hadamard sign matrix, plus frame z rotations.
Uncoupled pairs are bridged by SWAP chains along the coupling graph.
"""

from __future__ import annotations

import math
import re
import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import constants
from .errors import NotDirectlyCoupledError, ParseError, RoutingError, ScheduleError
from .sequence import Delay, FrameZ, HardPulse, PulseSequence, SoftPulse
from .spin_model import coupling_graph, weak_coupling_check

TWO_PI = 2.0 * math.pi
MAX_SIGN_ORDER = 1024

ARITY = {"RX": 1, "RY": 1, "RZ": 1, "CPHASE": 2, "CNOT": 2, "CZ": 2, "SWAP": 2, "TOFFOLI": 3}
TAKES_ANGLE = {"RX", "RY", "RZ", "CPHASE"}


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple
    angle: float = 0.0

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if kind not in ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.targets) != ARITY[kind]:
            raise ValueError(f"{kind} takes {ARITY[kind]} target(s), got {len(self.targets)}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"{kind} targets must be distinct")
        if not math.isfinite(self.angle):
            raise ValueError("gate angle must be finite")


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(t < 0 or t >= self.n for t in g.targets):
                raise ValueError(f"{g.kind} target out of range for {self.n} qubits")

    def __iter__(self):
        return iter(self.gates)

    def __len__(self):
        return len(self.gates)

    def __add__(self, other):
        return Circuit(max(self.n, other.n), self.gates + other.gates)

    def dumps(self):
        lines = []
        for g in self.gates:
            line = f"{g.kind} " + " ".join(map(str, g.targets))
            if g.kind in TAKES_ANGLE:
                line += f" {g.angle!r}"
            lines.append(line)
        return "\n".join(lines) + ("\n" if lines else "")


_ANGLE = re.compile(r"^(?P<sign>[-+]?)(?:(?P<num>[0-9.]+(?:e[-+]?\d+)?)\*?)?pi(?:/(?P<den>[0-9.]+))?$", re.I)


def parse_angle(token):
    """Radians as a float, or a multiple of ``pi`` such as ``pi/2`` or ``-3pi/4``."""
    try:
        return float(token)
    except ValueError:
        pass
    m = _ANGLE.match(token.replace(" ", ""))
    if not m:
        raise ValueError(f"cannot read angle {token!r}")
    value = math.pi * float(m["num"] or 1) / float(m["den"] or 1)
    return -value if m["sign"] == "-" else value


def parse_circuit(text, n=None, source=None):
    """One gate per line: ``KIND target [target...] [angle]``; ``#`` starts a comment.

    An optional ``QUBITS n`` line fixes the register size; otherwise ``n`` or
    the largest target decides it.
    """
    gates = []
    declared = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        kind = words[0].upper()
        if kind == "QUBITS":
            try:
                declared = int(words[1])
            except (IndexError, ValueError):
                raise ParseError("QUBITS needs an integer", lineno, source) from None
            continue
        if kind not in ARITY:
            raise ParseError(f"unknown gate kind {words[0]!r}", lineno, source)
        arity = ARITY[kind]
        expected = arity + (1 if kind in TAKES_ANGLE else 0)
        if len(words) - 1 != expected:
            raise ParseError(f"{kind} expects {expected} argument(s), got {len(words) - 1}", lineno, source)
        try:
            targets = tuple(int(w) for w in words[1 : 1 + arity])
        except ValueError:
            raise ParseError("targets must be integers", lineno, source) from None
        angle = 0.0
        if kind in TAKES_ANGLE:
            try:
                angle = parse_angle(words[-1])
            except ValueError as exc:
                raise ParseError(str(exc), lineno, source) from None
        size = n if n is not None else declared
        if any(t < 0 for t in targets) or (size is not None and any(t >= size for t in targets)):
            raise ParseError(f"target out of range in {line!r}", lineno, source)
        try:
            gates.append(Gate(kind, targets, angle))
        except ValueError as exc:
            raise ParseError(str(exc), lineno, source) from None
    size = n if n is not None else declared
    if size is None:
        size = 1 + max((t for g in gates for t in g.targets), default=0)
    return Circuit(size, tuple(gates))


def load_circuit(path, n=None):
    path = Path(path)
    return parse_circuit(path.read_text(), n=n, source=path)


# -- reference unitaries ----------------------------------------------------------

def gate_unitary(gate, n):
    """Ideal unitary of ``gate`` on n qubits (qubit 0 most significant)."""
    N = 2**n
    idx = np.arange(N)
    bit = lambda q: (idx >> (n - 1 - q)) & 1  # noqa: E731
    k = gate.kind
    if k in ("RX", "RY", "RZ"):
        from .engine import rotation_matrix, z_rotation_matrix

        r = z_rotation_matrix(gate.angle) if k == "RZ" else rotation_matrix(gate.angle, 0.0 if k == "RX" else math.pi / 2)
        u = np.array([[1.0 + 0j]])
        for q in range(n):
            u = np.kron(u, r if q == gate.targets[0] else np.eye(2))
        return u
    if k in ("CZ", "CPHASE"):
        phi = math.pi if k == "CZ" else gate.angle
        a, b = gate.targets
        return np.diag(np.exp(1j * phi * (bit(a) & bit(b))))
    perm = idx.copy()
    if k == "CNOT":
        c, t = gate.targets
        perm = idx ^ (bit(c) << (n - 1 - t))
    elif k == "TOFFOLI":
        c1, c2, t = gate.targets
        perm = idx ^ ((bit(c1) & bit(c2)) << (n - 1 - t))
    elif k == "SWAP":
        a, b = gate.targets
        differ = bit(a) ^ bit(b)
        perm = idx ^ (differ << (n - 1 - a)) ^ (differ << (n - 1 - b))
    u = np.zeros((N, N), dtype=complex)
    u[perm, idx] = 1
    return u


def circuit_unitary(circuit):
    u = np.eye(2**circuit.n, dtype=complex)
    for g in circuit:
        u = gate_unitary(g, circuit.n) @ u
    return u


# -- refocusing ----------------------------------------------------------------

def sylvester(order):
    h = np.array([[1]])
    while h.shape[0] < order:
        h = np.block([[h, h], [h, -h]])
    return h


def _sign_changes(row):
    return int(np.count_nonzero(np.diff(row)))


@dataclass(frozen=True)
class RefocusingSchedule:
    """Equal intervals and one +/-1 toggling-frame sign per spin per interval.

    A spin's sign flips wherever a pi pulse is applied to it; the sequence
    starts and ends with every sign at +1.
    """

    intervals: tuple
    signs: np.ndarray = field(compare=False)
    retained_pair: tuple | None = None
    coupling_sign: int = 1

    @property
    def total_time(self):
        return math.fsum(self.intervals)

    def flip_points(self, spin):
        """Boundary indices (0..m) at which spin receives a pi pulse."""
        row = np.concatenate([[1], self.signs[spin], [1]])
        return [b for b in range(len(self.intervals) + 1) if row[b] != row[b + 1]]

    @property
    def echo_pulse_count(self):
        """Pi pulses inside the schedule (between intervals)."""
        return sum(_sign_changes(r) for r in self.signs)

    @property
    def pulse_count(self):
        """All pi pulses, including those that put spins into and back out of an inverted frame."""
        return sum(len(self.flip_points(i)) for i in range(self.signs.shape[0]))

    def verify(self, system, tol=1e-12):
        """Return a list of violated refocusing conditions (empty when sound)."""
        t = np.array(self.intervals)
        problems = []
        eff = system.couplings.effective_hz
        for i, row in enumerate(self.signs):
            if abs(row @ t) > tol * max(1.0, self.total_time):
                problems.append(f"offset of spin {i} not refocused")
        for i in range(system.n):
            for k in range(i + 1, system.n):
                net = (self.signs[i] * self.signs[k]) @ t
                if self.retained_pair is not None and {i, k} == set(self.retained_pair):
                    if abs(net - self.coupling_sign * self.total_time) > tol * max(1.0, self.total_time):
                        problems.append(f"pair ({i},{k}) not retained at full strength")
                elif eff[i, k] != 0 and abs(net) > tol * max(1.0, self.total_time):
                    problems.append(f"coupling ({i},{k}) not refocused")
        return problems


def _greedy_coloring(n, edges, order):
    color = {}
    for v in order:
        used = {color[u] for u in edges.get(v, ()) if u in color}
        c = 0
        while c in used:
            c += 1
        color[v] = c
    return color


def refocusing_schedule(system, retained_pair=None, total_time=1.0, coupling_sign=1):
    """Sign schedule that cancels every offset and coupling except ``retained_pair``.

    Spins joined by a nonzero coupling get different rows of a Sylvester
    matrix of the smallest sufficient order; uncoupled spins may share a row.
    The retained pair shares a row (``coupling_sign=+1``) or takes a row and
    its negation (``-1``), which keeps its coupling at full strength with
    the given sign while its offsets still refocus.
    """
    if total_time <= 0:
        raise ValueError("total time must be positive")
    if coupling_sign not in (1, -1):
        raise ValueError("coupling_sign must be +1 or -1")
    n = system.n
    eff = system.couplings.effective_hz
    # contract the retained pair into one vertex
    rep = list(range(n))
    if retained_pair is not None:
        i, k = retained_pair
        if i == k:
            raise ValueError("retained pair needs two distinct spins")
        rep[max(i, k)] = min(i, k)
    adj = {}
    for a in range(n):
        for b in range(a + 1, n):
            if eff[a, b] != 0 and rep[a] != rep[b]:
                adj.setdefault(rep[a], set()).add(rep[b])
                adj.setdefault(rep[b], set()).add(rep[a])
    vertices = sorted(set(rep))
    order = sorted(vertices, key=lambda v: (-len(adj.get(v, ())), v))
    color = _greedy_coloring(n, adj, order)
    ncolors = max(color.values()) + 1
    m = 2
    while m < ncolors + 1:
        m *= 2
    if m > MAX_SIGN_ORDER:
        raise ScheduleError(f"needs a sign matrix of order {m}, above the cap {MAX_SIGN_ORDER}")
    h = sylvester(m)
    rows = sorted(range(1, m), key=lambda r: (_sign_changes(h[r]), r))[:ncolors]
    signs = np.array([h[rows[color[rep[a]]]] for a in range(n)], dtype=int)
    if retained_pair is not None and coupling_sign < 0:
        signs[max(retained_pair)] *= -1
    tau = total_time / m
    return RefocusingSchedule(tuple([tau] * m), signs, tuple(retained_pair) if retained_pair else None, coupling_sign)


# -- routing ----------------------------------------------------------------------

def shortest_path(graph, i, k):
    prev = {i: None}
    queue = deque([i])
    while queue:
        v = queue.popleft()
        if v == k:
            break
        for w in graph.neighbors(v):
            if w not in prev:
                prev[w] = v
                queue.append(w)
    if k not in prev:
        raise RoutingError(f"spins {i} and {k} are not connected by any coupling chain")
    path = [k]
    while path[-1] != i:
        path.append(prev[path[-1]])
    return path[::-1]


def route_swaps(graph, i, k):
    """SWAPs that bring spin k's qubit next to spin i (applied in order).

    Undo them afterwards in reverse order; the full chain for a path of
    length d costs 2(d - 1) SWAPs.
    """
    path = shortest_path(graph, i, k)
    return [(path[j - 1], path[j]) for j in range(len(path) - 1, 1, -1)]


# -- timing and selectivity ------------------------------------------------------

def soft_pulse_rate(system, spin):
    """Bandwidth-limited rotation rate (Hz) of a spin with same-species partners."""
    partners = system.same_species_partners(spin)
    if not partners:
        return None
    return min(abs(system.spins[spin].offset_hz - system.spins[p].offset_hz) for p in partners)


@dataclass
class GateRateReport:
    one_qubit_hz: dict  # spin -> rate
    one_qubit_selective: dict  # spin -> bool (soft pulses needed)
    two_qubit_hz: dict  # (i, k) -> 2|Jeff|

    def two_qubit_time_s(self, i, k):
        return 1.0 / self.two_qubit_hz[(min(i, k), max(i, k))]


def gate_rate_report(system, rf_nutation_hz=constants.DEFAULT_RF_NUTATION_HZ):
    one, selective, two = {}, {}, {}
    for i in range(system.n):
        rate = soft_pulse_rate(system, i)
        selective[i] = rate is not None
        one[i] = rf_nutation_hz if rate is None else rate
    eff = system.couplings.effective_hz
    for i in range(system.n):
        for k in range(i + 1, system.n):
            if eff[i, k] != 0:
                two[(i, k)] = 2.0 * abs(eff[i, k])
    return GateRateReport(one, selective, two)


@dataclass(frozen=True)
class SelectivityEntry:
    i: int
    k: int
    margin: float
    status: str  # pass | warn | overlap


def multiplet_width(system, i):
    return float(np.sum(np.abs(system.couplings.effective_hz[i])))


def selectivity_check(system, warn_margin=constants.SELECTIVITY_WARN_MARGIN):
    """Separation of same-species resonances in units of their half multiplet widths.

    Returns ``(pairs, per_spin)`` where ``per_spin`` maps a spin to its worst margin.
    """
    pairs = []
    for i in range(system.n):
        for k in range(i + 1, system.n):
            if system.spins[i].species != system.spins[k].species:
                pairs.append(SelectivityEntry(i, k, math.inf, "pass"))
                continue
            sep = abs(system.spins[i].offset_hz - system.spins[k].offset_hz)
            half = (multiplet_width(system, i) + multiplet_width(system, k)) / 2
            if sep == 0:
                margin = 0.0
            elif half == 0:
                margin = math.inf
            else:
                margin = sep / half
            status = "overlap" if margin < 1 else ("warn" if margin < warn_margin else "pass")
            pairs.append(SelectivityEntry(i, k, margin, status))
    per_spin = {i: math.inf for i in range(system.n)}
    for e in pairs:
        per_spin[e.i] = min(per_spin[e.i], e.margin)
        per_spin[e.k] = min(per_spin[e.k], e.margin)
    return pairs, per_spin


# -- compilation ------------------------------------------------------------------

@dataclass
class CompilationReport:
    total_duration_s: float = 0.0
    pulse_count: int = 0
    swap_count: int = 0
    refocusing_pulse_count: int = 0
    two_qubit_core_count: int = 0
    warnings: list = field(default_factory=list)

    def as_dict(self):
        return {
            "total_duration_s": self.total_duration_s,
            "pulse_count": self.pulse_count,
            "swap_count": self.swap_count,
            "refocusing_pulse_count": self.refocusing_pulse_count,
            "two_qubit_core_count": self.two_qubit_core_count,
            "warnings": list(self.warnings),
        }


def _norm_rotation(angle, phase):
    if angle < 0:
        angle, phase = -angle, phase + math.pi
    return angle, phase % TWO_PI


class _Lowering:
    def __init__(self, system, rf_nutation_hz, coupling_threshold_hz):
        self.system = system
        self.rf = rf_nutation_hz
        self.graph = coupling_graph(system, coupling_threshold_hz)
        self.events = []
        self.report = CompilationReport()

    def rotation(self, spin, angle, phase):
        if angle == 0:
            return
        angle, phase = _norm_rotation(angle, phase)
        rate = soft_pulse_rate(self.system, spin)
        if rate is None:
            self.events.append(HardPulse((spin,), angle, phase, angle / (TWO_PI * self.rf)))
        else:
            if rate == 0:
                raise NotDirectlyCoupledError(f"spin {spin} cannot be addressed selectively (degenerate offset)")
            self.events.append(SoftPulse(spin, angle, phase, angle / (TWO_PI * rate)))

    def refocused_delay(self, schedule):
        n = self.system.n
        m = len(schedule.intervals)
        flips = {b: [] for b in range(m + 1)}
        for spin in range(n):
            for b in schedule.flip_points(spin):
                flips[b].append(spin)
        for b in range(m + 1):
            hard = [s for s in flips[b] if soft_pulse_rate(self.system, s) is None]
            if hard:
                self.events.append(HardPulse(tuple(hard), math.pi, 0.0, 0.5 / self.rf))
            for s in flips[b]:
                if s not in hard:
                    self.rotation(s, math.pi, 0.0)
            self.report.refocusing_pulse_count += len(flips[b])
            if b < m:
                self.events.append(Delay(schedule.intervals[b]))

    def cphase_core(self, i, k, phi):
        """Controlled phase on directly coupled spins."""
        seq, _ = _cphase_events(i, k, phi, self.system)
        if seq is None:
            return
        schedule, frame_angle = seq
        self.refocused_delay(schedule)
        self.events.append(FrameZ(i, frame_angle))
        self.events.append(FrameZ(k, frame_angle))
        self.report.two_qubit_core_count += 1

    def cphase(self, i, k, phi):
        if self.graph.has_edge(i, k):
            self.cphase_core(i, k, phi)
            return
        chain = route_swaps(self.graph, i, k)
        for a, b in chain:
            self.swap_adjacent(a, b)
        partner = chain[-1][0] if chain else k
        self.cphase_core(i, partner, phi)
        for a, b in reversed(chain):
            self.swap_adjacent(a, b)
        self.report.swap_count += 2 * len(chain)

    def swap_adjacent(self, a, b):
        self.cnot(a, b)
        self.cnot(b, a)
        self.cnot(a, b)

    def cnot(self, c, t):
        self.rotation(t, -math.pi / 2, math.pi / 2)
        self.cphase(c, t, math.pi)
        self.rotation(t, math.pi / 2, math.pi / 2)

    def gate(self, g):
        k, tg = g.kind, g.targets
        if k == "RX":
            self.rotation(tg[0], g.angle, 0.0)
        elif k == "RY":
            self.rotation(tg[0], g.angle, math.pi / 2)
        elif k == "RZ":
            if g.angle:
                self.events.append(FrameZ(tg[0], g.angle))
        elif k == "CZ":
            self.cphase(tg[0], tg[1], math.pi)
        elif k == "CPHASE":
            self.cphase(tg[0], tg[1], g.angle)
        elif k == "CNOT":
            self.cnot(*tg)
        elif k == "SWAP":
            a, b = tg
            if self.graph.has_edge(a, b):
                self.swap_adjacent(a, b)
            else:
                self.cnot(a, b)
                self.cnot(b, a)
                self.cnot(a, b)
        elif k == "TOFFOLI":
            c1, c2, t = tg
            self.rotation(t, -math.pi / 2, math.pi / 2)
            self.cphase(c2, t, math.pi / 2)
            self.cnot(c1, c2)
            self.cphase(c2, t, -math.pi / 2)
            self.cnot(c1, c2)
            self.cphase(c1, t, math.pi / 2)
            self.rotation(t, math.pi / 2, math.pi / 2)
        else:  # pragma: no cover - Gate validates kinds
            raise ValueError(k)


def _reduce_phase(phi):
    """Map phi to (-pi, pi]; CPhase(phi) is 2pi-periodic."""
    phi = math.remainder(phi, TWO_PI)
    if phi == -math.pi:
        phi = math.pi
    return phi


def _cphase_events(i, k, phi, system):
    phi = _reduce_phase(phi)
    if abs(phi) < 1e-15:
        return None, 0.0
    j = system.effective_coupling(i, k)
    if j == 0:
        raise NotDirectlyCoupledError(f"spins {i} and {k} have no coupling; route through SWAPs")
    # coupling factor exp(+i phi/2 * 2IzSz): sign * pi * J * t = -phi/2
    # written so that phi = pi gives exactly 1/(2|J|)
    t = (abs(phi) / math.pi) / (2.0 * abs(j))
    sign = -1 if (phi > 0) == (j > 0) else 1
    schedule = refocusing_schedule(system, (i, k), t, sign)
    return (schedule, phi / 2), t


def compile_cphase(i, k, phi, system, rf_nutation_hz=constants.DEFAULT_RF_NUTATION_HZ):
    """Controlled phase ``diag(1, 1, 1, e^{i phi})`` on directly coupled spins i, k.

    A refocused coupling delay of ``|phi| / (2 pi |J + 2D|)`` supplies the
    ``2 I_z S_z`` term and frame rotations by ``phi/2`` supply ``I_z + S_z``.
    """
    low = _Lowering(system, rf_nutation_hz, 0.0)
    low.cphase_core(i, k, phi)
    seq = PulseSequence(tuple(low.events), {"kind": "cphase", "pair": [i, k], "phi": phi})
    return seq


def cphase_delay(i, k, phi, system):
    """Length of the coupling evolution inside ``compile_cphase``."""
    out = _cphase_events(i, k, phi, system)
    return out[1] if out[0] is not None else 0.0


def compile_circuit(circuit, system, rf_nutation_hz=constants.DEFAULT_RF_NUTATION_HZ, coupling_threshold_hz=0.0):
    """Lower ``circuit`` onto ``system``; returns ``(PulseSequence, CompilationReport)``."""
    if circuit.n > system.n:
        raise ValueError(f"circuit uses {circuit.n} qubits but the molecule has {system.n} spins")
    low = _Lowering(system, rf_nutation_hz, coupling_threshold_hz)
    report = low.report
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        weak = weak_coupling_check(system, warn=False)
    for e in weak:
        if not e.passed:
            report.warnings.append(f"weak-coupling: pair ({e.i},{e.k}) ratio {e.ratio:.3g}")
    pairs, _ = selectivity_check(system)
    for e in pairs:
        if e.status != "pass":
            report.warnings.append(f"selectivity: pair ({e.i},{e.k}) margin {e.margin:.3g} ({e.status})")
    for g in circuit:
        low.gate(g)
    seq = PulseSequence(tuple(low.events), {"kind": "circuit", "qubits": circuit.n})
    report.total_duration_s = seq.duration_s
    report.pulse_count = seq.spin_pulse_count()
    eff = np.abs(system.couplings.effective_hz)
    if eff.max() > 0:
        shortest_period = 1.0 / eff.max()
        longest_soft = max((ev.duration_s for ev in seq if isinstance(ev, SoftPulse)), default=0.0)
        if longest_soft > 0.1 * shortest_period:
            report.warnings.append(
                f"soft-pulse: {longest_soft:.3g} s exceeds 10% of the shortest coupling period {shortest_period:.3g} s")
    return seq, report
