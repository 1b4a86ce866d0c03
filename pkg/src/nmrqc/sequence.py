"""Pulse-sequence events, their text serialization, and the sequence executor."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import engine
from .errors import ParseError
from .spin_model import hamiltonian_diagonal


@dataclass(frozen=True)
class HardPulse:
    targets: tuple
    angle: float
    phase: float = 0.0
    duration_s: float = 0.0
    kind = "hard"


@dataclass(frozen=True)
class SoftPulse:
    target: int
    angle: float
    phase: float
    duration_s: float
    kind = "soft"


@dataclass(frozen=True)
class Delay:
    duration_s: float
    kind = "delay"


@dataclass(frozen=True)
class FrameZ:
    """Bookkept z rotation ``exp(-i angle I_z)``; takes no time."""

    target: int
    angle: float
    duration_s: float = 0.0
    kind = "framez"


@dataclass(frozen=True)
class Crush:
    mode: str = "physical"
    duration_s: float = 0.0
    kind = "crush"


@dataclass(frozen=True)
class Acquire:
    dwell_s: float = 1e-3
    points: int = 1024
    relaxation: bool = False
    duration_s: float = 0.0
    kind = "acquire"


EVENT_TYPES = {cls.kind: cls for cls in (HardPulse, SoftPulse, Delay, FrameZ, Crush, Acquire)}


@dataclass(frozen=True)
class PulseSequence:
    events: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        for ev in self.events:
            if ev.duration_s < 0:
                raise ValueError(f"negative duration in {ev}")

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def __add__(self, other):
        return PulseSequence(self.events + tuple(other.events), {**self.meta, **other.meta})

    @property
    def duration_s(self):
        return math.fsum(ev.duration_s for ev in self.events)

    def spin_pulse_count(self, min_angle=0.0):
        """Number of single-spin rotations (a hard pulse on k spins counts k)."""
        count = 0
        for ev in self.events:
            if isinstance(ev, HardPulse) and abs(ev.angle) > min_angle:
                count += len(ev.targets)
            elif isinstance(ev, SoftPulse) and abs(ev.angle) > min_angle:
                count += 1
        return count

    # -- serialization --
    def to_dict(self):
        events = []
        for ev in self.events:
            d = {"type": ev.kind, **asdict(ev)}
            if "targets" in d:
                d["targets"] = list(d["targets"])
            events.append(d)
        return {"format": "nmrqc-pulse-sequence/1", "events": events}

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1)

    def save(self, path):
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def from_dict(cls, data, source=None):
        if not isinstance(data, dict) or "events" not in data:
            raise ParseError("sequence file needs an 'events' list", source=source)
        events = []
        for a, d in enumerate(data["events"]):
            d = dict(d)
            kind = d.pop("type", None)
            if kind not in EVENT_TYPES:
                raise ParseError(f"event {a}: unknown type {kind!r}", source=source)
            if "targets" in d:
                d["targets"] = tuple(int(t) for t in d["targets"])
            try:
                events.append(EVENT_TYPES[kind](**d))
            except TypeError as exc:
                raise ParseError(f"event {a}: {exc}", source=source) from None
        try:
            return cls(tuple(events))
        except ValueError as exc:
            raise ParseError(str(exc), source=source) from None

    @classmethod
    def loads(cls, text, source=None):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno, source=source) from None
        return cls.from_dict(data, source)

    @classmethod
    def load(cls, path):
        return cls.loads(Path(path).read_text(), source=path)


@dataclass
class SequenceResult:
    rho: np.ndarray
    fids: list


def run_sequence(seq, rho, system, relaxation=None):
    """Execute ``seq`` on ``rho``.

    Pulses are ideal and instantaneous except soft pulses, which add
    relaxation over their duration when ``relaxation`` is given. Delays evolve
    under the full weak-coupling Hamiltonian, then relax. Acquire events
    record an FID of the current state without changing it.
    """
    diag = hamiltonian_diagonal(system)
    fids = []
    for ev in seq:
        if isinstance(ev, HardPulse):
            if ev.angle:
                rho = engine.apply_hard_pulse(rho, ev.targets, ev.angle, ev.phase)
            if relaxation is not None and ev.duration_s > 0:
                rho = engine.relax(rho, relaxation, ev.duration_s)
        elif isinstance(ev, SoftPulse):
            rho = engine.apply_hard_pulse(rho, [ev.target], ev.angle, ev.phase)
            if relaxation is not None:
                rho = engine.relax(rho, relaxation, ev.duration_s)
        elif isinstance(ev, Delay):
            rho = engine.evolve(rho, diag, ev.duration_s)
            if relaxation is not None:
                rho = engine.relax(rho, relaxation, ev.duration_s)
        elif isinstance(ev, FrameZ):
            rho = engine.apply_z_rotation(rho, ev.target, ev.angle)
        elif isinstance(ev, Crush):
            rho = engine.gradient_crush(rho, ev.mode)
        elif isinstance(ev, Acquire):
            from .readout import acquire_fid

            fids.append(acquire_fid(rho, system, relaxation if ev.relaxation else None, ev.dwell_s, ev.points))
        else:
            raise TypeError(f"unknown event {ev!r}")
    return SequenceResult(rho, fids)


def _local_unitary(n, ops):
    u = np.array([[1.0 + 0j]])
    for i in range(n):
        u = np.kron(u, ops.get(i, np.eye(2)))
    return u


def sequence_unitary(seq, system):
    """Propagator of a sequence with ideal pulses and no relaxation.

    Crush and Acquire events are not unitary and are rejected.
    """
    n = system.n
    diag = hamiltonian_diagonal(system)
    u = np.eye(2**n, dtype=complex)
    for ev in seq:
        if isinstance(ev, HardPulse):
            if ev.angle:
                r = engine.rotation_matrix(ev.angle, ev.phase)
                u = _local_unitary(n, {i: r for i in ev.targets}) @ u
        elif isinstance(ev, SoftPulse):
            u = _local_unitary(n, {ev.target: engine.rotation_matrix(ev.angle, ev.phase)}) @ u
        elif isinstance(ev, Delay):
            u = np.exp(-1j * diag * ev.duration_s)[:, None] * u
        elif isinstance(ev, FrameZ):
            u = _local_unitary(n, {ev.target: engine.z_rotation_matrix(ev.angle)}) @ u
        else:
            raise ValueError(f"{type(ev).__name__} has no unitary propagator")
    return u


def absorb_frames(seq):
    """Push every FrameZ to the end of the sequence by rephasing later pulses.

    ``Rz(a)`` followed by a pulse of phase ``p`` equals the pulse with phase
    ``p - a`` followed by ``Rz(a)``. Delays, crushes and relaxation commute
    with z rotations. The accumulated frame is emitted at the end so the
    final state is unchanged.
    """
    frame = {}
    out = []

    def flush():
        out.extend(FrameZ(t, a) for t, a in sorted(frame.items()) if a)
        frame.clear()

    for ev in seq:
        if isinstance(ev, FrameZ):
            frame[ev.target] = frame.get(ev.target, 0.0) + ev.angle
        elif isinstance(ev, HardPulse):
            groups = {}
            for t in ev.targets:
                groups.setdefault(frame.get(t, 0.0), []).append(t)
            for k, (shift, targets) in enumerate(groups.items()):
                out.append(HardPulse(tuple(targets), ev.angle, ev.phase - shift, ev.duration_s if k == 0 else 0.0))
        elif isinstance(ev, SoftPulse):
            out.append(SoftPulse(ev.target, ev.angle, ev.phase - frame.get(ev.target, 0.0), ev.duration_s))
        elif isinstance(ev, Acquire):
            # the receiver reference has to be settled before acquisition
            flush()
            out.append(ev)
        else:
            out.append(ev)
    flush()
    return PulseSequence(tuple(out), dict(seq.meta))
