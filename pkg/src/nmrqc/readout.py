"""Ensemble readout: FIDs, spectra, peak lists and qubit values."""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import engine
from .errors import StructureError
from .preparation import find_pseudopure, spectral_epsilon
from .spin_model import hamiltonian_diagonal

PEAK_THRESHOLD = 1e-9
ROUNDING_WINDOW = 0.02


@dataclass
class Fid:
    dwell_s: float
    samples: dict  # channel (species) -> complex array

    @property
    def points(self):
        return len(next(iter(self.samples.values())))

    @property
    def times(self):
        return np.arange(self.points) * self.dwell_s

    def total(self):
        return sum(self.samples.values())

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            chans = list(self.samples)
            w.writerow(["time_s"] + [f"{c}_{part}" for c in chans for part in ("real", "imag")])
            for k, t in enumerate(self.times):
                row = [repr(float(t))]
                for c in chans:
                    v = self.samples[c][k]
                    row += [repr(float(v.real)), repr(float(v.imag))]
                w.writerow(row)


@dataclass(frozen=True)
class Peak:
    frequency_hz: float
    amplitude: float
    phase: float
    value: complex = 0j
    channel: str = ""


@dataclass
class Spectrum:
    frequency_hz: np.ndarray
    amplitudes: np.ndarray
    peaks: list = field(default_factory=list)
    channel: str = ""

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["freq_hz", "real", "imag"])
            for f, a in zip(self.frequency_hz, self.amplitudes):
                w.writerow([repr(float(f)), repr(float(a.real)), repr(float(a.imag))])

    def peak_table(self):
        return [{"channel": p.channel, "frequency_hz": p.frequency_hz, "amplitude": p.amplitude, "phase": p.phase}
                for p in self.peaks]

    def save_peaks(self, path):
        Path(path).write_text(json.dumps(self.peak_table(), indent=1, sort_keys=True) + "\n")


def detection_operator(system, species):
    """Sum of ``I_+`` over every spin of one species."""
    n = system.n
    op = np.zeros((2**n, 2**n), dtype=complex)
    for i, s in enumerate(system.spins):
        if s.species == species:
            op += engine.spin_operator(n, i, "+")
    return op


def acquire_fid(rho, system, relaxation=None, dwell_s=1e-3, points=1024):
    """Sample ``Tr(rho(t) sum I_+)`` for each detection channel (one per species).

    With ``relaxation`` given each sample is ``relax(evolve(rho, t), t)``,
    one closed-form step per time point.
    """
    if dwell_s <= 0 or points < 2:
        raise ValueError("need dwell_s > 0 and at least 2 points")
    diag = hamiltonian_diagonal(system)
    times = np.arange(points) * dwell_s
    channels = list(dict.fromkeys(system.species))
    ops = {c: detection_operator(system, c) for c in channels}
    out = {}
    if relaxation is None:
        # rho_ab(t) = rho_ab exp(-i (E_a - E_b) t); only nonzero (a, b) of O^T matter
        for c, op in ops.items():
            a_idx, b_idx = np.nonzero(op.T)
            weights = rho[a_idx, b_idx] * op.T[a_idx, b_idx]
            freqs = diag[a_idx] - diag[b_idx]
            out[c] = np.exp(-1j * np.outer(times, freqs)) @ weights
    else:
        for c in channels:
            out[c] = np.empty(points, dtype=complex)
        for k, t in enumerate(times):
            state = engine.relax(engine.evolve(rho, diag, t), relaxation, t)
            for c, op in ops.items():
                out[c][k] = np.einsum("ij,ji->", state, op)
    return Fid(dwell_s, out)


def _spectrum_of(samples, dwell_s, threshold, channel):
    m = len(samples)
    amps = np.fft.fftshift(np.fft.fft(samples))
    freqs = np.fft.fftshift(np.fft.fftfreq(m, dwell_s))
    mag = np.abs(amps)
    peaks = []
    top = mag.max() if m else 0.0
    if top > 0:
        floor = threshold * top
        for k in range(m):
            left = mag[k - 1] if k > 0 else -1.0
            right = mag[k + 1] if k < m - 1 else -1.0
            if mag[k] > floor and mag[k] > left and mag[k] >= right:
                peaks.append(Peak(float(freqs[k]), float(mag[k]), float(np.angle(amps[k])), complex(amps[k]), channel))
    return Spectrum(freqs, amps, peaks, channel)


def spectrum(fid, channel=None, threshold=PEAK_THRESHOLD):
    """DFT of one channel (or the summed channels) with local-maximum peak picking.

    The time origin is the first sample, so peak phases carry no linear
    phase correction.
    """
    samples = fid.total() if channel is None else fid.samples[channel]
    return _spectrum_of(np.asarray(samples), fid.dwell_s, threshold, channel or "all")


def spectra(fid, threshold=PEAK_THRESHOLD):
    """One spectrum per detection channel; species carriers differ, so channels are never summed."""
    return {c: _spectrum_of(np.asarray(v), fid.dwell_s, threshold, c) for c, v in fid.samples.items()}


def peak_table(spectra_by_channel, min_relative=0.0):
    """Peaks of several channels, keeping those at least ``min_relative`` of each channel's largest."""
    rows = []
    for spec in spectra_by_channel.values():
        top = max((p.amplitude for p in spec.peaks), default=0.0)
        rows += [r for r, p in zip(spec.peak_table(), spec.peaks) if p.amplitude >= min_relative * top]
    return rows


def parseval_error(fid, spec, channel=None):
    samples = fid.total() if channel is None else fid.samples[channel]
    time_energy = float(np.sum(np.abs(samples) ** 2))
    freq_energy = float(np.sum(np.abs(spec.amplitudes) ** 2)) / len(samples)
    if time_energy == 0:
        return freq_energy
    return abs(time_energy - freq_energy) / time_energy


# -- qubit values --------------------------------------------------------------------

@dataclass(frozen=True)
class QubitReading:
    value: float | None  # rounded 0/1, or analog when not rounded; None without signal
    analog: float | None
    deterministic: bool


@dataclass
class Readout:
    qubits: list
    epsilon: float
    mode: str  # pseudopure-basis | pseudopure | raw | no-signal

    def values(self):
        return tuple(q.value for q in self.qubits)

    def as_dict(self):
        return {
            "epsilon": self.epsilon,
            "mode": self.mode,
            "values": [q.value for q in self.qubits],
            "analog": [q.analog for q in self.qubits],
            "deterministic": [q.deterministic for q in self.qubits],
        }


def read_qubits(rho, system=None, tol=1e-8):
    """Per-qubit value ``1/2 - <I_z>/eps``: 0.0 for |0>, 1.0 for |1>.

    ``eps`` comes from the pseudo-pure structure when there is one (diagonal
    first, then any ``|psi>`` via the eigenvalues); other states report raw
    expectations. Values within 0.02 of 0 or 1 are rounded.
    """
    n = engine.n_spins(rho)
    try:
        _, eps = find_pseudopure(rho, tol)
        mode = "pseudopure-basis"
    except StructureError:
        try:
            eps = spectral_epsilon(rho, tol)
            mode = "pseudopure"
        except StructureError:
            eps, mode = 1.0, "raw"
    if abs(eps) < tol:
        return Readout([QubitReading(None, None, False) for _ in range(n)], 0.0, "no-signal")
    readings = []
    for i in range(n):
        analog = float(0.5 - engine.expectation(rho, engine.spin_operator(n, i, "z")) / eps)
        if abs(analog) <= ROUNDING_WINDOW:
            readings.append(QubitReading(0.0, analog, True))
        elif abs(analog - 1) <= ROUNDING_WINDOW:
            readings.append(QubitReading(1.0, analog, True))
        else:
            readings.append(QubitReading(analog, analog, False))
    return Readout(readings, float(eps), mode)


def _read_pulse(rho, spin):
    # (pi/2)_y turns +I_z into +I_x, so |0> shows a positive absorption-phase line
    return engine.apply_hard_pulse(rho, [spin], math.pi / 2, math.pi / 2)


def multiplet_lines(system, spin):
    """Expected lines of ``spin``: frequency -> tuple of neighbor m values, per neighbor."""
    eff = system.couplings.effective_hz
    neighbors = [k for k in range(system.n) if k != spin and eff[spin, k] != 0]
    lines = []
    for ms in itertools.product((0.5, -0.5), repeat=len(neighbors)):
        f = system.spins[spin].offset_hz + sum(eff[spin, k] * m for k, m in zip(neighbors, ms))
        lines.append((f, dict(zip(neighbors, ms))))
    return lines


def _line_amplitudes(rho, system, spin, dwell_s, points):
    """Complex amplitude of each expected line of ``spin`` after its read pulse."""
    fid = acquire_fid(_read_pulse(rho, spin), system, None, dwell_s, points)
    samples = fid.samples[system.spins[spin].species]
    spec = _spectrum_of(samples, dwell_s, PEAK_THRESHOLD, system.spins[spin].species)
    resolution = 1.0 / (dwell_s * points)
    out = []
    for f, ms in multiplet_lines(system, spin):
        k = int(np.argmin(np.abs(spec.frequency_hz - f)))
        if abs(spec.frequency_hz[k] - f) > 1e-6 * resolution:
            raise ValueError(f"line at {f} Hz is not on the frequency grid; adjust dwell/points")
        out.append((f, ms, complex(spec.amplitudes[k]) / points))
    return out


def read_by_phase(rho, system, spin, dwell_s=1e-3, points=1000):
    """Qubit value from the phase of the spin's own signal after a (pi/2)_y pulse.

    Returns the signed absorption-mode intensity normalized to the signal of
    a fully polarized |0>: +1 for |0>, -1 for |1> (scaled by eps for
    pseudo-pure states), so ``(1 - r)/2`` is the qubit value.
    """
    lines = _line_amplitudes(rho, system, spin, dwell_s, points)
    total = sum(a for _, _, a in lines)
    # a pure |0> on this spin gives Tr((E/2 + I_x) I_+) / 1 = 1/2 summed over lines
    return float(total.real / 0.5)


def read_by_multiplet(rho, system, observed, neighbor, dwell_s=1e-3, points=1000):
    """State of ``neighbor`` from which lines of ``observed``'s multiplet carry signal.

    Returns the intensity-weighted <m_neighbor> mapped to a qubit value
    (0 for m=+1/2, 1 for m=-1/2); only meaningful when ``observed`` is
    polarized so its lines have a common sign.
    """
    if system.couplings.effective_hz[observed, neighbor] == 0:
        raise ValueError("the two spins are not coupled; their multiplet carries no information")
    lines = _line_amplitudes(rho, system, observed, dwell_s, points)
    weights = np.array([a.real for _, _, a in lines])
    total = weights.sum()
    if abs(total) < 1e-15:
        raise StructureError("observed spin carries no signal", 0.0)
    mean_m = float(sum(w * ms[neighbor] for w, (_, ms, _) in zip(weights, lines)) / total)
    return 0.5 - mean_m


# -- decay under repeated blocks ---------------------------------------------------

def block_decay(block, rho, system, relaxation, repeats, dwell_s=1e-3, points=1000, channel=None):
    """Largest peak amplitude after applying ``block`` m times, for each m in ``repeats``.

    ``block`` is a pulse sequence meant to act as the identity, so without
    relaxation every amplitude would be equal.
    """
    from .sequence import run_sequence

    repeats = sorted(int(m) for m in repeats)
    chan = channel or system.spins[0].species
    out = []
    state, done = rho, 0
    for m in repeats:
        for _ in range(m - done):
            state = run_sequence(block, state, system, relaxation).rho
        done = m
        spec = _spectrum_of(acquire_fid(state, system, None, dwell_s, points).samples[chan], dwell_s,
                            PEAK_THRESHOLD, chan)
        out.append(max(p.amplitude for p in spec.peaks) if spec.peaks else 0.0)
    return np.array(repeats), np.array(out)


def fit_decay_rate(x, y):
    """Rate ``k`` of ``y = A exp(-k x)`` by least squares on ``log y``."""
    slope, _ = np.polyfit(np.asarray(x, dtype=float), np.log(np.asarray(y, dtype=float)), 1)
    return float(-slope)
