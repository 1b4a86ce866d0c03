"""Static report figures (PNG, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps repeated runs byte-identical
_PNG_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)


def plot_fid(fid, path):
    fig, ax = plt.subplots(figsize=(6, 3.2))
    t = fid.times * 1e3
    for chan, y in fid.samples.items():
        ax.plot(t, y.real, lw=0.8, label=f"{chan} re")
        ax.plot(t, y.imag, lw=0.8, ls="--", label=f"{chan} im")
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("signal")
    ax.legend(fontsize=7, loc="upper right")
    _save(fig, path)


def plot_spectrum(spec, path):
    plot_spectra({spec.channel: spec}, path)


def plot_spectra(spectra, path):
    """One panel per detection channel."""
    fig, axes = plt.subplots(len(spectra), 1, figsize=(6, 2.2 + 1.6 * len(spectra)), squeeze=False)
    for ax, spec in zip(axes[:, 0], spectra.values()):
        _spectrum_panel(ax, spec)
    _save(fig, path)


def _spectrum_panel(ax, spec):
    ax.plot(spec.frequency_hz, np.abs(spec.amplitudes), lw=0.8, color="tab:orange", label="magnitude")
    ax.plot(spec.frequency_hz, spec.amplitudes.real, lw=0.8, color="tab:blue", label="real")
    top = max((p.amplitude for p in spec.peaks), default=0.0)
    main = [p for p in spec.peaks if p.amplitude >= 1e-2 * top]
    for p in main:
        ax.axvline(p.frequency_hz, color="0.7", lw=0.5, zorder=0)
    if main:
        lo = min(p.frequency_hz for p in main)
        hi = max(p.frequency_hz for p in main)
        pad = max(20.0, 0.2 * (hi - lo))
        ax.set_xlim(lo - pad, hi + pad)
    ax.set_xlabel(f"{spec.channel} offset (Hz)")
    ax.set_ylabel("amplitude")
    ax.legend(fontsize=7)


def plot_epsilon_table(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    n = [r.n for r in rows]
    ax.semilogy(n, [r.epsilon_exact for r in rows], "o-", label="exact")
    ax.semilogy(n, [r.epsilon_hightemp for r in rows], "x--", label="high temperature")
    ax.set_xlabel("spins n")
    ax.set_ylabel("epsilon")
    ax.legend(fontsize=7)
    _save(fig, path)
