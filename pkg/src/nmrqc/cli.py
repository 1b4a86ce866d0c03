"""Command-line entry point: ``nmrqc simulate|compile|spectrum|analyze|demo``."""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import engine, scaling
from .compiler import compile_circuit, load_circuit
from .demos import DEMOS, demo_system, run_demo
from .errors import NMRQCError, ParseError
from .preparation import PREPARATIONS, ThermalConditions, prepare_state
from .readout import acquire_fid, peak_table, spectra
from .sequence import PulseSequence, run_sequence
from .spin_model import load_molecule

EXIT_OK, EXIT_PARSE, EXIT_COMPILE, EXIT_PHYSICS, EXIT_IO = 0, 2, 3, 4, 5


@dataclass
class RunConfig:
    molecule: Path | None = None
    circuit: Path | None = None
    demo: str | None = None
    variant: str | None = None
    preparation: str = "pure"
    epsilon: float | None = None
    relaxation: bool = False
    crush: str = "physical"
    out_dir: Path | None = None
    figures: bool = True
    seed: int | None = None
    noise: float = 0.0
    dwell_s: float = 1e-3
    points: int = 1024
    temperature_k: float | None = None

    def validate(self):
        for p in (self.molecule, self.circuit):
            if p is not None and not Path(p).is_file():
                raise FileNotFoundError(f"no such file: {p}")
        if self.demo is not None and self.demo not in DEMOS:
            raise ValueError(f"unknown demo {self.demo!r}")
        if self.preparation not in PREPARATIONS:
            raise ValueError(f"unknown preparation {self.preparation!r}")
        if self.preparation == "override" and self.epsilon is None:
            raise ValueError("--prep override needs --epsilon")
        if self.noise and self.seed is None:
            raise ValueError("--noise needs --seed so the run is reproducible")


def circuit_parse(path, n=None):
    return load_circuit(path, n)


class Outputs:
    """Collects output files in a scratch directory; publishes them only on success."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self._tmp = None
        self.files = []

    def __enter__(self):
        if self.out_dir is not None:
            parent = self.out_dir.resolve().parent
            parent.mkdir(parents=True, exist_ok=True)
            self._tmp = Path(tempfile.mkdtemp(prefix=".nmrqc-", dir=parent))
        return self

    def path(self, name):
        self.files.append(name)
        return self._tmp / name

    def json(self, name, data):
        self.path(name).write_text(json.dumps(_plain(data), indent=1, sort_keys=True) + "\n")

    def __exit__(self, exc_type, exc, tb):
        if self._tmp is None:
            return False
        try:
            if exc_type is None:
                self.out_dir.mkdir(parents=True, exist_ok=True)
                for name in self.files:
                    (self._tmp / name).replace(self.out_dir / name)
        finally:
            shutil.rmtree(self._tmp, ignore_errors=True)
        return False

    @property
    def active(self):
        return self._tmp is not None


def _plain(obj):
    """JSON-ready copy: numpy scalars to Python, complex to [re, im]."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _add_noise(fid, sigma, seed):
    rng = np.random.default_rng(seed)
    for chan in fid.samples:
        m = len(fid.samples[chan])
        fid.samples[chan] = fid.samples[chan] + sigma * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    return fid


def _write_signal(out, fid, specs, figures, stem=""):
    fid.to_csv(out.path(f"{stem}fid.csv"))
    for chan, spec in specs.items():
        spec.to_csv(out.path(f"{stem}spectrum_{chan}.csv"))
    out.json(f"{stem}peaks.json", peak_table(specs))
    if figures:
        from . import figures as fig

        fig.plot_fid(fid, out.path(f"{stem}fid.png"))
        fig.plot_spectra(specs, out.path(f"{stem}spectrum.png"))


def _noise_block(config):
    return {"sigma": config.noise, "seed": config.seed} if config.noise else None


def run_pipeline(config):
    """Simulate one circuit (or demo) end to end; returns ``(exit status, report)``."""
    from .pipeline import REPORT_PEAK_FRACTION, execute, state_to_dict

    config.validate()
    conditions = None
    if config.demo is not None:
        system = load_molecule(config.molecule) if config.molecule else demo_system()
        variants = [config.variant] if config.variant else list(DEMOS[config.demo][1])
        report = {"demo": config.demo, "preparation": config.preparation, "relaxation": config.relaxation,
                  "variants": {}}
        status = EXIT_OK
        with Outputs(config.out_dir) as out:
            for v in variants:
                result, expected, answer = run_demo(config.demo, v, config.preparation, config.epsilon,
                                                    config.relaxation, system)
                ok = tuple(answer) == tuple(expected)
                status = status if ok else EXIT_PHYSICS
                entry = result.report()
                entry.update({"expected": list(expected), "answer": list(answer), "correct": ok})
                report["variants"][v] = entry
                if out.active:
                    _write_signal(out, result.fid, result.spectra, config.figures, stem=f"{config.demo}_{v}_")
            if out.active:
                out.json("report.json", report)
        return status, report

    if config.molecule is None or config.circuit is None:
        raise ValueError("simulate needs --molecule and --circuit (or use 'demo')")
    system = load_molecule(config.molecule)
    if config.temperature_k is not None:
        conditions = ThermalConditions.for_system(system, config.temperature_k)
    circuit = circuit_parse(config.circuit, system.n)
    result = execute(system, circuit, config.preparation, config.epsilon, config.relaxation, conditions,
                     config.dwell_s, config.points, crush_mode=config.crush)
    fid, specs = result.fid, result.spectra
    if config.noise:
        fid = _add_noise(fid, config.noise, config.seed)
        specs = spectra(fid)
    report = {
        "molecule": str(config.molecule),
        "circuit": str(config.circuit),
        "preparation": config.preparation,
        "epsilon_override": config.epsilon,
        "relaxation": config.relaxation,
        "noise": _noise_block(config),
        **result.report(),
        "peaks": peak_table(specs, REPORT_PEAK_FRACTION),
    }
    with Outputs(config.out_dir) as out:
        if out.active:
            out.json("report.json", report)
            result.sequence.save(out.path("sequence.json"))
            out.json("state.json", state_to_dict(result.final))
            _write_signal(out, fid, specs, config.figures)
    return EXIT_OK, report


# -- subcommands -----------------------------------------------------------------

def _cmd_simulate(args):
    config = RunConfig(
        molecule=args.molecule, circuit=args.circuit, preparation=args.prep, epsilon=args.epsilon,
        relaxation=args.relaxation == "on", crush=args.crush, out_dir=args.out_dir, figures=args.figures,
        seed=args.seed, noise=args.noise, dwell_s=args.dwell, points=args.points, temperature_k=args.temperature,
    )
    status, report = run_pipeline(config)
    _print_summary(report)
    return status


def _cmd_demo(args):
    config = RunConfig(
        molecule=args.molecule, demo=args.name, variant=args.variant, preparation=args.prep, epsilon=args.epsilon,
        relaxation=args.relaxation == "on", out_dir=args.out_dir, figures=args.figures,
    )
    status, report = run_pipeline(config)
    for v, entry in report["variants"].items():
        mark = "ok" if entry["correct"] else "WRONG"
        print(f"{report['demo']} {v}: answer {entry['answer']} expected {entry['expected']} [{mark}]")
    return status


def _cmd_compile(args):
    system = load_molecule(args.molecule)
    circuit = circuit_parse(args.circuit, system.n)
    seq, report = compile_circuit(circuit, system, args.rf, args.threshold)
    with Outputs(args.out_dir) as out:
        if out.active:
            seq.save(out.path("sequence.json"))
            out.json("compilation.json", report.as_dict())
    if args.report is not None:
        with Outputs(args.report.parent) as out:
            out.json(args.report.name, report.as_dict())
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(json.dumps(report.as_dict(), indent=1, sort_keys=True))
    return EXIT_OK


def _read_input(path, system, prep, epsilon):
    """A saved state, or a pulse sequence run from the chosen preparation."""
    from .pipeline import state_from_dict

    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, path) from None
    if isinstance(data, dict) and data.get("format", "").startswith("nmrqc-state"):
        rho = state_from_dict(data, path)
        if rho.shape[0] != system.dim:
            raise ParseError(f"state is {rho.shape[0]}-dimensional but the molecule needs {system.dim}", source=path)
        return rho
    seq = PulseSequence.from_dict(data, path)
    return run_sequence(seq, prepare_state(system, prep, epsilon), system).rho


def _cmd_spectrum(args):
    from .pipeline import read_pulse

    system = load_molecule(args.molecule)
    rho = _read_input(args.input, system, args.prep, args.epsilon)
    if args.read_pulse:
        rho = read_pulse(rho)
    params = engine.RelaxationParams.from_system(system, ThermalConditions.for_system(system)) \
        if args.relaxation == "on" else None
    fid = acquire_fid(rho, system, params, args.dwell, args.points)
    specs = spectra(fid)
    out_path = Path(args.out)
    stem, suffix = out_path.stem, out_path.suffix or ".csv"
    with Outputs(out_path.parent) as out:
        for chan, spec in specs.items():
            name = out_path.name if len(specs) == 1 else f"{stem}_{chan}{suffix}"
            spec.to_csv(out.path(name))
        out.json(f"{stem}_peaks.json", peak_table(specs))
        if args.figures:
            from . import figures as fig

            fig.plot_spectra(specs, out.path(f"{stem}.png"))
    for row in peak_table(specs, 1e-2):
        print(f"{row['channel']}\t{row['frequency_hz']:.6g} Hz\t{row['amplitude']:.6g}\t{row['phase']:+.4f}")
    return EXIT_OK


def _cmd_analyze(args):
    report = scaling.scaling_report(
        field_tesla=args.field, temperature_k=args.temperature, species=args.species, n_max=args.n_max,
        per_species_capacity=args.capacity, t2_s=args.t2, gate_time_s=args.gate_time,
    )
    data = report.as_dict()
    with Outputs(args.out_dir) as out:
        if out.active:
            out.json("scaling.json", data)
            scaling.write_epsilon_csv(report.epsilon_table, out.path("epsilon.csv"))
            if args.figures:
                from . import figures as fig

                fig.plot_epsilon_table(report.epsilon_table, out.path("epsilon.png"))
    print(json.dumps(_plain(data), indent=1, sort_keys=True))
    return EXIT_OK


def _print_summary(report):
    ro = report["readout"]
    print(f"readout ({ro['mode']}, eps={ro['epsilon']:.6g}): {ro['values']}")
    comp = report["compilation"]
    print(f"sequence: {comp['total_duration_s']:.6g} s, {comp['pulse_count']} pulses, {comp['swap_count']} swaps")
    for w in comp["warnings"]:
        print(f"warning: {w}", file=sys.stderr)


def _common(p, molecule_required):
    p.add_argument("--molecule", type=Path, required=molecule_required, help="molecule JSON file")
    p.add_argument("--prep", default="pure", choices=PREPARATIONS, help="initial state preparation")
    p.add_argument("--epsilon", type=float, help="polarization for --prep override")
    p.add_argument("--relaxation", default="off", choices=("on", "off"))
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                   help="render PNG figures next to the tables")


def build_parser():
    parser = argparse.ArgumentParser(prog="nmrqc", description="Liquid-state NMR quantum computing workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="prepare, compile, simulate and read out a circuit")
    _common(p, True)
    p.add_argument("--circuit", type=Path, required=True)
    p.add_argument("--crush", default="physical", choices=("physical", "ideal"))
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--seed", type=int, help="seed for --noise")
    p.add_argument("--noise", type=float, default=0.0, help="std. dev. of additive Gaussian FID noise")
    p.add_argument("--dwell", type=float, default=1e-3)
    p.add_argument("--points", type=int, default=1024)
    p.add_argument("--temperature", type=float, help="override the molecule's temperature (K)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compile", help="lower a circuit to a pulse sequence")
    p.add_argument("--molecule", type=Path, required=True)
    p.add_argument("--circuit", type=Path, required=True)
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--report", type=Path, help="also write the compilation report to this file")
    p.add_argument("--rf", type=float, default=25e3, help="hard-pulse nutation rate (Hz)")
    p.add_argument("--threshold", type=float, default=0.0, help="couplings at or below this (Hz) are not edges")
    p.set_defaults(func=_cmd_compile)

    p = sub.add_parser("spectrum", help="FID and spectrum of a saved state or pulse sequence")
    _common(p, True)
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="spectrum CSV path")
    p.add_argument("--read-pulse", action=argparse.BooleanOptionalAction, default=True,
                   help="apply (pi/2)_y to every spin before acquisition")
    p.add_argument("--dwell", type=float, default=1e-3)
    p.add_argument("--points", type=int, default=1024)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("analyze", help="feasibility arithmetic report")
    p.add_argument("--field", type=float, default=11.74)
    p.add_argument("--temperature", type=float, default=300.0)
    p.add_argument("--species", default="H1")
    p.add_argument("--n-max", type=int, default=12)
    p.add_argument("--capacity", type=int, default=6)
    p.add_argument("--t2", type=float, default=1.0)
    p.add_argument("--gate-time", type=float, default=1e-3)
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("demo", help="run a built-in algorithm")
    p.add_argument("name", choices=sorted(DEMOS))
    p.add_argument("--variant", help="one oracle / marked item; default runs all")
    _common(p, False)
    p.add_argument("--out-dir", type=Path)
    p.set_defaults(func=_cmd_demo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            status = args.func(args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        return status
    except NMRQCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
