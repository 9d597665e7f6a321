"""Command-line entry point.

Every subcommand writes ``manifest.json`` into its output directory before
any computation and then plain CSV / XYZ / text results next to it.

Exit codes: 0 success, 2 bad input, 3 unstable trap, 4 non-convergence.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_INPUT, EXIT_UNSTABLE, EXIT_CONVERGENCE = 0, 2, 3, 4
ISOLEVEL_MEV = 10.0


class InputError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def _species(name):
    from .potentials import SPECIES

    try:
        return SPECIES[name.lower()]
    except KeyError:
        raise InputError(f"unknown species {name!r}; choose from {', '.join(sorted(SPECIES))}") from None


def _load_layout(args):
    from .geometry import load_layout

    try:
        return load_layout(args.layout, gapless=args.gapless)
    except FileNotFoundError as exc:
        raise InputError(f"layout file not found: {exc.filename or args.layout}") from None
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read layout {args.layout!r}: {exc}") from None


def _load_voltages(path, layout):
    from .geometry import load_voltages

    try:
        return load_voltages(path, layout)
    except FileNotFoundError as exc:
        raise InputError(f"voltage file not found: {exc.filename or path}") from None
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read voltages {path!r}: {exc}") from None


def _config_path(p):
    from .geometry import _resolve

    try:
        return str(_resolve(p))
    except Exception:
        return str(p)


def write_manifest(out: Path, command: str, argv, configs: dict, seed) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "argv": list(argv),
        "config_paths": {k: _config_path(v) for k, v in configs.items() if v is not None},
        "seed": seed,
        "output_directory": str(out),
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def _common(p, voltages=True, voltages_required=True):
    p.add_argument("--layout", default="five_wire", help="layout file or bundled name (default: five_wire)")
    p.add_argument("--no-gapless", dest="gapless", action="store_false", help="keep the gaps of the layout file")
    if voltages:
        p.add_argument("--voltages", required=voltages_required, help="voltage file or bundled name (set_a, set_b, set_c)")
    p.add_argument("--species", default="sr88")
    p.add_argument("--out", default="out", help="output directory")


# ----------------------------------------------------------- subcommands

def cmd_characterize(args, argv):
    from .characterize import UnstableTrapError, NullNotFoundError, characterize, find_rf_null, stability_params
    from .fields import TrapFields
    from .potentials import EffectivePotential
    from .io import write_csv

    out = Path(args.out)
    write_manifest(out, "characterize", argv, {"layout": args.layout, "voltages": args.voltages}, None)
    layout = _load_layout(args)
    volts = _load_voltages(args.voltages, layout)
    species = _species(args.species)
    fields = TrapFields(layout, volts)
    try:
        null = find_rf_null(fields)
    except NullNotFoundError as exc:
        (out / "report.txt").write_text(f"error: {exc}\n", encoding="utf-8")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    code = EXIT_OK
    try:
        char = characterize(fields, species, depth=not args.no_depth)
        (out / "report.txt").write_text(char.table() + "\n", encoding="utf-8")
        (out / "report.json").write_text(char.to_json() + "\n", encoding="utf-8")
        e_ref = float(EffectivePotential(fields, species).energy(char.minimum_position)[0])
        for w in char.warnings:
            print(f"warning: {w}", file=sys.stderr)
    except UnstableTrapError as exc:
        a, q, _ = stability_params(fields, species, null)
        text = (
            f"ion height    {null[1] / 1e-6:10.2f} um\n"
            f"stable             False\n"
            + "".join(f"q_{ax}          {q[i]:10.5f}\n" for i, ax in enumerate("xyz"))
            + "".join(f"a_{ax}          {a[i]:10.5f}\n" for i, ax in enumerate("xyz"))
            + f"error: unstable trap: {exc}\n"
        )
        (out / "report.txt").write_text(text, encoding="utf-8")
        print(f"error: unstable trap: {exc}", file=sys.stderr)
        e_ref = float(EffectivePotential(fields, species).energy(null)[0])
        code = EXIT_UNSTABLE

    # xy cross-section through the null
    h = null[1]
    n = args.grid
    xs = np.linspace(-1.5 * h, 1.5 * h, n)
    ys = np.linspace(0.2 * h, 2.0 * h, n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, null[2])])
    pot = EffectivePotential(fields, species)
    u = (pot.energy(pts) - e_ref) / 1.602176634e-19 * 1e3
    rows = ((p[0] * 1e6, p[1] * 1e6, float(v)) for p, v in zip(pts, u))
    write_csv(
        out / "cross_section.csv",
        ["x_um", "y_um", "energy_meV"],
        rows,
        comments=[
            f"plane: xy at z_um={round(null[2] * 1e6, 6) + 0.0:.6f}",
            f"isolevel_spacing_meV: {ISOLEVEL_MEV:g}",
            "energy relative to the potential minimum (or the rf null when unstable)",
        ],
    )
    if code == EXIT_OK:
        print(char.table())
    return code


def cmd_scan(args, argv):
    from .characterize import frequency_scan
    from .io import write_csv

    out = Path(args.out)
    write_manifest(out, "scan", argv, {"layout": args.layout, "voltages": args.voltages}, None)
    start, stop, num = args.vrf
    num = int(num)
    if not (start > 0 and stop > start and num >= 2):
        raise InputError("V_rf range must be positive and ascending: --vrf START STOP N")
    layout = _load_layout(args)
    volts = _load_voltages(args.voltages, layout)
    rows = frequency_scan(layout, volts, _species(args.species), np.linspace(start, stop, num))
    write_csv(
        out / "scan.csv",
        ["V_rf_V", "f_x_kHz", "f_y_kHz", "f_z_kHz", "stable", "note"],
        ([r["V_rf"], r["f_x"] / 1e3, r["f_y"] / 1e3, r["f_z"] / 1e3, int(r["stable"]), r["note"]] for r in rows),
    )
    if not any(r["stable"] for r in rows):
        print("error: every scan point is unstable", file=sys.stderr)
        return EXIT_UNSTABLE
    return EXIT_OK


def _write_crystal_outputs(out, positions, report_prefix=""):
    from .crystal import classify, histogram_csv

    rep = classify(positions)
    (out / "report.txt").write_text(report_prefix + rep.to_text(), encoding="utf-8")
    (out / "report.json").write_text(rep.to_json() + "\n", encoding="utf-8")
    (out / "nn_histogram.csv").write_text(histogram_csv(positions), encoding="utf-8")
    print(rep.to_text(), end="")
    return rep


def cmd_crystallize(args, argv):
    from .characterize import UnstableTrapError
    from .dynamics import (
        ConvergenceError,
        CoolingModel,
        HarmonicTrap,
        LayoutTrap,
        load_schedule,
        minimize_crystal,
        run_schedule,
    )
    from .io import write_csv, write_xyz

    out = Path(args.out)
    write_manifest(
        out, "crystallize", argv,
        {"layout": args.layout if not args.harmonic else None, "voltages": args.voltages, "schedule": args.schedule},
        args.seed,
    )
    if args.n < 1:
        raise InputError("--n must be at least 1")
    species = _species(args.species)
    if args.harmonic:
        if args.schedule:
            raise InputError("--schedule needs a layout, not --harmonic")
        trap = HarmonicTrap(np.array(args.harmonic) * 1e3, reference=species)
        layout = None
    else:
        layout = _load_layout(args)
        if args.schedule:
            try:
                schedule = load_schedule(args.schedule, layout)
            except FileNotFoundError as exc:
                raise InputError(f"schedule file not found: {exc.filename or args.schedule}") from None
            except (ValueError, KeyError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read schedule {args.schedule!r}: {exc}") from None
            start = schedule.voltages[0]
        elif args.voltages:
            start = _load_voltages(args.voltages, layout)
        else:
            raise InputError("need --voltages, --schedule or --harmonic")
        trap = LayoutTrap(layout, start)
    try:
        ens = minimize_crystal(trap, species, args.n, seed=args.seed, steps_per_rung=args.steps_per_rung,
                               threads=args.threads)
    except UnstableTrapError as exc:
        print(f"error: unstable trap: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    frames = [(0.0, ens.positions.copy())]
    prefix = ""
    if layout is not None and args.schedule:
        friction = args.friction if args.friction is not None else species.mass * 2 * math.pi * 15e3
        cooling = CoolingModel.doppler(friction=friction)
        res = run_schedule(ens, layout, schedule, cooling, mode=args.mode, stride=args.stride,
                           seed=args.seed, threads=args.threads)
        frames = res.frames
        write_csv(out / "temperature.csv", ["t_s", "T_K"], res.temperature_log)
        ens = res.final
        if res.escapes:
            prefix = "".join(f"escape: ion {e.index} at t={e.time:.6e} s\n" for e in res.escapes)
    write_xyz(out / "frames.xyz", frames, ens.species)
    act = ens.active
    if act.sum() < 2:
        print("error: fewer than two ions remain", file=sys.stderr)
        return EXIT_CONVERGENCE
    _write_crystal_outputs(out, ens.positions[act], prefix)
    return EXIT_OK


def cmd_compensate(args, argv):
    from .characterize import UnstableTrapError, NullNotFoundError
    from .compensation import CompensationRankError, StrayField, solve_compensation

    out = Path(args.out)
    write_manifest(out, "compensate", argv, {"layout": args.layout, "voltages": args.voltages}, None)
    layout = _load_layout(args)
    volts = _load_voltages(args.voltages, layout)
    free = None
    if args.free:
        free = [g.split(",") if "," in g else g for g in args.free]
    try:
        sol = solve_compensation(layout, volts, _species(args.species), StrayField(tuple(args.stray)), free,
                                 axes=args.axes)
    except CompensationRankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (UnstableTrapError, NullNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except ValueError as exc:
        raise InputError(str(exc)) from None
    (out / "compensation.txt").write_text(sol.table(), encoding="utf-8")
    print(sol.table(), end="")
    return EXIT_OK


def cmd_classify(args, argv):
    from .crystal import DegenerateInputError
    from .io import read_xyz

    out = Path(args.out)
    write_manifest(out, "classify", argv, {"positions": args.positions}, None)
    try:
        frames = read_xyz(args.positions)
    except FileNotFoundError:
        raise InputError(f"positions file not found: {args.positions}") from None
    except (ValueError, IndexError) as exc:
        raise InputError(f"cannot read {args.positions}: {exc}") from None
    try:
        _write_crystal_outputs(out, frames[args.frame][1])
    except DegenerateInputError as exc:
        raise InputError(str(exc)) from None
    return EXIT_OK


# ------------------------------------------------------------------ main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="traplab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"traplab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("characterize", help="null height, frequencies, q/a, depth, cross-section CSV")
    _common(p)
    p.add_argument("--grid", type=int, default=81, help="cross-section points per side")
    p.add_argument("--no-depth", action="store_true", help="skip the trap-depth search")
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("scan", help="secular frequencies versus V_rf")
    _common(p)
    p.add_argument("--vrf", nargs=3, type=float, metavar=("START", "STOP", "N"), default=(80.0, 160.0, 9))
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("crystallize", help="relax or ramp-load an N-ion crystal and classify it")
    _common(p, voltages_required=False)
    p.add_argument("--harmonic", nargs=3, type=float, metavar=("FX", "FY", "FZ"), help="harmonic trap, kHz")
    p.add_argument("--schedule", help="schedule file or bundled name (perpendicular_ramp)")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--mode", choices=("pseudo", "full-rf"), default="pseudo")
    p.add_argument("--steps-per-rung", type=int, default=10_000)
    p.add_argument("--stride", type=int, default=1000, help="steps between trajectory frames")
    p.add_argument("--friction", type=float, default=None,
                   help="Langevin friction during schedules, kg/s (default: mass x 2 pi x 15 kHz)")
    p.set_defaults(func=cmd_crystallize)

    p = sub.add_parser("compensate", help="DC deltas that null the static field at the rf null")
    _common(p)
    p.add_argument("--stray", nargs=3, type=float, default=(0.0, 0.0, 0.0), metavar=("EX", "EY", "EZ"),
                   help="uniform stray field, V/m")
    p.add_argument("--free", action="append",
                   help="free electrode, role, or comma-separated common-mode group (repeatable)")
    p.add_argument("--axes", default="xyz", help="field components to null (default xyz)")
    p.set_defaults(func=cmd_compensate)

    p = sub.add_parser("classify", help="classify the crystal in an XYZ file")
    p.add_argument("positions")
    p.add_argument("--frame", type=int, default=-1)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_classify)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 2 on bad usage, 0 for --help
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
