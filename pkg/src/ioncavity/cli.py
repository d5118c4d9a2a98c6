"""Command-line entry point: ``ioncavity <subcommand> [flags]``.

Frequencies are ordinary kHz on the command line and temperatures are in
units of the Doppler temperature (``--temp-td``). CSV output carries nine
significant digits; JSON records keep full float precision. With ``--out``
every file gets a ``<name>.manifest.json`` sidecar holding the run
parameters; the timestamp lives only there.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, chain, coupling, reproduce
from .config import ConfigError, RunConfig, angular_to_khz, khz_to_angular, load_config, make_config
from .coupling import VisibilityCurve
from .fitting import FitError, fit_scan, fit_visibility_curve
from .scan import RNG_ALGORITHM, ScanTrace, simulate_scan, simulate_visibility_dataset

COMMANDS = ("positions", "modes", "visibility", "g-tilde", "optimize", "simulate", "fit", "reproduce")


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config_path: str | None
    output_path: str | None
    seed: int | None
    parameters: dict
    tool_version: str = __version__
    created: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.9g}"


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def json_text(record: dict) -> str:
    return json.dumps(record, indent=2) + "\n"


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return [float(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def emit(args, text: str, parameters: dict, seed=None) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="\n") as fh:
        fh.write(text)
    manifest = RunManifest(args.command, args.config, str(out), seed,
                           {k: _jsonable(v) for k, v in parameters.items()})
    with open(out.with_name(out.name + ".manifest.json"), "w", newline="\n") as fh:
        fh.write(json_text(asdict(manifest)))


# ---------------------------------------------------------------------------
# argument resolution

def _run_config(args) -> RunConfig:
    run = load_config(args.config) if args.config else RunConfig(trap=make_config(40.0))
    if getattr(args, "ions", None) is not None:
        if args.ions < 1:
            raise UsageError("--ions must be at least 1")
        run = RunConfig(make_config(run.trap.mass_amu, {**_overrides(run.trap), "num_ions": args.ions}),
                        run.temperature, run.freq_min, run.freq_max)
    return run


def _overrides(trap) -> dict:
    keys = ("charge", "wavelength", "g0", "doppler_temperature", "decay_rate", "pump_detuning",
            "finesse", "linewidth")
    return {k: getattr(trap, k) for k in keys}


def _temperature(args, run: RunConfig) -> float:
    if getattr(args, "temp_td", None) is not None:
        if not args.temp_td > 0:
            raise UsageError("--temp-td must be positive")
        return args.temp_td * run.trap.doppler_temperature
    if run.temperature is not None:
        return run.temperature
    raise UsageError("a temperature is required: pass --temp-td or set temperature_uk in the config")


def _frequency(args) -> float:
    if args.freq_khz is None:
        raise UsageError("--freq-khz is required")
    if not args.freq_khz > 0:
        raise UsageError("--freq-khz must be positive")
    return khz_to_angular(args.freq_khz)


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError("need 0 < lo < hi")
    return lo, hi


def _freq_range(args, run: RunConfig) -> tuple[float, float]:
    if args.freq_range_khz is not None:
        return tuple(khz_to_angular(x) for x in args.freq_range_khz)
    if run.freq_min is not None and run.freq_max is not None:
        return run.freq_min, run.freq_max
    raise UsageError("--freq-range-khz is required (or secular_freq_khz_min/max in the config)")


# ---------------------------------------------------------------------------
# subcommands

def cmd_positions(args) -> int:
    run = _run_config(args)
    omega = _frequency(args)
    sol = chain.equilibrium_positions(run.trap, omega)
    half = run.trap.wavelength / 2.0
    rows = [(i + 1, z, z / half) for i, z in enumerate(sol.positions)]
    emit(args, csv_text(["ion_index", "z_m", "z_half_wavelengths"], rows),
         {"num_ions": run.trap.num_ions, "freq_khz": args.freq_khz})
    return 0


def cmd_modes(args) -> int:
    run = _run_config(args)
    omega = _frequency(args)
    sol = chain.solve_chain(run.trap, omega)
    n = sol.num_ions
    freqs_hz = sol.mode_frequencies / (2 * np.pi)
    rows = [(j + 1, sol.mode_eigenvalues[j], freqs_hz[j], *sol.mode_matrix[:, j]) for j in range(n)]
    header = ["mode_index", "eigenvalue", "freq_hz"] + [f"u_{i + 1}" for i in range(n)]
    emit(args, csv_text(header, rows), {"num_ions": n, "freq_khz": args.freq_khz})
    return 0


def cmd_visibility(args) -> int:
    run = _run_config(args)
    temp = _temperature(args, run)
    if args.freq_khz is not None:
        grid_khz = np.array([args.freq_khz])
    else:
        lo, hi = (angular_to_khz(x) for x in _freq_range(args, run))
        grid_khz = np.linspace(lo, hi, args.points)
    curve = coupling.visibility_curve(run.trap, temp, khz_to_angular(grid_khz))
    emit(args, csv_text(["freq_khz", "visibility"], zip(grid_khz, curve.visibilities)),
         {"num_ions": run.trap.num_ions, "temperature_k": temp, "freq_khz": list(grid_khz)})
    return 0


def _report_record(report, positions, half) -> dict:
    return {
        "g_tilde": report.g_tilde,
        "phase_rad": report.phase_at_optimum,
        "per_ion_couplings": _jsonable(report.per_ion_couplings),
        "emission_phase_rad": report.emission_phase,
        "g_tilde_at_emission_phase": report.g_tilde_at_emission_phase,
        "positions_half_lambda": _jsonable(positions / half),
    }


def cmd_g_tilde(args) -> int:
    run = _run_config(args)
    omega = _frequency(args)
    temp = _temperature(args, run)
    model = coupling.build_model(run.trap, omega, temp)
    report = coupling.average_coupling(model)
    record = {"freq_khz": args.freq_khz, "num_ions": run.trap.num_ions,
              **_report_record(report, model.solution.positions, run.trap.wavelength / 2)}
    emit(args, json_text(record), {"num_ions": run.trap.num_ions, "freq_khz": args.freq_khz,
                                   "temperature_k": temp})
    return 0


def cmd_optimize(args) -> int:
    run = _run_config(args)
    temp = _temperature(args, run)
    lo, hi = _freq_range(args, run)
    best = coupling.optimise_frequency(run.trap, temp, (lo, hi), args.objective, points=args.points)
    half = run.trap.wavelength / 2
    report = _report_record(best.report, best.solution.positions, half)
    record = {
        "freq_khz": angular_to_khz(best.frequency),
        "objective": best.objective,
        "value": best.value,
        "positions_half_lambda": report.pop("positions_half_lambda"),
        "g_tilde": report.pop("g_tilde"),
        "per_ion_couplings": report.pop("per_ion_couplings"),
        "visibility": best.visibility,
        **report,
    }
    emit(args, json_text(record), {"num_ions": run.trap.num_ions, "temperature_k": temp,
                                   "freq_range_khz": [angular_to_khz(lo), angular_to_khz(hi)],
                                   "objective": best.objective, "points": args.points})
    return 0


def cmd_simulate(args) -> int:
    run = _run_config(args)
    temp = _temperature(args, run)
    if args.kind == "scan":
        omega = _frequency(args)
        model = coupling.build_model(run.trap, omega, temp)
        span = args.span_nm * 1e-9 if args.span_nm else 2 * run.trap.wavelength
        trace = simulate_scan(model, span=span, num_points=args.points, mean_rate=args.rate,
                              bin_time=args.bin_time, seed=args.seed)
        text = csv_text(["displacement_nm", "counts"], zip(trace.displacements * 1e9, trace.counts))
        params = {"kind": "scan", "num_ions": run.trap.num_ions, "freq_khz": args.freq_khz,
                  "temperature_k": temp, "span_m": span, "num_points": args.points,
                  "mean_rate": args.rate, "bin_time": args.bin_time, "wavelength_m": run.trap.wavelength,
                  "rng": RNG_ALGORITHM}
    else:
        lo, hi = (angular_to_khz(x) for x in _freq_range(args, run))
        grid_khz = np.linspace(lo, hi, args.points)
        data = simulate_visibility_dataset(run.trap, temp, args.nu0_hz, khz_to_angular(grid_khz),
                                           args.sigma, seed=args.seed)
        text = csv_text(["freq_khz", "visibility", "sigma"],
                        zip(grid_khz, data.visibilities, data.uncertainties))
        params = {"kind": "curve", "num_ions": run.trap.num_ions, "temperature_k": temp,
                  "nu0_hz": args.nu0_hz, "sigma": args.sigma, "freq_khz": list(grid_khz),
                  "rng": RNG_ALGORITHM}
    emit(args, text, params, seed=args.seed)
    return 0


def read_table(path: str) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [[float(x) for x in row] for row in reader if row]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def cmd_fit(args) -> int:
    header, table = read_table(args.input)
    run = _run_config(args)
    if header[:2] == ["displacement_nm", "counts"]:
        trace = ScanTrace(table[:, 0] * 1e-9, table[:, 1].astype(np.int64), bin_time=float("nan"),
                          mean_rate=float("nan"), rng_seed=-1, wavelength=run.trap.wavelength)
        fit = fit_scan(trace)
        record = {"kind": "scan", "visibility": fit.visibility,
                  "visibility_uncertainty": fit.visibility_uncertainty, "amplitude": fit.amplitude,
                  "phase_rad": fit.phase, "period_nm": fit.period * 1e9, "residual_rms": fit.residual_rms,
                  "significant": fit.significant}
    elif header[:3] == ["freq_khz", "visibility", "sigma"]:
        data = VisibilityCurve(khz_to_angular(table[:, 0]), table[:, 1], table[:, 2])
        t0 = (args.temp_td or 1.5) * run.trap.doppler_temperature
        fit = fit_visibility_curve(data, run.trap, t0)
        td = run.trap.doppler_temperature
        record = {"kind": "curve", "num_ions": run.trap.num_ions,
                  "temperature_k": fit.temperature, "temperature_td": fit.temperature / td,
                  "temperature_error_k": fit.temperature_error, "nu_offset_hz": fit.nu_offset,
                  "nu_offset_error_hz": fit.nu_offset_error, "covariance": fit.covariance.tolist(),
                  "chi_squared": fit.chi_squared, "dof": fit.dof}
    else:
        raise UsageError(f"unrecognised CSV header {header}; expected 'displacement_nm,counts' "
                         "or 'freq_khz,visibility,sigma'")
    emit(args, json_text(record), {"input": args.input, "num_ions": run.trap.num_ions})
    return 0


def cmd_reproduce(args) -> int:
    out_dir = Path(args.out or "reproduce_output")
    print(f"ioncavity {__version__} reproduce -> {out_dir}/")
    results = reproduce.run_all(out_dir, progress=lambda r: print(r.line(), flush=True))
    passed = sum(r.ok for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    manifest = RunManifest("reproduce", args.config, str(out_dir), None,
                           {"criteria": {str(r.number): r.ok for r in results}})
    with open(out_dir / "manifest.json", "w", newline="\n") as fh:
        fh.write(json_text(asdict(manifest)))
    return 0 if passed == len(results) else 1


HANDLERS = {
    "positions": cmd_positions,
    "modes": cmd_modes,
    "visibility": cmd_visibility,
    "g-tilde": cmd_g_tilde,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "reproduce": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ioncavity", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, ions=True):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--out", help="output path (default: stdout)")
        if ions:
            p.add_argument("--ions", type=int, help="number of ions")

    p = sub.add_parser("positions", help="equilibrium positions")
    common(p)
    p.add_argument("--freq-khz", type=float)

    p = sub.add_parser("modes", help="axial normal modes")
    common(p)
    p.add_argument("--freq-khz", type=float)

    p = sub.add_parser("visibility", help="model visibility at one frequency or over a range")
    common(p)
    p.add_argument("--freq-khz", type=float)
    p.add_argument("--freq-range-khz", type=_parse_range)
    p.add_argument("--points", type=int, default=221)
    p.add_argument("--temp-td", type=float)

    p = sub.add_parser("g-tilde", help="normalised average coupling of the solved string")
    common(p)
    p.add_argument("--freq-khz", type=float)
    p.add_argument("--temp-td", type=float)

    p = sub.add_parser("optimize", help="best COM frequency for visibility or g-tilde")
    common(p)
    p.add_argument("--freq-range-khz", type=_parse_range)
    p.add_argument("--objective", choices=["visibility", "g-tilde"], default="visibility")
    p.add_argument("--temp-td", type=float)
    p.add_argument("--points", type=int, default=coupling.FREQ_GRID)

    p = sub.add_parser("simulate", help="synthetic scan trace or visibility dataset")
    common(p)
    p.add_argument("--kind", choices=["scan", "curve"], default="scan")
    p.add_argument("--freq-khz", type=float)
    p.add_argument("--freq-range-khz", type=_parse_range)
    p.add_argument("--temp-td", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=64)
    p.add_argument("--span-nm", type=float)
    p.add_argument("--rate", type=float, default=1e4, help="mean count rate, counts/s")
    p.add_argument("--bin-time", type=float, default=0.1, help="s")
    p.add_argument("--nu0-hz", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.02)

    p = sub.add_parser("fit", help="fit a scan trace or a visibility curve from CSV")
    common(p)
    p.add_argument("input")
    p.add_argument("--temp-td", type=float, help="initial temperature for curve fits")

    p = sub.add_parser("reproduce", help="run the acceptance checks and write data files")
    common(p, ions=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return HANDLERS[args.command](args)
    except (UsageError, ConfigError) as exc:
        parser.error(str(exc))
    except (FitError, chain.ChainSolverError, ValueError, ArithmeticError) as exc:
        print(f"ioncavity {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
