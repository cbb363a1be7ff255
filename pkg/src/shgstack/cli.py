"""Command-line entry point: ``shgstack {simulate,sweep,polar,spdc,fit,materials}``.

Every subcommand accepts ``--config FILE``: a JSON object whose keys are the
subcommand's long option names (dashes or underscores). Flags given on the
command line override the file. ``--materials-dir`` (or the
SHGSTACK_MATERIALS_DIR environment variable) replaces bundled material tables
by name.

Errors end the run with a nonzero status and a single JSON line on stderr:
``{"error": "<ErrorType>", "message": "..."}``. Outputs are written only after
the whole computation succeeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis, polarization as pol, spdc, sweep
from .linear import field_profile, layer_grid, solve_linear
from .materials import MATERIALS_ENV_VAR, default_library, index_at
from .nonlinear import sfg_intensity, shg_intensity
from .stack import build_stack

TOOL = "shgstack"
AXIS_ALIASES = {"hbn": sweep.HBN_THICKNESS, "sio2": sweep.SIO2_THICKNESS, "pump": sweep.PUMP_WAVELENGTH,
                **{a: a for a in sweep.AXES}}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- argument types ---------------------------------------------------------------

def _positive(text):
    v = float(text)
    if not (np.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text}")
    return v


def _nonnegative(text):
    v = float(text)
    if not (np.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be an integer >= 1, got {text}")
    return v


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (stop inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid {text!r} must be start:stop:step")
        start, stop, step = map(float, parts)
        if step <= 0 or stop < start:
            raise UsageError(f"grid {text!r} needs step > 0 and stop >= start")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return start + step * np.arange(n)
    return np.array([float(v) for v in text.split(",") if v.strip()])


def parse_axis(text: str) -> tuple[str, np.ndarray]:
    name, _, grid = text.partition(":")
    if name not in AXIS_ALIASES:
        raise UsageError(f"unknown axis {name!r}; use one of {sorted(AXIS_ALIASES)}")
    return AXIS_ALIASES[name], parse_grid(grid)


# --- output helpers -----------------------------------------------------------------

def _config_echo(args) -> dict:
    skip = {"func", "config"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        out[k] = v.tolist() if isinstance(v, np.ndarray) else v
    return out


def metadata(args) -> dict:
    return {"tool": TOOL, "version": __version__, "config": _config_echo(args)}


def csv_header(args) -> list[str]:
    return [f"{TOOL} {__version__}", "config: " + json.dumps(_config_echo(args), sort_keys=True)]


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class Outputs:
    """Collects output files and writes them together once everything succeeded."""

    def __init__(self):
        self.files: list[tuple[Path, str]] = []
        self.stdout: list[str] = []

    def add(self, path, text: str) -> None:
        self.files.append((Path(path), text))

    def emit(self, path, text: str) -> None:
        if path is None:
            self.stdout.append(text)
        else:
            self.add(path, text)

    def commit(self) -> None:
        for path, text in self.files:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        for text in self.stdout:
            sys.stdout.write(text)


def _library(args):
    return default_library(args.materials_dir)


def _stack(args, lib):
    if args.stack is None:
        raise UsageError("--stack is required")
    if isinstance(args.stack, dict):
        return build_stack(args.stack, lib)
    path = Path(args.stack)
    if not path.is_file():
        raise UsageError(f"stack file {args.stack!r} does not exist")
    return build_stack(path.read_text(encoding="utf-8"), lib)


def _csv_with_header(args, body: str) -> str:
    return "".join(f"# {line}\n" for line in csv_header(args)) + body


# --- subcommands ------------------------------------------------------------------

def cmd_simulate(args, out: Outputs) -> None:
    lib = _library(args)
    stack = _stack(args, lib)
    if args.pump2_nm is not None:
        result = sfg_intensity(stack, lib, args.pump_nm, args.pump2_nm).to_dict()
    else:
        result = shg_intensity(stack, lib, args.pump_nm, args.pump_amplitude).to_dict()
    out.emit(args.out, _json_text({"metadata": metadata(args), "result": result}))
    if args.profile_out:
        coeffs = solve_linear(stack, lib, args.pump_nm)
        z = np.concatenate([layer_grid(stack, i, args.points_per_nm, endpoint=False)
                            for i in range(len(stack.layers))] + [[stack.thickness_nm]]) \
            if stack.layers else np.array([0.0])
        out.add(args.profile_out, _csv_with_header(args, field_profile(coeffs, z).to_csv()))


def cmd_sweep(args, out: Outputs) -> None:
    lib = _library(args)
    stack = _stack(args, lib)
    if not args.axis or len(args.axis) > 2:
        raise UsageError("give one or two --axis options")
    axes = [parse_axis(a) for a in args.axis]
    template = sweep.SweepTemplate(stack, args.pump_nm, args.parity, channel=args.channel)
    if len(axes) == 1:
        result = sweep.sweep_1d(template, lib, axes[0][0], axes[0][1], workers=args.workers)
    else:
        result = sweep.sweep_2d(template, lib, axes[0][0], axes[1][0], axes[0][1], axes[1][1],
                                workers=args.workers)
    optima = sweep.find_optima(result, args.min_prominence)
    side = result.sidecar()
    side["metadata"] = {**metadata(args), "template": template.to_dict()}
    side["optima"] = [{"location": o.location, "refined_location": o.refined_location, "value": o.value,
                       "is_boundary": o.is_boundary} for o in optima]
    text = result.to_csv(csv_header(args))
    if args.out is None:
        out.emit(None, text)
        out.emit(None, _json_text(side))
        return
    out.add(args.out, text)
    out.add(Path(args.out).with_suffix(".json"), _json_text(side))


def cmd_polar(args, out: Outputs) -> None:
    theta = pol.angle_grid(args.step_deg)
    if args.symmetry == "d3h":
        pattern = pol.d3h_pattern(args.chi0, args.orientation_deg, theta, args.analyzer)
    elif args.symmetry == "strained_d3h":
        pattern = pol.strained_d3h_pattern(args.chi0, args.orientation_deg, args.strain,
                                           args.strain_angle_deg, theta, args.analyzer)
    else:
        pattern = pol.c2_pattern(args.chi0, args.orientation_deg, args.d23_ratio, theta, args.analyzer)
    out.emit(args.out, _csv_with_header(args, pattern.to_csv()))


def _pair_model(args) -> spdc.PairSourceModel:
    return spdc.PairSourceModel(
        pair_rate_per_mw=args.pair_rate_per_mw,
        singles_background_per_mw=(args.background_per_mw, args.background_per_mw),
        dark_rate=(args.dark_rate, args.dark_rate),
        jitter_sigma_ps=args.jitter_ps, pump_power_mw=args.power_mw,
        duration_s=args.duration_s, seed=args.seed)


def cmd_spdc(args, out: Outputs) -> None:
    if args.mode == "car":
        if args.tags1 and args.tags2:
            t1 = spdc.TagStream.load(args.tags1, 1)
            t2 = spdc.TagStream.load(args.tags2, 2)
            total = args.duration_s
        else:
            model = _pair_model(args)
            t1, t2 = spdc.simulate_tags(model)
            total = model.duration_s
            if args.tags_out:
                out.add(Path(args.tags_out) / "channel1.txt", t1.to_text())
                out.add(Path(args.tags_out) / "channel2.txt", t2.to_text())
        hist = spdc.coincidence_histogram(t1, t2, args.bin_ps, args.half_window_bins, total)
        est = spdc.car(hist, args.exclude_bins)
        summary = {"peak_counts": est.peak_counts, "accidental_mean": est.accidental_mean,
                   "accidental_std": est.accidental_std, "car": est.car, "car_uncertainty": est.car_uncertainty,
                   "counts_channel1": len(t1), "counts_channel2": len(t2)}
        if args.out:
            out.add(args.out, _csv_with_header(args, hist.to_csv()))
        out.emit(None, _json_text({"metadata": metadata(args), "result": summary}))
    elif args.mode == "scan":
        powers = parse_grid(args.powers)
        scan = spdc.power_scan(_pair_model(args), powers, args.bin_ps, args.half_window_bins,
                               args.exclude_bins, workers=args.workers)
        summary = {"rate_slope": scan.rate_slope, "rate_intercept": scan.rate_intercept,
                   "rate_r_squared": scan.rate_r_squared, "car_constant": scan.car_constant,
                   "car_times_power_spread": scan.car_power_spread(),
                   "classical_limit_power_mw": spdc.classical_limit_power(_pair_model(args), args.bin_ps)}
        if args.out:
            out.add(args.out, _csv_with_header(args, scan.to_csv()))
        out.emit(None, _json_text({"metadata": metadata(args), "result": summary}))
    elif args.mode == "rate":
        lib = _library(args)
        stack = _stack(args, lib)
        if args.signal_nm is None:
            raise UsageError("--signal-nm grid is required for mode rate")
        rate = spdc.spdc_spectral_rate(stack, lib, args.pump_nm, parse_grid(args.signal_nm))
        lines = ["signal_nm,idler_nm,rate,valid"]
        for s, i, r, v in zip(rate.signal_nm, rate.idler_nm, rate.rate, rate.valid):
            lines.append(f"{s:.10g},{i:.10g},{r:.12g},{int(v)}")
        out.emit(args.out, _csv_with_header(args, "\n".join(lines) + "\n"))
    else:  # bound
        if args.c_on is None or not args.a_on or not args.a_off:
            raise UsageError("mode bound needs --c-on, --a-on and --a-off")
        b_on, b_off = spdc.enhancement_lower_bound(args.c_on, parse_grid(args.a_on), parse_grid(args.a_off))
        out.emit(args.out, _json_text({"metadata": metadata(args), "result": {"bound_on": b_on, "bound_off": b_off}}))


def _params_json(obj) -> dict:
    return {k: (float(v) if isinstance(v, (np.floating, float)) else v) for k, v in obj.items()}


def cmd_fit(args, out: Outputs) -> None:
    path = Path(args.input)
    if not path.is_file():
        raise UsageError(f"input file {args.input!r} does not exist")
    if args.model == "lorentz":
        spec = analysis.spectrum_from_sweep(analysis.read_sweep_csv(path))
        f = analysis.lorentz_fit(spec)
        result = {"center_nm": f.center_nm, "fwhm_nm": f.fwhm_nm, "amplitude": f.amplitude,
                  "offset": f.offset, "residual_rms": f.residual_rms}
    elif args.model == "optima":
        res = analysis.read_sweep_csv(path)
        result = {"optima": [{"location": o.location, "refined_location": o.refined_location,
                              "value": o.value, "is_boundary": o.is_boundary}
                             for o in sweep.find_optima(res, args.min_prominence)]}
    elif args.model == "six_maxima":
        if not args.reference:
            raise UsageError("--reference (off-structure polar CSV) is required for six_maxima")
        st = analysis.six_maxima_stats(analysis.read_polar_csv(path), analysis.read_polar_csv(Path(args.reference)))
        result = {"ratios": st.ratios.tolist(), "mean": st.mean, "std": st.std,
                  "angles_on_deg": st.angles_on_deg.tolist(), "angles_off_deg": st.angles_off_deg.tolist()}
    else:
        f = analysis.polar_fit(analysis.read_polar_csv(path), args.model)
        result = {"model": f.model, "params": _params_json(f.params), "residual_rms": f.residual_rms,
                  "period_mismatch": f.period_mismatch}
    out.emit(args.out, _json_text({"metadata": metadata(args), "result": result}))


def cmd_materials(args, out: Outputs) -> None:
    lib = _library(args)
    if args.name is None:
        result = {name: {"range_nm": list(lib[name].wavelength_range), "provenance": lib[name].provenance}
                  for name in lib.names()}
    else:
        mat = lib[args.name]
        result = {"name": args.name, "range_nm": list(mat.wavelength_range), "provenance": mat.provenance}
        if args.wavelength_nm is not None:
            n = index_at(mat, args.wavelength_nm)
            result["index"] = {"wavelength_nm": args.wavelength_nm, "n": n.real, "k": n.imag}
    out.emit(args.out, _json_text({"metadata": metadata(args), "result": result}))


# --- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog=TOOL, description=__doc__.split("\n\n")[0],
                epilog=f"Material tables: --materials-dir or ${MATERIALS_ENV_VAR} (CSV files named <material>.csv).")
    p.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, materials=True):
        sp.add_argument("--config", help="JSON file with option defaults")
        sp.add_argument("--out", help="output file (stdout if omitted)")
        if materials:
            sp.add_argument("--materials-dir", help="directory of material CSV tables overriding the bundled ones")

    s = sub.add_parser("simulate", help="SHG (or SFG) from one stack")
    common(s)
    s.add_argument("--stack", help="stack JSON file")
    s.add_argument("--pump-nm", type=_positive, default=890.0)
    s.add_argument("--pump2-nm", type=_positive, help="second pump for sum-frequency generation")
    s.add_argument("--pump-amplitude", type=_positive, default=1.0)
    s.add_argument("--profile-out", help="also write the pump field profile CSV")
    s.add_argument("--points-per-nm", type=_positive, default=2.0)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="1D/2D sweep of thickness or pump wavelength")
    common(s)
    s.add_argument("--stack", help="template stack JSON file")
    s.add_argument("--axis", action="append", help="axis:start:stop:step with axis in hbn, sio2, pump")
    s.add_argument("--pump-nm", type=_positive, default=890.0)
    s.add_argument("--parity", choices=["odd", "even"])
    s.add_argument("--channel", choices=list(sweep.CHANNELS), default="total",
                   help="SH intensity channel: total or one source class")
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--min-prominence", type=_nonnegative, default=sweep.DEFAULT_PROMINENCE)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("polar", help="polarization-resolved SH pattern")
    common(s, materials=False)
    s.add_argument("--symmetry", choices=["d3h", "strained_d3h", "c2"], default="d3h")
    s.add_argument("--chi0", type=_positive, default=1.0, help="chi0 (D3h) or d22 (C2)")
    s.add_argument("--orientation-deg", type=float, default=0.0)
    s.add_argument("--strain", type=_nonnegative, default=0.0)
    s.add_argument("--strain-angle-deg", type=float, default=0.0)
    s.add_argument("--d23-ratio", type=float, default=0.1)
    s.add_argument("--analyzer", choices=list(pol.ANALYZERS), default=pol.CO)
    s.add_argument("--step-deg", type=_positive, default=1.0)
    s.set_defaults(func=cmd_polar)

    d = spdc.PairSourceModel()
    s = sub.add_parser("spdc", help="pair-source statistics")
    common(s)
    s.add_argument("--mode", choices=["car", "scan", "rate", "bound"], default="car")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--pair-rate-per-mw", type=_nonnegative, default=d.pair_rate_per_mw)
    s.add_argument("--background-per-mw", type=_nonnegative, default=d.singles_background_per_mw[0])
    s.add_argument("--dark-rate", type=_nonnegative, default=d.dark_rate[0])
    s.add_argument("--jitter-ps", type=_nonnegative, default=d.jitter_sigma_ps)
    s.add_argument("--power-mw", type=_nonnegative, default=d.pump_power_mw)
    s.add_argument("--duration-s", type=_positive, default=d.duration_s)
    s.add_argument("--bin-ps", type=_positive_int, default=spdc.PAIR_SOURCE.bin_width_ps)
    s.add_argument("--half-window-bins", type=_positive_int, default=spdc.PAIR_SOURCE.half_window_bins)
    s.add_argument("--exclude-bins", type=int, default=spdc.PAIR_SOURCE.exclude_bins)
    s.add_argument("--powers", default=",".join(str(v) for v in spdc.PAIR_SOURCE.scan_powers_mw))
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--tags1", help="channel-1 tag file (mode car)")
    s.add_argument("--tags2", help="channel-2 tag file (mode car)")
    s.add_argument("--tags-out", help="directory for simulated tag files (mode car)")
    s.add_argument("--stack", help="stack JSON (mode rate)")
    s.add_argument("--pump-nm", type=_positive, default=409.0)
    s.add_argument("--signal-nm", help="signal grid start:stop:step (mode rate)")
    s.add_argument("--c-on", type=float, help="on-structure coincidences (mode bound)")
    s.add_argument("--a-on", help="comma-separated on-structure accidentals (mode bound)")
    s.add_argument("--a-off", help="comma-separated off-structure accidentals (mode bound)")
    s.set_defaults(func=cmd_spdc)

    s = sub.add_parser("fit", help="fit sweep or polar CSV output")
    common(s, materials=False)
    s.add_argument("--input", required=False, help="CSV emitted by sweep or polar")
    s.add_argument("--model", choices=["lorentz", "optima", "six_maxima", *analysis.POLAR_MODELS], default="lorentz")
    s.add_argument("--reference", help="off-structure polar CSV (six_maxima)")
    s.add_argument("--min-prominence", type=_nonnegative, default=sweep.DEFAULT_PROMINENCE)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("materials", help="list material tables or query an index")
    common(s)
    s.add_argument("--name")
    s.add_argument("--wavelength-nm", type=_positive)
    s.set_defaults(func=cmd_materials)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file {args.config!r} does not exist")
    cfg = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    command = cfg.pop("command", args.command)
    if command != args.command:
        raise UsageError(f"config is for {command!r}, not {args.command!r}")
    # re-parse so that explicit flags win over config values
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("func", "help"):
            raise UsageError(f"unknown config key {key!r}")
        action = known[dest]
        if action.type is not None and not isinstance(value, (list, dict)) and value is not None:
            try:
                value = action.type(str(value))
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from exc
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config key {key!r}: {value!r} not in {list(action.choices)}")
        defaults[dest] = value
    sub.set_defaults(**defaults)
    args = parser.parse_args(argv)
    if isinstance(args.__dict__.get("stack"), str) and not os.path.isabs(args.stack) \
            and "stack" in defaults and not Path(args.stack).is_file():
        # stack paths inside a config are relative to the config file
        args.stack = str(path.parent / args.stack)
    return args


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        out = Outputs()
        args.func(args, out)
        out.commit()
        return 0
    except UsageError as exc:
        sys.stderr.write(json.dumps({"error": "UsageError", "message": str(exc)}) + "\n")
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
