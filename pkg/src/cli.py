"""Command-line front end for the OOFSK capacity engine"""
import argparse
import os
import shlex
import sys
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from dotenv import dotenv_values
from tqdm import tqdm

from config.settings import settings
from src.capacity import DETECTORS, ENERGY, Estimator, compute_capacity
from src.channel import CSI_MODES, IMPERFECT, ChannelParams, PeakConstraint
from src.exceptions import ConfigurationError, DomainError, EstimationError, OOFSKError
from src.figures import CSV_COLUMNS, DEFAULT_SNR_GRID_DB, PRESETS, figure_estimator, run_figure
from src.lowpower import bit_energy_point, eb_n0_db, low_power_summary, minimum_bit_energy, spectral_efficiency
from src.numerics import McConfig, gauss_laguerre
from src.validate import run_default_suite
from utils.helpers import configure_logging, db_to_linear, get_version, log_message, parse_snr_grid, write_csv

EXIT_OK = 0
EXIT_VALIDATION_FAILURE = 1
EXIT_USAGE = 2

LOWPOWER_COLUMNS = ["regime", "eta", "detector", "csi", "m", "nu", "c_dot0", "c_ddot0",
                    "eb_n0_at_zero_se_db", "eb_n0_min_db", "snr_at_min", "s0",
                    "divergent", "min_at_nonzero_se", "boundary_minimum"]
VALIDATE_COLUMNS = ["check", "statistic", "threshold", "passed", "detail"]

# Options that cannot be combined; a config-file value yields to an explicit flag of its group
_EXCLUSIVE = [{"nu", "peak_eta"}, {"snr_db", "snr_grid"}, {"rician_k", "gamma2"}, {"rician_k", "d2"}]


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _base_parser() -> argparse.ArgumentParser:
    base = argparse.ArgumentParser(add_help=False)
    base.add_argument("--config", help="key=value file whose entries act as option defaults")
    base.add_argument("--quiet", action="store_true", help="Hide progress bars")
    base.add_argument("--log-level", default=settings.LOG_LEVEL, help="Logging level")
    base.add_argument("--out", help="Output CSV path (figure: output directory)")
    base.add_argument("--format", choices=["csv"], default="csv", help="Output format")
    base.add_argument("--seed", type=int, help="Monte Carlo seed")
    return base


def _add_model_arguments(parser: argparse.ArgumentParser):
    channel = parser.add_argument_group("channel")
    channel.add_argument("--gamma2", type=float, help="Diffuse fading variance")
    channel.add_argument("--d2", type=float, help="Specular power |d|^2")
    channel.add_argument("--K", dest="rician_k", type=float,
                         help="Rician factor with E{|h|^2}=1 (inf for the unfaded channel)")

    signaling = parser.add_argument_group("signaling")
    signaling.add_argument("--m", type=_positive_int, default=2, help="Number of tones M")
    regime = signaling.add_mutually_exclusive_group()
    regime.add_argument("--nu", type=float, help="Fixed duty factor (fixed-PAR regime)")
    regime.add_argument("--peak-eta", type=float, help="Normalized peak power (fixed-peak regime)")
    snr = signaling.add_mutually_exclusive_group()
    snr.add_argument("--snr-db", type=float, help="Single SNR in dB")
    snr.add_argument("--snr-grid", help="SNR grid in dB, 'start:stop:step' or comma list")
    signaling.add_argument("--detector", choices=DETECTORS, default=ENERGY)
    signaling.add_argument("--csi", choices=CSI_MODES, default=IMPERFECT)

    estimation = parser.add_argument_group("estimation")
    estimation.add_argument("--samples", type=int, help="Monte Carlo sample count")
    estimation.add_argument("--quadrature-order", type=int,
                            help="Use tensor Gauss-Laguerre quadrature of this order (M <= 3)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oofsk",
        description="Capacity and low-power analytics of On-Off FSK over Rician fading",
    )
    parser.add_argument("--version", action="version", version=get_version())
    subparsers = parser.add_subparsers(dest="command", required=True)
    base = _base_parser()

    capacity = subparsers.add_parser("capacity", parents=[base], help="Capacity at one SNR or on a grid")
    _add_model_arguments(capacity)

    curve = subparsers.add_parser("curve", parents=[base], help="Bit-energy curve over an SNR grid")
    _add_model_arguments(curve)

    lowpower = subparsers.add_parser("lowpower", parents=[base], help="Low-power summary of a regime")
    _add_model_arguments(lowpower)

    validate = subparsers.add_parser("validate", parents=[base], help="Run the cross-validation suite")
    validate.add_argument("--samples", type=int, default=200_000, help="Samples per check")
    validate.add_argument("--inject-bias", action="store_true",
                          help="Add a known bias to the simulated information (negative control)")

    figure = subparsers.add_parser("figure", parents=[base], help="Regenerate the data of a figure")
    figure.add_argument("preset", choices=sorted(PRESETS))
    figure.add_argument("--samples", type=int, help="Use Monte Carlo with this budget")
    figure.add_argument("--quadrature-order", type=int, help="Quadrature order for M <= 3 curves")
    figure.add_argument("--snr-grid", help="SNR grid in dB")
    figure.add_argument("--eta-grid", type=_float_list, help="Comma list of peak levels (fig8/fig9)")
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise ConfigurationError(f"Unknown command: {command}")


def _truthy(value: str) -> bool:
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def _config_defaults(sub: argparse.ArgumentParser, path: str, explicit: Dict[str, Any]) -> Dict[str, Any]:
    """Map a key=value file onto option defaults of a subcommand"""
    if not os.path.isfile(path):
        raise ConfigurationError(f"Config file not found: {path}")
    try:
        values = dotenv_values(path)
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"Cannot read config file {path}: {e}")

    by_key = {}
    for action in sub._actions:
        for option in action.option_strings:
            by_key[option.lstrip("-").replace("-", "_")] = action
        by_key[action.dest] = action

    defaults = {}
    for key, raw in values.items():
        action = by_key.get(key.replace("-", "_"))
        if action is None or action.dest in ("help", "config"):
            raise ConfigurationError(f"Unknown config key: {key}")
        if any(action.dest in group and any(explicit.get(o) is not None for o in group - {action.dest})
               for group in _EXCLUSIVE):
            continue
        if isinstance(action, argparse._StoreTrueAction):
            defaults[action.dest] = _truthy(raw)
        else:
            defaults[action.dest] = raw
    return defaults


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = _subparser(parser, args.command)
        sub.set_defaults(**_config_defaults(sub, args.config, vars(args)))
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------------------
# Argument resolution
# ---------------------------------------------------------------------------

def resolve_channel(args: argparse.Namespace) -> ChannelParams:
    if args.rician_k is not None:
        if args.gamma2 is not None or args.d2 is not None:
            raise ConfigurationError("--K cannot be combined with --gamma2/--d2")
        return ChannelParams.from_rician_k(args.rician_k)
    if args.gamma2 is None and args.d2 is None:
        return ChannelParams(d_mag_sq=1.0, gamma_sq=0.0)
    return ChannelParams(d_mag_sq=args.d2 or 0.0, gamma_sq=args.gamma2 or 0.0)


def resolve_regime(args: argparse.Namespace) -> PeakConstraint:
    if args.nu is not None and args.peak_eta is not None:
        raise ConfigurationError("Exactly one of --nu and --peak-eta governs the regime")
    if args.peak_eta is not None:
        return PeakConstraint.fixed_peak(args.peak_eta)
    return PeakConstraint.fixed_par()


def resolve_nu(args: argparse.Namespace) -> Optional[float]:
    if args.peak_eta is not None:
        return None
    return 1.0 if args.nu is None else args.nu


def resolve_snr_grid_db(args: argparse.Namespace, default: List[float]) -> List[float]:
    if args.snr_db is not None and args.snr_grid:
        raise ConfigurationError("Use either --snr-db or --snr-grid")
    if args.snr_db is not None:
        return [args.snr_db]
    if args.snr_grid:
        try:
            return parse_snr_grid(args.snr_grid)
        except ValueError as e:
            raise ConfigurationError(str(e))
    return list(default)


def resolve_estimator(args: argparse.Namespace) -> Estimator:
    if getattr(args, "quadrature_order", None) is not None:
        return gauss_laguerre(args.quadrature_order)
    samples = settings.SAMPLES if args.samples is None else args.samples
    seed = settings.SEED if args.seed is None else args.seed
    return McConfig(sample_count=samples, seed=seed)


def run_metadata(args: argparse.Namespace, argv: List[str]) -> Dict[str, Any]:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("quiet", "log_level")}
    return {
        "command_line": " ".join(shlex.quote(a) for a in ["oofsk"] + list(argv)),
        "params": params,
        "seed": args.seed if args.seed is not None else settings.SEED,
        "version": get_version(),
    }


def emit(rows: List[Dict[str, Any]], columns: List[str], args: argparse.Namespace, metadata: Dict[str, Any]):
    if args.out:
        write_csv(rows, args.out, columns, metadata)
    else:
        pd.DataFrame(rows, columns=columns).to_csv(sys.stdout, index=False, float_format="%.17g",
                                                   lineterminator="\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _sweep(points: List[float], fn, quiet: bool) -> list:
    return [fn(p) for p in tqdm(points, disable=quiet, desc="snr")]


def run_capacity(args: argparse.Namespace, argv: List[str]) -> int:
    ch = resolve_channel(args)
    regime = resolve_regime(args)
    nu = resolve_nu(args)
    est = resolve_estimator(args)
    grid_db = resolve_snr_grid_db(args, [0.0])

    def row(snr_db):
        snr = db_to_linear(snr_db)
        cfg = regime.signaling(args.m, snr, nu)
        result = compute_capacity(ch, cfg, args.detector, args.csi, est)
        c = result.nats_per_symbol
        return {"snr_db": snr_db, "nu": cfg.nu, "capacity_nats": c, "capacity_bits": result.bits_per_symbol,
                "spectral_eff_bpshz": spectral_efficiency(c, args.m),
                "eb_n0_db": eb_n0_db(snr, c, ch.mean_power()), "std_err": result.std_error,
                "method": result.method}

    emit(_sweep(grid_db, row, args.quiet), CSV_COLUMNS, args, run_metadata(args, argv))
    return EXIT_OK


def run_curve(args: argparse.Namespace, argv: List[str]) -> int:
    ch = resolve_channel(args)
    regime = resolve_regime(args)
    nu = resolve_nu(args)
    est = resolve_estimator(args)
    grid_db = resolve_snr_grid_db(args, DEFAULT_SNR_GRID_DB)
    if regime.eta is not None:
        grid_db = [s for s in grid_db if db_to_linear(s) <= regime.eta]
        if not grid_db:
            raise ConfigurationError(f"No grid point lies below the peak level eta={regime.eta}")

    def row(snr_db):
        p = bit_energy_point(ch, db_to_linear(snr_db), regime, args.detector, args.csi, args.m, nu, est)
        return {"snr_db": snr_db, "nu": p.nu, "capacity_nats": p.capacity_nats,
                "capacity_bits": p.capacity_nats / np.log(2.0), "spectral_eff_bpshz": p.spectral_efficiency,
                "eb_n0_db": p.eb_n0_db, "std_err": p.std_error, "method": p.method}

    rows = _sweep(grid_db, row, args.quiet)
    metadata = run_metadata(args, argv)
    if regime.eta is None:
        def curve_eb(snr):
            return bit_energy_point(ch, snr, regime, args.detector, args.csi, args.m, nu, est).eb_n0_db
        eb_min, snr_min, boundary = minimum_bit_energy(curve_eb)
        metadata.update({"eb_n0_min_db": eb_min, "snr_at_min": snr_min, "boundary_minimum": boundary})
        log_message(f"Minimum Eb/N0 {eb_min:.3f} dB at SNR {snr_min:.4g}")
    emit(rows, CSV_COLUMNS, args, metadata)
    return EXIT_OK


def run_lowpower(args: argparse.Namespace, argv: List[str]) -> int:
    ch = resolve_channel(args)
    regime = resolve_regime(args)
    nu = resolve_nu(args)
    est = figure_estimator(args.m, args.samples, args.seed, args.quadrature_order)
    s = low_power_summary(ch, regime, args.detector, args.csi, args.m, nu, est)
    row = {"regime": s.regime.kind, "eta": s.regime.eta, "detector": s.detector, "csi": s.csi, "m": s.m,
           "nu": nu, "c_dot0": s.c_dot0, "c_ddot0": s.c_ddot0, "eb_n0_at_zero_se_db": s.eb_n0_at_zero_se_db,
           "eb_n0_min_db": s.eb_n0_min_db, "snr_at_min": s.snr_at_min, "s0": s.s0, "divergent": s.divergent,
           "min_at_nonzero_se": s.min_at_nonzero_se, "boundary_minimum": s.boundary_minimum}
    emit([row], LOWPOWER_COLUMNS, args, run_metadata(args, argv))
    return EXIT_OK


def run_validate(args: argparse.Namespace, argv: List[str]) -> int:
    seed = settings.SEED if args.seed is None else args.seed
    rows = run_default_suite(args.samples, seed, args.inject_bias)
    emit(rows, VALIDATE_COLUMNS, args, run_metadata(args, argv))
    failed = [r["check"] for r in rows if not r["passed"]]
    for name in failed:
        log_message(f"Validation check failed: {name}", "ERROR")
    if failed:
        return EXIT_VALIDATION_FAILURE
    log_message(f"All {len(rows)} validation checks passed")
    return EXIT_OK


def run_figure_command(args: argparse.Namespace, argv: List[str]) -> int:
    overrides = {"samples": args.samples, "seed": args.seed, "quadrature_order": args.quadrature_order,
                 "eta_grid": args.eta_grid}
    if args.snr_grid:
        try:
            overrides["snr_grid_db"] = parse_snr_grid(args.snr_grid)
        except ValueError as e:
            raise ConfigurationError(str(e))
    paths = run_figure(args.preset, overrides, args.out, run_metadata(args, argv), quiet=args.quiet)
    for path in paths:
        print(path)
    return EXIT_OK


COMMANDS = {
    "capacity": run_capacity,
    "curve": run_curve,
    "lowpower": run_lowpower,
    "validate": run_validate,
    "figure": run_figure_command,
}


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    except ConfigurationError as e:
        configure_logging(settings.LOG_LEVEL)
        log_message(str(e), "ERROR")
        return EXIT_USAGE

    configure_logging(args.log_level)
    try:
        return COMMANDS[args.command](args, argv)
    except (DomainError, ConfigurationError) as e:
        log_message(f"Usage error: {e}", "ERROR")
        return EXIT_USAGE
    except EstimationError as e:
        log_message(f"Estimation failed: {e}", "ERROR")
        return EXIT_VALIDATION_FAILURE
    except OOFSKError as e:
        log_message(str(e), "ERROR")
        return EXIT_VALIDATION_FAILURE
    except OSError as e:
        log_message(f"Cannot write output: {e}", "ERROR")
        return EXIT_USAGE
