"""``nvpolar`` command line: simulate sweeps, fit them, and emit the data behind every simulated figure."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Callable, NoReturn, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from nvpolar import context
from nvpolar.config import RunConfig
from nvpolar.dipole import DipoleEmitter, dipole_curves
from nvpolar.errors import ConvergenceError, DomainError, InputValidationError
from nvpolar.estimator.confidence import background_error_sweep, confidence_monte_carlo, min_acquisition_time
from nvpolar.estimator.fitting import chi2_landscape, fit_all, model_sweep
from nvpolar.geometry import nv_axes
from nvpolar.logging import setup_logger
from nvpolar.odmr import add_odmr_noise, spectrum
from nvpolar.photon_statistics import g2_contour_two, g2_map_three, g2_map_two
from nvpolar.report import (
    confidence_summary_table,
    fit_report,
    fit_summary,
    meta_line,
    write_frame,
    write_json,
    write_matrix,
)
from nvpolar.runners.profiler import profiler
from nvpolar.sweep import read_sweep_csv, write_sweep_csv
from nvpolar.synthetic import generate_sweep, noiseless_sweep

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2

DEFAULT_MAP_RATIOS = [0.1, 0.3, 0.5, 0.7, 0.9]
DEFAULT_MAP_BACKGROUNDS = [0.0, 0.1, 0.2, 0.3, 0.4]


def suffixed(path: str, suffix: str) -> str:
    """``out.csv`` -> ``out_<suffix>.csv``"""
    root, ext = os.path.splitext(path)
    return f"{root}_{suffix}{ext or '.csv'}"


def _meta(args: argparse.Namespace, config: RunConfig) -> str | None:
    return None if args.no_meta else meta_line(config.command, config.seed)


def _config(args: argparse.Namespace, input_path: str | None = None) -> RunConfig:
    return RunConfig.build(
        command=args.command,
        config_path=args.config,
        overrides=args.set,
        input_path=input_path,
        output_path=args.out,
        seed=args.seed,
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _config(args)
    optics = config.optics()
    meta = _meta(args, config)

    if args.orientation_curves:
        angles_deg = config.angles_deg()
        beta = math.radians(args.beta if args.beta is not None else config.get("beta_deg"))
        columns = {"angle_deg": angles_deg}
        for nv in nv_axes():
            curves = dipole_curves(DipoleEmitter(nv, beta=beta), optics, np.deg2rad(angles_deg))
            columns[f"{nv.label}_dipole1"] = curves[0]
            columns[f"{nv.label}_dipole2"] = curves[1]
            columns[f"{nv.label}_total"] = curves.sum(axis=0)
        write_frame(args.out, pd.DataFrame(columns), meta=meta)
        logger.info(f"Wrote per-dipole curves at beta={math.degrees(beta):g} deg to {args.out}")
        return EXIT_OK

    truth = config.emitter_system()
    t = config.get("acquisition_time")
    if args.noiseless:
        sweep = noiseless_sweep(truth, optics, t, config.angles_deg())
    else:
        sweep = generate_sweep(truth, optics, t, config.seed, config.angles_deg())
    write_sweep_csv(sweep, args.out, comment=meta)
    logger.info(f"Wrote {'noiseless' if args.noiseless else 'noisy'} sweep of {len(sweep)} angles to {args.out}")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    config = _config(args, input_path=args.input)
    sweep = read_sweep_csv(args.input)
    optics = config.optics()
    options = config.fit_options()

    with profiler("fit.json"):
        result = fit_all(sweep, optics, options)
    report = fit_report(result, options, input_path=args.input, meta=_meta(args, config))
    if args.out:
        write_json(args.out, report)
    else:
        sys.stdout.write(json.dumps(report, indent=2) + "\n")
    print(fit_summary(result), file=sys.stderr)

    if args.curves:
        best = result.best.hypothesis
        model = model_sweep(best, optics, sweep.angles_deg)
        single = model_sweep(result.single_emitter.hypothesis, optics, sweep.angles_deg)
        curves = pd.DataFrame(
            {
                "angle_deg": sweep.angles_deg,
                "intensity": sweep.intensities,
                "g2": sweep.g2_values,
                "model_intensity": model.intensities,
                "model_g2": model.g2_values,
                "single_intensity": single.intensities,
                "single_g2": single.g2_values,
            }
        )
        write_frame(args.curves, curves, meta=_meta(args, config))
    if args.landscape:
        ratios = config.get("map_ratios") or list(np.round(np.linspace(0.0, 1.0, 101), 10))
        backgrounds = config.get("map_backgrounds") or list(np.round(np.linspace(0.0, 0.5, 101), 10))
        pair = config.pair() if config.get("pair") else result.best_class.representative
        landscape = chi2_landscape(sweep, pair, ratios, backgrounds, optics, g2_weight=options.g2_weight)
        write_matrix(args.landscape, landscape, meta=_meta(args, config))

    if not result.converged:
        logger.error("At least one fit did not converge; results are best-so-far")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_confidence(args: argparse.Namespace) -> int:
    config = _config(args)
    optics = config.optics()
    meta = _meta(args, config)

    if args.min_time:
        ratios = config.get("map_ratios") or DEFAULT_MAP_RATIOS
        backgrounds = config.get("map_backgrounds") or DEFAULT_MAP_BACKGROUNDS
        with profiler("min_acquisition_time.json"):
            result = min_acquisition_time(
                ratios,
                backgrounds,
                optics,
                config.seed,
                target_uncertainty=config.get("target_uncertainty"),
                pair=config.pair(),
                n_trials=config.get("n_trials"),
                t_max=config.get("max_acquisition_time"),
            )
        write_matrix(args.out, result.to_frame("t_min"), meta=meta)
        unreached = int(np.isnan(result.values["t_min"]).sum())
        if unreached:
            logger.warning(f"{unreached} cells did not reach the target below t={config.get('max_acquisition_time'):g}")
        return EXIT_OK

    truth = config.emitter_system()
    with profiler("confidence.json"):
        summary = confidence_monte_carlo(
            truth,
            optics,
            config.get("acquisition_time"),
            config.get("n_trials"),
            config.seed,
            pair=config.pair(),
        )
    write_frame(args.out, summary.trials, meta=meta)
    if args.summary:
        payload = {"schema_version": "1.0", **summary.to_dict()}
        if meta is not None:
            payload["meta"] = meta
        write_json(args.summary, payload)
    print(confidence_summary_table(summary), file=sys.stderr)
    return EXIT_OK


def cmd_sweep_map(args: argparse.Namespace) -> int:
    config = _config(args)
    ratios = config.get("map_ratios") or DEFAULT_MAP_RATIOS
    backgrounds = config.get("map_backgrounds") or [0.0, 0.05, 0.1, 0.2, 0.3, 0.5]
    with profiler("sweep_map.json"):
        result = background_error_sweep(
            ratios,
            backgrounds,
            config.optics(),
            config.get("acquisition_time"),
            config.seed,
            pair=config.pair(),
            options=config.fit_options(),
        )
    meta = _meta(args, config)
    for key in ("ratio_error", "background_error", "chi2"):
        write_matrix(suffixed(args.out, key), result.to_frame(key), meta=meta)
    return EXIT_OK


def cmd_g2_map(args: argparse.Namespace) -> int:
    config = _config(args)
    emitters = args.emitters if args.emitters is not None else config.get("emitters")
    n_columns, n_rows = args.grid if args.grid is not None else config.get("grid")
    columns = np.round(np.linspace(0.0, 1.0, n_columns), 12)
    rows = np.round(np.linspace(0.0, 1.0, n_rows), 12)
    meta = _meta(args, config)

    if emitters == 2:
        result = g2_map_two(columns, rows)
        write_matrix(args.out, result.to_frame(), meta=meta)
        contour = pd.DataFrame({"p2_over_p1": columns, "npgamma_over_p1": np.asarray(g2_contour_two(columns))})
        write_frame(suffixed(args.out, "contour"), contour, meta=meta)
    else:
        result = g2_map_three(columns, rows)
        write_matrix(args.out, result.to_frame(), meta=meta)
    logger.info(f"Wrote {emitters}-emitter g2 map ({n_rows}x{n_columns}) to {args.out}")
    return EXIT_OK


def cmd_odmr(args: argparse.Namespace) -> int:
    config = _config(args)
    odmr_config = config.odmr_config()
    result = spectrum(config.odmr_emitters(), odmr_config)
    photons = config.get("photons_per_point")
    if photons is not None:
        result = add_odmr_noise(result, photons, config.seed)
    write_frame(args.out, result.to_frame(), meta=_meta(args, config))
    logger.info(f"ODMR resonances (GHz): {', '.join(f'{r.frequency:.6f}' for r in result.resonances)}")
    return EXIT_OK


def _grid(value: str) -> tuple[int, int]:
    parts = value.lower().split("x")
    try:
        columns, rows = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a grid like 101x101, got {value!r}")
    if columns < 2 or rows < 2:
        raise argparse.ArgumentTypeError(f"grid sizes must be at least 2, got {value!r}")
    return columns, rows


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise InputValidationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="JSON run configuration")
    common.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="Override one config key (repeatable)"
    )
    common.add_argument("--seed", type=int, default=None, help="Seed for every randomized step (default 0)")
    common.add_argument("--threads", type=int, default=None, help="Maximum number of worker processes")
    common.add_argument("--no-meta", action="store_true", help="Omit the provenance/timestamp line from outputs")
    common.add_argument("--log-level", default=None, help="Log level (default from LOGURU_LEVEL, else INFO)")

    parser = _Parser(prog="nvpolar", description=__doc__)
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser("simulate", parents=[common], help="Generate a polarization sweep")
    simulate.add_argument("--out", required=True, help="Output sweep CSV")
    simulate.add_argument("--noiseless", action="store_true", help="Expected counts instead of Poisson samples")
    simulate.add_argument(
        "--orientation-curves", action="store_true", help="Per-dipole detection curves of the four orientations"
    )
    simulate.add_argument("--beta", type=float, default=None, help="Dipole rotation about the NV axis, degrees")
    simulate.set_defaults(func=cmd_simulate)

    fit = subparsers.add_parser("fit", parents=[common], help="Fit all orientation hypotheses to a sweep CSV")
    fit.add_argument("input", help="Sweep CSV with header angle_deg,intensity,g2,g2_err")
    fit.add_argument("--out", default=None, help="Report JSON (stdout when omitted)")
    fit.add_argument("--curves", default=None, help="Also write measured and best-fit curves to this CSV")
    fit.add_argument("--landscape", default=None, help="Also write the chi2 landscape of the best class to this CSV")
    fit.set_defaults(func=cmd_fit)

    confidence = subparsers.add_parser("confidence", parents=[common], help="Monte Carlo parameter uncertainty")
    confidence.add_argument("--out", required=True, help="Per-trial CSV, or the t_min matrix with --min-time")
    confidence.add_argument("--summary", default=None, help="Also write the summary JSON here")
    confidence.add_argument(
        "--min-time", action="store_true", help="Minimum acquisition time over map_ratios x map_backgrounds"
    )
    confidence.set_defaults(func=cmd_confidence)

    sweep_map = subparsers.add_parser("sweep-map", parents=[common], help="Fit errors versus background and ratio")
    sweep_map.add_argument("--out", required=True, help="Output prefix; writes _ratio_error, _background_error, _chi2")
    sweep_map.set_defaults(func=cmd_sweep_map)

    g2_map = subparsers.add_parser("g2-map", parents=[common], help="g2 maps of two or three emitters")
    g2_map.add_argument("--out", required=True, help="Output matrix CSV")
    g2_map.add_argument("--emitters", type=int, choices=[2, 3], default=None)
    g2_map.add_argument("--grid", type=_grid, default=None, help="COLUMNSxROWS, e.g. 101x101")
    g2_map.set_defaults(func=cmd_g2_map)

    odmr = subparsers.add_parser("odmr", parents=[common], help="ODMR spectrum of the configured NVs")
    odmr.add_argument("--out", required=True, help="Output CSV of frequency_ghz,normalized_pl")
    odmr.set_defaults(func=cmd_odmr)

    return parser


def _configure_runner(threads: int | None) -> None:
    if threads is None:
        return
    if threads < 1:
        raise InputValidationError(f"--threads must be at least 1, got {threads}")
    try:
        if threads == 1:
            context.set_runner_py()
        else:
            context.set_runner_parallel(threads)
    except RuntimeError:
        logger.warning("Runner already configured for this process, ignoring --threads")


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.log_level:
            setup_logger(args.log_level.upper())
        func: Callable[[argparse.Namespace], int] = args.func
        _configure_runner(args.threads)
        return func(args)
    except (InputValidationError, DomainError) as e:
        logger.error(str(e))
        return EXIT_INPUT
    except ConvergenceError as e:
        logger.error(str(e))
        return EXIT_NUMERICAL
    except OSError as e:
        logger.error(f"File system error: {e}")
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())
