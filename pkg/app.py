"""Command-line entry point for the ablatron loading simulator."""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from config.config import load_config
from src.harness.calibration import calibrate_yield, depth_scan
from src.harness.fitting import fit_saturation, fit_threshold
from src.harness.persistence import read_csv, report, write_run
from src.harness.scenario import DEFAULT_OUTPUTS, Output, Scenario, run_scenario
from src.harness.sweep import build_sweep_scenarios, parse_vary, run_sweep, write_sweep_csv
from src.utils import derive_rng
from src.utils.errors import AblatronError, MalformedDocumentError
from src.utils.logging import get_logger
from src.utils.units import from_mj_per_cm2, parse_quantity

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3


def _fluence(text: str) -> float:
    """Fluence argument in J/m²; a bare number is read as mJ/cm²."""
    try:
        return from_mj_per_cm2(float(text))
    except ValueError:
        return parse_quantity(text, "fluence")


def _outputs(text: Optional[str]) -> frozenset:
    if not text:
        return DEFAULT_OUTPUTS
    try:
        return frozenset(Output(name.strip()) for name in text.split(",") if name.strip())
    except ValueError as e:
        raise MalformedDocumentError("outputs", str(e)) from e


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    name = args.name or Path(args.config).stem
    outputs = _outputs(args.outputs)
    result = run_scenario(Scenario(name, cfg, outputs))
    depth_rows = None
    if args.depth_scan or Output.DEPTH_SCAN in outputs:
        variation = parse_vary(f"fluence={args.depth_scan or '120 mJ/cm2:1000 mJ/cm2:10'}")
        depth_rows = depth_scan(cfg, variation.values, args.pulses,
                                rng=derive_rng(cfg.rng_seed, "depth"), noise=args.depth_noise)
    run_dir = write_run(result, args.out or Path("runs") / name, depth_rows)
    print(report(run_dir))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    variations = [parse_vary(text) for text in args.vary]
    scenarios = build_sweep_scenarios(cfg, variations, prefix=args.name or Path(args.config).stem,
                                      outputs=_outputs(args.outputs))
    out = Path(args.out or Path("runs") / "sweep")
    results = run_sweep(scenarios, workers=args.workers, run_root=str(out))
    path = write_sweep_csv(out / "sweep.csv", variations, scenarios, results)
    print(f"{len(results)} scenarios written to {path}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    scale = calibrate_yield(args.target_rate, _fluence(args.fluence),
                            parse_quantity(args.rep_rate, "rep_rate"), cfg,
                            rtol=args.rtol, on_time=args.on_time)
    print(f"yield_scale = {scale!r}")
    return EXIT_OK


def cmd_fit(args) -> int:
    _, rows = read_csv(Path(args.csv))
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise MalformedDocumentError(args.csv, "need at least two numeric columns")
    if args.kind == "threshold":
        n_pulses = data[:, 2] if data.shape[1] > 2 else 1
        result = fit_threshold(data[:, :2], n_pulses=n_pulses)
    else:
        result = fit_saturation(data[:, :2])
    for key, value in result.parameters.items():
        print(f"{key} = {value!r}")
    print(f"residual_norm = {result.residual_norm!r}")
    for key, value in result.covariance_diagonal.items():
        print(f"var_{key} = {value!r}")
    if result.unidentifiable:
        print("warning: parameters unidentifiable from these points")
    return EXIT_OK


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    if not (run_dir / "manifest.txt").exists():
        raise MalformedDocumentError(str(run_dir), "not a run directory (manifest.txt missing)")
    print(report(run_dir))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ablatron", description="Laser-ablation ion trap loading simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run one scenario")
    simulate.add_argument("config")
    simulate.add_argument("--out", help="run directory (default runs/<name>)")
    simulate.add_argument("--name")
    simulate.add_argument("--outputs", help="comma-separated: " + ",".join(o.value for o in Output))
    simulate.add_argument("--depth-scan", help="fluence range lo:hi:n for depth_scan.csv")
    simulate.add_argument("--pulses", type=int, default=4_600_000, help="pulses per depth-scan point")
    simulate.add_argument("--depth-noise", type=float, default=0.0)
    simulate.set_defaults(handler=cmd_simulate)

    sweep = sub.add_parser("sweep", help="run a parameter grid")
    sweep.add_argument("config")
    sweep.add_argument("--vary", action="append", required=True, help="section.key=lo:hi:n")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--out")
    sweep.add_argument("--name")
    sweep.add_argument("--outputs")
    sweep.set_defaults(handler=cmd_sweep)

    calibrate = sub.add_parser("calibrate", help="fit yield_scale to a loading rate")
    calibrate.add_argument("--target-rate", type=float, required=True, help="ions/s")
    calibrate.add_argument("--fluence", required=True, help="mJ/cm2, or a unit-suffixed quantity")
    calibrate.add_argument("--rep-rate", required=True, help="Hz, or e.g. '25 kHz'")
    calibrate.add_argument("--config")
    calibrate.add_argument("--rtol", type=float, default=0.01)
    calibrate.add_argument("--on-time", type=float, default=20.0)
    calibrate.set_defaults(handler=cmd_calibrate)

    fit = sub.add_parser("fit", help="fit a depth scan or saturation curve")
    fit.add_argument("kind", choices=["threshold", "saturation"])
    fit.add_argument("csv")
    fit.set_defaults(handler=cmd_fit)

    rep = sub.add_parser("report", help="summarize a run directory")
    rep.add_argument("run_dir")
    rep.set_defaults(handler=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except AblatronError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, ValueError) as e:
        logger.error(f"Command failed: {e}", {"command": args.command})
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
