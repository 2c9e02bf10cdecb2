# app/cli.py
"""
Command-line front end.

    tomodual phantom --name disk --n 32 --out disk.pgm
    tomodual project --image disk.pgm --angles 10 --theta-max pi/2 --out disk.csv
    tomodual reconstruct --sinogram disk.csv --method dp --truth disk.pgm --out recon.pgm
    tomodual enumerate --n 3 --dirs hvd --mode verify --out table.csv
    tomodual bench --suite sparse --n 32 --out-dir results/

Flags override values from ``--config FILE`` (flat key=value lines), which
override the environment-driven settings.
"""

import argparse
import os
import sys
from typing import Any, Dict, List, Optional

from dotenv import dotenv_values

from app.config import settings
from app.models.geometry_model import Kernel
from app.models.image_model import Completion, GreyLevels
from app.models.run_model import GeometryKind, GeometrySpec, NoiseKind, NoiseSpec, RunConfig
from app.models.solver_model import SolverConfig, TvConfig
from app.services.acquisition_service import acquisition_service
from app.services.benchmark_service import DEFAULT_METHODS, benchmark_service
from app.services.enumeration_service import enumeration_service, write_summary_csv
from app.services.phantom_service import make_phantom
from app.services.reconstruction_service import reconstruction_service
from app.utils.constants import (
    BENCH_SUITES,
    EXIT_INPUT,
    EXIT_NONCONVERGED,
    EXIT_OK,
    PHANTOM_LEVELS,
    PHANTOM_NAMES,
    RECONSTRUCTION_METHODS,
)
from app.utils.io import (
    read_binary_image,
    read_sinogram_csv,
    write_binary_image,
    write_dual_report,
    write_operator_triplets,
    write_pgm,
    write_rows_csv,
    write_sinogram_csv,
)
from app.utils.logger import get_logger
from app.utils.validators import TomographyError

logger = get_logger(__name__)

METRICS_COLUMNS = ["test", "phantom", "method", "rms", "ji", "converged"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tomodual", description="Binary tomography by the dual formulation")
    parser.add_argument("--config", help="flat key=value file with default option values")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--workers", type=int, help="parallel jobs for enumerate and bench")
    parser.add_argument("--output-dir", dest="output_dir", help="directory for default output paths")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="write an analytic phantom as PGM")
    p.add_argument("--name", required=True, choices=PHANTOM_NAMES)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out")

    p = sub.add_parser("project", help="forward-project an image into a sinogram CSV")
    p.add_argument("--image", required=True)
    p.add_argument("--geometry", choices=[k.value for k in GeometryKind])
    p.add_argument("--directions", help="lattice direction letters, e.g. hvd")
    p.add_argument("--angles", type=int, help="number of equispaced angles")
    p.add_argument("--theta-max", dest="theta_max", help="angular range, e.g. pi or 7pi/12")
    p.add_argument("--detectors", type=int, help="detector cells per angle (default n)")
    p.add_argument("--spacing", type=float, help="detector spacing")
    p.add_argument("--kernel", choices=[k.value for k in Kernel], help="data kernel (default strip)")
    noise = p.add_mutually_exclusive_group()
    noise.add_argument("--snr", type=float, help="additive Gaussian noise at this SNR in dB")
    noise.add_argument("--I0", dest="I0", type=float, help="Poisson noise with this incident photon count")
    p.add_argument("--operator-out", dest="operator_out", help="also write the operator as triplets")
    p.add_argument("--out")

    p = sub.add_parser("reconstruct", help="reconstruct a binary image from a sinogram CSV")
    p.add_argument("--sinogram", required=True)
    p.add_argument("--method", choices=RECONSTRUCTION_METHODS)
    p.add_argument("--levels", help="grey levels u0,u1 (default 0,1)")
    p.add_argument("--kernel", choices=[k.value for k in Kernel], help="model kernel (default joseph)")
    p.add_argument("--truth", help="ground-truth PGM for metrics")
    p.add_argument("--lambda", dest="lam", type=float, help="fixed TV weight")
    p.add_argument("--noise-level", dest="noise_level", type=float, help="noise norm for the discrepancy principle")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--tol", type=float, help="KKT tolerance")
    p.add_argument("--zero-threshold", dest="zero_threshold", type=float)
    p.add_argument("--completion", choices=[c.value for c in Completion])
    p.add_argument("--out")
    p.add_argument("--ternary-out", dest="ternary_out")
    p.add_argument("--report-out", dest="report_out", help="dual report (objective, residual, iterations, nu)")
    p.add_argument("--metrics-out", dest="metrics_out", help="CSV to append the metrics row to")
    p.add_argument("--strict", action="store_true", default=None, help="exit 4 when the solver does not converge")

    p = sub.add_parser("enumerate", help="exhaustive enumeration of small images")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dirs", required=True, help="lattice direction letters, e.g. hv")
    p.add_argument("--mode", choices=["counts", "verify"])
    p.add_argument("--sample", type=int, help="verify only this many random classes")
    p.add_argument("--out")

    p = sub.add_parser("bench", help="benchmark sweeps against the baselines")
    p.add_argument("--suite", required=True, choices=BENCH_SUITES)
    p.add_argument("--n", type=int)
    p.add_argument("--phantoms", help="comma-separated phantom names")
    p.add_argument("--methods", help="comma-separated methods")
    p.add_argument("--out-dir", dest="out_dir")
    return parser


def merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill options not given on the command line from the ``--config`` file."""
    if not args.config:
        return args
    if not os.path.exists(args.config):
        raise FileNotFoundError(f"config file not found: {args.config}")
    for key, value in dotenv_values(args.config).items():
        dest = key.strip().lower().replace("-", "_")
        if value is None or getattr(args, dest, None) is not None:
            continue
        current = vars(args)
        if dest not in current:
            logger.warning("Ignoring unknown config key", key=key)
            continue
        setattr(args, dest, _coerce(value))
    return args


def _coerce(value: str) -> Any:
    lowered = value.strip().lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def run_config(args: argparse.Namespace, inputs: Dict[str, Optional[str]]) -> RunConfig:
    solver = SolverConfig.from_settings(
        max_iters=getattr(args, "max_iters", None),
        primal_dual_max_iters=getattr(args, "max_iters", None),
        tol_kkt=getattr(args, "tol", None),
        zero_threshold=getattr(args, "zero_threshold", None),
        completion=getattr(args, "completion", None),
        seed=args.seed,
    )
    return RunConfig(
        command=args.command,
        seed=settings.SEED if args.seed is None else args.seed,
        output_dir=args.output_dir or settings.OUTPUT_DIR,
        workers=args.workers or settings.WORKERS,
        solver=solver,
        inputs={k: v for k, v in inputs.items() if v},
        options={k: v for k, v in vars(args).items() if v is not None},
    )


def _default_path(run: RunConfig, name: str) -> str:
    return os.path.join(run.output_dir, name)


def cmd_phantom(args: argparse.Namespace) -> int:
    run = run_config(args, {})
    image = make_phantom(args.name, args.n)
    out = args.out or _default_path(run, f"{args.name}_{args.n}.pgm")
    write_binary_image(out, image, *PHANTOM_LEVELS)
    logger.info("Wrote phantom", path=out)
    return EXIT_OK


def cmd_project(args: argparse.Namespace) -> int:
    run = run_config(args, {"image": args.image})
    image = read_binary_image(args.image, *PHANTOM_LEVELS)
    spec_values: Dict[str, Any] = {"kind": GeometryKind(args.geometry or GeometryKind.PARALLEL.value), "n": image.shape[0]}
    if args.directions:
        spec_values["directions"] = args.directions
    if args.angles:
        spec_values["angle_count"] = args.angles
    if args.theta_max is not None:
        spec_values["theta_max"] = str(args.theta_max)
    if args.detectors:
        spec_values["detector_count"] = args.detectors
    if args.spacing:
        spec_values["detector_spacing"] = args.spacing
    spec_values["kernel"] = Kernel(args.kernel or Kernel.STRIP.value)
    spec = GeometrySpec(**spec_values)

    if args.snr is not None:
        noise = NoiseSpec(kind=NoiseKind.GAUSSIAN, snr_db=args.snr, seed=run.seed)
    elif args.I0 is not None:
        noise = NoiseSpec(kind=NoiseKind.POISSON, I0=args.I0, seed=run.seed)
    else:
        noise = NoiseSpec(seed=run.seed)

    sinogram, index = acquisition_service.project(image, spec, noise)
    out = args.out or _default_path(run, "sinogram.csv")
    write_sinogram_csv(out, sinogram, index)
    if args.operator_out:
        write_operator_triplets(args.operator_out, acquisition_service.build_operator(spec))
    logger.info("Wrote sinogram", path=out, rows=sinogram.size)
    return EXIT_OK


def cmd_reconstruct(args: argparse.Namespace) -> int:
    run = run_config(args, {"sinogram": args.sinogram, "truth": args.truth})
    sinogram, _ = read_sinogram_csv(args.sinogram)
    levels = GreyLevels.parse(args.levels) if args.levels else GreyLevels(u0=PHANTOM_LEVELS[0], u1=PHANTOM_LEVELS[1])
    truth = read_binary_image(args.truth, levels.u0, levels.u1) if args.truth else None
    method = args.method or "dp"
    tv_cfg = TvConfig(max_iters=args.max_iters) if args.max_iters else TvConfig()

    result = reconstruction_service.reconstruct(
        sinogram, method, levels, run.solver, truth,
        kernel=Kernel(args.kernel) if args.kernel else None,
        tv_cfg=tv_cfg, lam=args.lam, noise_level=args.noise_level,
    )
    out = args.out or _default_path(run, f"recon_{method}.pgm")
    write_binary_image(out, result.image, levels.u0, levels.u1)
    if result.ternary_codes is not None and args.ternary_out:
        write_pgm(args.ternary_out, result.ternary_codes, maxval=2)
    if args.report_out and method in ("dp", "dp-smooth"):
        if result.dual is not None:
            write_dual_report(args.report_out, result.dual)
    if args.metrics_out and result.metrics is not None:
        row = {
            "test": os.path.basename(args.sinogram),
            "phantom": os.path.basename(args.truth),
            "method": method,
            "rms": result.metrics.rms,
            "ji": result.metrics.ji,
            "converged": result.converged,
        }
        write_rows_csv(args.metrics_out, [row], METRICS_COLUMNS, append=True)
    for key, value in result.summary().items():
        print(f"{key}={value}")

    if not result.converged and args.strict:
        logger.error("Solver did not converge in strict mode", method=method)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_enumerate(args: argparse.Namespace) -> int:
    run = run_config(args, {})
    summary = enumeration_service.run(args.n, args.dirs, args.mode or "counts", run.solver,
                                      sample=args.sample, workers=run.workers)
    out = args.out or _default_path(run, f"enumeration_n{args.n}_{summary.directions}.csv")
    write_summary_csv([summary], out)
    for key, value in summary.table_row().items():
        print(f"{key}={value}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    run = run_config(args, {})
    phantoms = args.phantoms.split(",") if args.phantoms else PHANTOM_NAMES
    methods = args.methods.split(",") if args.methods else DEFAULT_METHODS
    rows = benchmark_service.run_suite(
        args.suite, n=args.n or 32, out_dir=args.out_dir or run.output_dir,
        phantoms=phantoms, methods=methods, cfg=run.solver, workers=run.workers, seed=run.seed,
    )
    failed = sum(1 for row in rows if row["status"] != "ok")
    print(f"cells={len(rows)} flagged={failed}")
    return EXIT_OK


COMMANDS = {
    "phantom": cmd_phantom,
    "project": cmd_project,
    "reconstruct": cmd_reconstruct,
    "enumerate": cmd_enumerate,
    "bench": cmd_bench,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = merge_config(args)
        return COMMANDS[args.command](args)
    except (TomographyError, ValueError, OSError) as e:
        logger.error("Command failed", command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
