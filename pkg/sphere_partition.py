#!/usr/bin/env python3
"""
Equal-Area Sphere Partitions - Command Line Pipeline

Compute the diameter-bound constants, solve for equal-area Laguerre
partitions of S^{n-1}, verify their diameter bounds, estimate sliced
transport distances with the partition as quadrature, and run the
max-diameter scaling experiment.

Usage:
    python sphere_partition.py constants --n 3 --p 2
    python sphere_partition.py solve --n 3 --p 2 --L 64 --out runs/weights.json
    python sphere_partition.py partition --weights runs/weights.json --out runs/partition.json
    python sphere_partition.py verify --partition runs/partition.json --out runs/report.json
    python sphere_partition.py sliced --mu1 a.csv --mu2 b.csv --p 2 --q inf --partition runs/partition.json
    python sphere_partition.py scaling --n 3 --p 2 --trials 10 --threads 4
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional

from spherepart.constants import constants_for, constants_report
from spherepart.experiments import (
    DEFAULT_BOOTSTRAP,
    DEFAULT_L_GRID,
    DEFAULT_TRIALS,
    report as write_scaling_report,
    scaling_experiment,
)
from spherepart.geometry import SpherePartError, SphereSample, icosahedron_directions, sample_uniform
from spherepart.io import (
    load_config,
    load_partition,
    load_weights,
    save_partition,
    save_weights,
    write_json,
)
from spherepart.logger import set_console_level, setup_logger
from spherepart.mk1d import EmpiricalMeasure
from spherepart.parallel import set_default_threads
from spherepart.partition import partition_from_weights, verify_bound
from spherepart.sliced import parse_q, sliced_mk_dense, sliced_mk_partition
from spherepart.transport import DEFAULT_MAX_ITER, CostKind, mk_distance, solve_dual

logger = setup_logger(__name__)

DEFAULT_SEED = 0
DEFAULT_THREADS = 1
DEFAULT_OUT_DIR = './runs'
DEFAULT_LOG_LEVEL = 'INFO'
DEFAULT_N = 3
DEFAULT_P = 2.0
DEFAULT_L = 64
DEFAULT_COST = 'intrinsic'
DEFAULT_QUAD = 200_000
DEFAULT_TOL = 5e-3
DEFAULT_SCALING_QUAD = 50_000
DEFAULT_Q = '2'
DEFAULT_DENSE = 0

# Stream keys for the CLI's own random draws
DIRECTIONS_STREAM = 11
QUAD_STREAM = 12

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BOUND_FAILED = 2


def _setting(args: argparse.Namespace, config: Dict, section: str, key: str, default: Any) -> Any:
    """CLI flag, then config section, then the module default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config.get(section, {}) and config[section][key] is not None:
        return config[section][key]
    return default


def _log_configuration(settings: Dict[str, Any]) -> None:
    logger.info("")
    logger.info("Configuration:")
    width = max(len(k) for k in settings) + 2
    for key, value in settings.items():
        logger.info(f"  {key + ':':<{width}} {value}")
    logger.info("")


def _out_path(explicit: Optional[str], out_dir: Path, name: str) -> Path:
    return Path(explicit) if explicit else out_dir / name


def cmd_constants(args, config, out_dir) -> int:
    n = int(_setting(args, config, 'constants', 'n', DEFAULT_N))
    p = float(_setting(args, config, 'constants', 'p', DEFAULT_P))
    _log_configuration({'n': n, 'p': p})

    data = constants_report(n, p)
    intrinsic, extrinsic = data['intrinsic'], data['extrinsic']
    logger.info(f"Intrinsic: I_p={intrinsic['I_p']}, a_p={intrinsic['a_p']:.10g}, "
                f"alpha printed={intrinsic['alpha_np']:.6g}, normalized={intrinsic['alpha_np_normalized']:.6g}")
    logger.info(f"Extrinsic: J_p={extrinsic['J_p']}, b_p={extrinsic['b_p']:.10g}, "
                f"prefactor printed={extrinsic['prefactor_printed']:.6g}, "
                f"normalized={extrinsic['prefactor_normalized']:.6g}")
    if intrinsic['normalization_factor'] < 1.0:
        logger.warning(f"⚠ |S^{n - 1}| < 1: normalized prefactor is below the printed one")

    out = _out_path(args.out, out_dir, 'constants.json')
    write_json(data, out)
    print(out.read_text(), end='')
    logger.info(f"✓ Saved constants: {out}")
    return EXIT_OK


def _directions(source: str, n: int, L: int, seed: int):
    if source == 'random':
        return sample_uniform(n, L, seed, stream=(DIRECTIONS_STREAM,)).points
    if source == 'icosahedron':
        if n != 3:
            raise ValueError(f"Icosahedral directions live on S^2 (n=3), got n={n}")
        return icosahedron_directions()
    sample = SphereSample.from_csv(Path(source))
    if sample.n != n:
        raise ValueError(f"Directions file {source} has n={sample.n}, expected {n}")
    return sample.points


def cmd_solve(args, config, out_dir) -> int:
    section = 'solve'
    n = int(_setting(args, config, section, 'n', DEFAULT_N))
    p = float(_setting(args, config, section, 'p', DEFAULT_P))
    L = int(_setting(args, config, section, 'L', DEFAULT_L))
    cost = _setting(args, config, section, 'cost', DEFAULT_COST)
    quad_size = int(_setting(args, config, section, 'quad', DEFAULT_QUAD))
    tol = float(_setting(args, config, section, 'tol', DEFAULT_TOL))
    max_iter = int(_setting(args, config, section, 'max_iter', DEFAULT_MAX_ITER))
    source = _setting(args, config, section, 'directions', 'random')
    seed = args.seed_value
    out = _out_path(args.out, out_dir, 'weights.json')

    directions = _directions(source, n, L, seed)
    _log_configuration({
        'n': n, 'p': p, 'L': directions.shape[0], 'cost': cost, 'quad': quad_size,
        'tol': tol, 'max_iter': max_iter, 'directions': source, 'seed': seed, 'out': out,
    })

    quad = sample_uniform(n, quad_size, seed, stream=(QUAD_STREAM,))
    weights, report = solve_dual(directions, CostKind(cost, p), quad, tol, max_iter=max_iter)
    save_weights(weights, report, out)
    logger.info(f"MK_p estimate: {mk_distance(report, p):.10g}")
    logger.info(f"✓ Saved weights: {out}")
    return EXIT_OK


def cmd_partition(args, config, out_dir) -> int:
    weights, report = load_weights(Path(args.weights))
    out = _out_path(args.out, out_dir, 'partition.json')
    _log_configuration({'weights': args.weights, 'L': weights.L, 'n': weights.n,
                        'cost': weights.cost_kind.name, 'p': weights.cost_kind.p, 'out': out})

    if report.quad_seed < 0:
        logger.error("Weights were solved on a quadrature without a seed; cannot regenerate it")
        return EXIT_ERROR
    quad = sample_uniform(weights.n, report.quadrature_size, report.quad_seed, stream=report.quad_stream)
    part = partition_from_weights(weights, report, quad)
    save_partition(part, out)
    logger.info(f"✓ Saved partition: {out}")
    return EXIT_OK


def cmd_verify(args, config, out_dir) -> int:
    part = load_partition(Path(args.partition))
    kind = part.cost_kind
    mk_value = args.mk if args.mk is not None else mk_distance(part.report, kind.p)
    out = _out_path(args.out, out_dir, 'report.json')
    _log_configuration({'partition': args.partition, 'L': part.L, 'n': part.n, 'cost': kind.name,
                        'p': kind.p, 'mk': mk_value, 'out': out})

    consts = constants_for(kind.name, part.n, kind.p)
    bound = verify_bound(part, consts, mk_value)
    write_json(bound.to_dict(), out)

    logger.info("")
    logger.info("Bound check:")
    logger.info(f"  Max diameter (geodesic):   {bound.max_diam_geodesic:.6g}")
    logger.info(f"  Max diameter (Euclidean):  {bound.max_diam_euclidean:.6g}")
    logger.info(f"  Bound (printed):           {bound.bound_printed:.6g}  -> {'✓' if bound.satisfied_printed else '✗'}")
    logger.info(f"  Bound (normalized):        {bound.bound_normalized:.6g}  -> {'✓' if bound.satisfied_normalized else '✗'}")
    logger.info(f"  Max radius / sharp bound:  {bound.max_radius:.6g} / {bound.radius_bound_sharp:.6g}")
    logger.info(f"✓ Saved report: {out}")

    if not bound.passed:
        logger.error("❌ Diameter bound verification FAILED")
        return EXIT_OK if args.report_only else EXIT_BOUND_FAILED
    return EXIT_OK


def cmd_sliced(args, config, out_dir) -> int:
    section = 'sliced'
    p = float(_setting(args, config, section, 'p', DEFAULT_P))
    q = parse_q(str(_setting(args, config, section, 'q', DEFAULT_Q)))
    dense = int(_setting(args, config, section, 'dense', DEFAULT_DENSE))
    weighting = _setting(args, config, section, 'weighting', 'equal')
    out = _out_path(args.out, out_dir, 'sliced.json')
    if args.partition is None and dense < 1:
        logger.error("Give --partition, --dense N, or both")
        return EXIT_ERROR

    mu1 = EmpiricalMeasure.from_csv(Path(args.mu1))
    mu2 = EmpiricalMeasure.from_csv(Path(args.mu2))
    _log_configuration({'mu1': f"{args.mu1} ({mu1.m} atoms)", 'mu2': f"{args.mu2} ({mu2.m} atoms)",
                        'p': p, 'q': q, 'partition': args.partition, 'dense': dense,
                        'weighting': weighting, 'seed': args.seed_value, 'out': out})

    result: Dict[str, Any] = {}
    estimate = None
    if args.partition is not None:
        part = load_partition(Path(args.partition))
        estimate = sliced_mk_partition(mu1, mu2, part, p, q, weighting=weighting)
        result['partition'] = estimate.to_dict(include_directions=args.per_direction)
    if dense >= 1:
        reference = sliced_mk_dense(mu1, mu2, p, q, dense, args.seed_value)
        result['dense'] = reference.to_dict(include_directions=args.per_direction)
        if estimate is not None and estimate.certificate is not None:
            noise = 3.0 * (reference.mc_standard_error or 0.0)
            gap = abs(estimate.value - reference.value)
            result['agreement'] = {'gap': gap, 'allowed': estimate.certificate + noise,
                                   'within': bool(gap <= estimate.certificate + noise)}
            if not result['agreement']['within']:
                logger.warning(f"⚠ Partition and dense estimates differ by {gap:.4g}, "
                               f"above certificate + 3 SE = {estimate.certificate + noise:.4g}")

    write_json(result, out)
    logger.info(f"✓ Saved sliced estimate: {out}")
    return EXIT_OK


def cmd_scaling(args, config, out_dir) -> int:
    section = 'scaling'
    n = int(_setting(args, config, section, 'n', DEFAULT_N))
    p = float(_setting(args, config, section, 'p', DEFAULT_P))
    grid = [int(L) for L in _setting(args, config, section, 'grid', list(DEFAULT_L_GRID))]
    trials = int(_setting(args, config, section, 'trials', DEFAULT_TRIALS))
    quad_size = int(_setting(args, config, section, 'quad', DEFAULT_SCALING_QUAD))
    tol = float(_setting(args, config, section, 'tol', DEFAULT_TOL))
    cost = _setting(args, config, section, 'cost', DEFAULT_COST)
    n_bootstrap = int(_setting(args, config, section, 'bootstrap', DEFAULT_BOOTSTRAP))
    _log_configuration({'n': n, 'p': p, 'grid': grid, 'trials': trials, 'quad': quad_size,
                        'tol': tol, 'cost': cost, 'bootstrap': n_bootstrap,
                        'seed': args.seed_value, 'threads': args.threads_value, 'out_dir': out_dir})

    run = scaling_experiment(n, p, grid, trials, quad_size, args.seed_value, tol=tol, cost=cost,
                             n_bootstrap=n_bootstrap, threads=args.threads_value)
    write_scaling_report(run, out_dir)
    if run.failed_trials or not run.slope_within_bound:
        logger.error("❌ Scaling check FAILED")
        return EXIT_OK if args.report_only else EXIT_BOUND_FAILED
    return EXIT_OK


COMMANDS = {
    'constants': cmd_constants,
    'solve': cmd_solve,
    'partition': cmd_partition,
    'verify': cmd_verify,
    'sliced': cmd_sliced,
    'scaling': cmd_scaling,
}


def _common_flags(suppress: bool) -> argparse.ArgumentParser:
    """Global flags; subcommand copies use SUPPRESS so they never clobber values given earlier."""
    default = argparse.SUPPRESS if suppress else None
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=default,
                        help=f'Root random seed (default: {DEFAULT_SEED})')
    common.add_argument('--threads', type=int, default=default,
                        help=f'Worker threads; results do not depend on it (default: {DEFAULT_THREADS})')
    common.add_argument('--out-dir', type=str, default=default,
                        help=f'Output directory (default: {DEFAULT_OUT_DIR})')
    common.add_argument('--config', type=str, default=default,
                        help='YAML config file (default: ./config.yaml if present)')
    common.add_argument('--log-level', type=str, default=default,
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help=f'Console log level (default: {DEFAULT_LOG_LEVEL})')
    common.add_argument('--report-only', action='store_true', default=argparse.SUPPRESS if suppress else False,
                        help='Exit 0 even when a bound check fails')
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags(suppress=True)

    parser = argparse.ArgumentParser(
        description="Equal-area sphere partitions by semi-discrete optimal transport",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        parents=[_common_flags(suppress=False)],
        epilog="""
Pipeline:
  python sphere_partition.py constants --n 3 --p 2
  python sphere_partition.py solve --L 64 --quad 200000 --tol 5e-3
  python sphere_partition.py partition --weights runs/weights.json
  python sphere_partition.py verify --partition runs/partition.json

Sliced distances:
  python sphere_partition.py sliced --mu1 a.csv --mu2 b.csv --q inf \\
      --partition runs/partition.json --dense 100000

Scaling experiment:
  python sphere_partition.py scaling --grid 8 16 32 64 128 256 --trials 10

Exit codes:
  0  success
  1  error (bad input, solver failure)
  2  a bound check failed (use --report-only to exit 0)
        """
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    p_const = subparsers.add_parser('constants', parents=[common], help='Print partition constants')
    p_const.add_argument('--n', type=int, default=None, help=f'Ambient dimension (default: {DEFAULT_N})')
    p_const.add_argument('--p', type=float, default=None, help=f'Cost exponent > 1 (default: {DEFAULT_P})')
    p_const.add_argument('--out', type=str, default=None, help='Output JSON (default: <out-dir>/constants.json)')

    p_solve = subparsers.add_parser('solve', parents=[common], help='Solve for Laguerre weights')
    p_solve.add_argument('--n', type=int, default=None, help=f'Ambient dimension (default: {DEFAULT_N})')
    p_solve.add_argument('--p', type=float, default=None, help=f'Cost exponent (default: {DEFAULT_P})')
    p_solve.add_argument('--L', type=int, default=None, help=f'Number of cells (default: {DEFAULT_L})')
    p_solve.add_argument('--cost', type=str, default=None, choices=['intrinsic', 'extrinsic'],
                         help=f'Ground cost (default: {DEFAULT_COST})')
    p_solve.add_argument('--quad', type=int, default=None, help=f'Quadrature size (default: {DEFAULT_QUAD})')
    p_solve.add_argument('--tol', type=float, default=None, help=f'Held-out mass tolerance (default: {DEFAULT_TOL})')
    p_solve.add_argument('--max-iter', dest='max_iter', type=int, default=None,
                         help=f'Iteration budget (default: {DEFAULT_MAX_ITER})')
    p_solve.add_argument('--directions', type=str, default=None,
                         help="'random', 'icosahedron' or a CSV of x0..x{n-1} (default: random)")
    p_solve.add_argument('--out', type=str, default=None, help='Output JSON (default: <out-dir>/weights.json)')

    p_part = subparsers.add_parser('partition', parents=[common], help='Assign quadrature points to cells')
    p_part.add_argument('--weights', type=str, required=True, help='weights.json from solve')
    p_part.add_argument('--out', type=str, default=None, help='Output JSON (default: <out-dir>/partition.json)')

    p_verify = subparsers.add_parser('verify', parents=[common], help='Check the diameter bound')
    p_verify.add_argument('--partition', type=str, required=True, help='partition.json')
    p_verify.add_argument('--mk', type=float, default=None,
                          help="MK_p value (default: the partition solve's own estimate)")
    p_verify.add_argument('--out', type=str, default=None, help='Output JSON (default: <out-dir>/report.json)')

    p_sliced = subparsers.add_parser('sliced', parents=[common], help='Sliced transport distance')
    p_sliced.add_argument('--mu1', type=str, required=True, help='CSV of x0.. columns and optional mass')
    p_sliced.add_argument('--mu2', type=str, required=True, help='CSV of x0.. columns and optional mass')
    p_sliced.add_argument('--p', type=float, default=None, help=f'Inner exponent (default: {DEFAULT_P})')
    p_sliced.add_argument('--q', type=str, default=None, help=f"Outer exponent or 'inf' (default: {DEFAULT_Q})")
    p_sliced.add_argument('--partition', type=str, default=None, help='partition.json used as quadrature')
    p_sliced.add_argument('--dense', type=int, default=None, help='Random directions for the reference estimate')
    p_sliced.add_argument('--weighting', type=str, default=None, choices=['equal', 'realized'],
                          help='Cell weights (default: equal)')
    p_sliced.add_argument('--per-direction', dest='per_direction', action='store_true',
                          help='Include per-direction distances in the output')
    p_sliced.add_argument('--out', type=str, default=None, help='Output JSON (default: <out-dir>/sliced.json)')

    p_scaling = subparsers.add_parser('scaling', parents=[common], help='Max-diameter scaling experiment')
    p_scaling.add_argument('--n', type=int, default=None, help=f'Ambient dimension (default: {DEFAULT_N})')
    p_scaling.add_argument('--p', type=float, default=None, help=f'Cost exponent (default: {DEFAULT_P})')
    p_scaling.add_argument('--grid', type=int, nargs='+', default=None,
                           help=f'L values (default: {" ".join(map(str, DEFAULT_L_GRID))})')
    p_scaling.add_argument('--trials', type=int, default=None, help=f'Trials per L (default: {DEFAULT_TRIALS})')
    p_scaling.add_argument('--quad', type=int, default=None,
                           help=f'Quadrature size per build (default: {DEFAULT_SCALING_QUAD})')
    p_scaling.add_argument('--tol', type=float, default=None, help=f'Mass tolerance (default: {DEFAULT_TOL})')
    p_scaling.add_argument('--cost', type=str, default=None, choices=['intrinsic', 'extrinsic'],
                           help=f'Ground cost (default: {DEFAULT_COST})')
    p_scaling.add_argument('--bootstrap', type=int, default=None,
                           help=f'Bootstrap resamples for the slope band (default: {DEFAULT_BOOTSTRAP})')
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = load_config(Path(args.config) if args.config else None)
    except (OSError, ValueError) as e:
        logger.error(f"Cannot read config: {e}")
        return EXIT_ERROR
    general = config.get('global', {}) or {}

    def global_setting(key: str, default: Any) -> Any:
        value = getattr(args, key)
        if value is not None:
            return value
        return general.get(key, default) if general.get(key) is not None else default

    level = str(global_setting('log_level', DEFAULT_LOG_LEVEL)).upper()
    set_console_level(getattr(logging, level, logging.INFO))
    args.seed_value = int(global_setting('seed', DEFAULT_SEED))
    args.threads_value = int(global_setting('threads', DEFAULT_THREADS))
    out_dir = Path(global_setting('out_dir', DEFAULT_OUT_DIR))

    logger.info("=" * 70)
    logger.info(f"spherepart - {args.command}")
    logger.info("=" * 70)

    try:
        set_default_threads(args.threads_value)
        code = COMMANDS[args.command](args, config, out_dir)
    except (SpherePartError, ValueError, FileNotFoundError) as e:
        logger.error(f"❌ {args.command} failed: {e}")
        return EXIT_ERROR
    except Exception as e:
        logger.error(f"❌ {args.command} failed: {e}", exc_info=True)
        return EXIT_ERROR

    logger.info("=" * 70)
    logger.info(f"✓ {args.command} complete (exit code {code})")
    logger.info("=" * 70)
    return code


if __name__ == '__main__':
    sys.exit(main())
