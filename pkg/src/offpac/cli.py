"""
Command-line interface for Off-PAC experiments and the tabular verification suite.
"""

import argparse
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

from .config import ALGORITHMS, ExperimentConfig, SweepSpec, load_config, load_sweep
from .envs import ENV_NAMES
from .harness import (CRITERIA, RAW_FILE, emit_report, reported_config, reported_return,
                      reported_sweep, run_sweep, select_best)
from .oracle import run_verification_suite


# Flag name -> ExperimentConfig field
CONFIG_FLAGS = {
    'env': 'env', 'algorithm': 'algorithm', 'alpha_v': 'alpha_v', 'alpha_w': 'alpha_w',
    'alpha_u': 'alpha_u', 'tau': 'tau', 'lambda_': 'lam', 'gamma': 'gamma',
    'num_episodes': 'num_episodes', 'num_runs': 'num_runs', 'eval_points': 'eval_points',
    'eval_episodes': 'eval_episodes', 'max_episode_steps': 'max_episode_steps',
    'num_tilings': 'num_tilings', 'tiles_per_dim': 'tiles_per_dim', 'hash_size': 'hash_size',
    'seed': 'seed',
}


def setup_logging(level: str = "INFO") -> None:
    """Setup logging configuration."""
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format='%(asctime)s - %(levelname)s - %(message)s'
    )


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='key=value experiment file')
    parser.add_argument('--env', choices=ENV_NAMES, help='Benchmark environment')
    parser.add_argument('--algorithm', choices=ALGORITHMS, help='Learning algorithm')
    parser.add_argument('--alpha-v', type=float, help='Raw critic / action-value step size')
    parser.add_argument('--alpha-w', type=float, help='Raw auxiliary-weight step size')
    parser.add_argument('--alpha-u', type=float, help='Raw actor step size')
    parser.add_argument('--tau', type=float, help='Softmax-GQ temperature')
    parser.add_argument('--lambda', dest='lambda_', type=float, help='Trace decay')
    parser.add_argument('--gamma', type=float, help='Discount for non-terminal steps')
    parser.add_argument('--num-episodes', type=int, help='Training episodes per run')
    parser.add_argument('--num-runs', type=int, help='Independent runs per cell')
    parser.add_argument('--eval-points', type=int, help='Evaluation checkpoints per run')
    parser.add_argument('--eval-episodes', type=int, help='Episodes per evaluation')
    parser.add_argument('--max-episode-steps', type=int, help='Episode step cap')
    parser.add_argument('--num-tilings', type=int, help='Tilings in the tile coder')
    parser.add_argument('--tiles-per-dim', type=int, help='Tiles per state dimension')
    parser.add_argument('--hash-size', type=int, help='Hashed feature slots')
    parser.add_argument('--seed', type=int, help='Base seed')


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        description='Off-policy actor-critic experiments',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Off-PAC on mountain car with the reported best-final parameters, 5 runs
  %(prog)s run --env mountain_car --algorithm offpac --reported-params --num-runs 5 --out-dir results/mc

  # Parameter sweep from a key=value file (comma-separated values are swept)
  %(prog)s sweep --sweep-file sweeps/gridworld_softmax_gq.env --out-dir results/grid --parallelism 8

  # The full published grid for one algorithm
  %(prog)s sweep --reported-grid --env pendulum --algorithm offpac --out-dir results/pend

  # Learning curves and best-cell summary from a sweep
  %(prog)s report --out-dir results/grid

  # Exact checks on the tabular MDPs
  %(prog)s oracle --seed 3
        """
    )
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        default='INFO', help='Logging level (default: INFO)')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Run one configuration')
    _add_config_flags(run)
    run.add_argument('--reported-params', action='store_true',
                     help='Use the reported best hyperparameters for --env/--algorithm')
    run.add_argument('--criterion', choices=CRITERIA, default='final',
                     help='Which reported best cell --reported-params selects (default: final)')
    run.add_argument('--save-weights', action='store_true',
                     help='Save the final weights of every run under <out-dir>/weights')
    run.add_argument('--out-dir', default='results', help='Output directory (default: results)')
    run.add_argument('--parallelism', type=int, default=1, help='Worker processes (default: 1)')

    sweep = sub.add_parser('sweep', help='Run a parameter sweep')
    source = sweep.add_mutually_exclusive_group(required=True)
    source.add_argument('--sweep-file', help='key=value sweep file')
    source.add_argument('--reported-grid', action='store_true',
                        help='Sweep the published parameter grid for --env/--algorithm')
    sweep.add_argument('--env', choices=ENV_NAMES, default='mountain_car',
                       help='Environment for --reported-grid (default: mountain_car)')
    sweep.add_argument('--algorithm', choices=ALGORITHMS, default='offpac',
                       help='Algorithm for --reported-grid (default: offpac)')
    sweep.add_argument('--num-runs', type=int, help='Override the runs per cell')
    sweep.add_argument('--seed', type=int, help='Override the base seed')
    sweep.add_argument('--out-dir', default='results', help='Output directory (default: results)')
    sweep.add_argument('--parallelism', type=int, default=1, help='Worker processes (default: 1)')
    sweep.add_argument('--save-weights', action='store_true',
                       help='Save the final weights of every run under <out-dir>/weights')

    report = sub.add_parser('report', help='Aggregate a raw results CSV')
    report.add_argument('--raw', help=f'Raw results CSV (default: <out-dir>/{RAW_FILE})')
    report.add_argument('--out-dir', default='results', help='Output directory (default: results)')

    oracle = sub.add_parser('oracle', help='Tabular verification suite')
    oracle.add_argument('--seed', type=int, default=0, help='Seed (default: 0)')
    oracle.add_argument('--forward-backward-steps', type=int, default=10 ** 5,
                        help='Behavior steps per forward/backward comparison (default: 100000)')

    return parser.parse_args(argv)


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file (if any), then reported parameters, then explicit flags."""
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    env = args.env or cfg.env
    algorithm = args.algorithm or cfg.algorithm
    if getattr(args, 'reported_params', False):
        cfg = reported_config(env, algorithm, cfg, getattr(args, 'criterion', 'final'))
    overrides = {field: getattr(args, flag) for flag, field in CONFIG_FLAGS.items()}
    return cfg.with_overrides(**overrides)


def _print_best(aggregated_path: str) -> None:
    for criterion in ('final', 'overall'):
        best = select_best(aggregated_path, criterion)
        print(f"🏆 Best {criterion}: {best['algorithm']} on {best['env']} "
              f"(alpha_v={best['alpha_v_raw']}, alpha_w={best['alpha_w_raw']}, "
              f"alpha_u={best['alpha_u_raw']}, tau={best['tau']}, lambda={best['lambda']}) "
              f"score {best['score']:.2f}")


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    try:
        args = parse_arguments(argv)

        setup_logging(args.log_level)
        logger = logging.getLogger(__name__)

        if args.command == 'run':
            cfg = build_config(args)
            logger.info(f"Running {cfg.algorithm} on {cfg.env} ({cfg.num_runs} runs)")
            paths = run_sweep(SweepSpec(cfg), args.out_dir, args.parallelism,
                              save_weights=args.save_weights)
            print(f"\n✅ Run finished")
            print(f"📁 Raw results saved to {paths['raw']}")
            if args.reported_params:
                print(f"📖 Reported {args.criterion} return: "
                      f"{reported_return(cfg.env, cfg.algorithm, args.criterion):.1f}")
            if os.path.exists(paths['aggregated']):
                _print_best(paths['aggregated'])

        elif args.command == 'sweep':
            if args.reported_grid:
                spec = reported_sweep(args.env, args.algorithm)
            else:
                spec = load_sweep(args.sweep_file)
            overrides = {'seed': args.seed, 'num_runs': args.num_runs}
            spec = replace(spec, base=spec.base.with_overrides(**overrides))
            paths = run_sweep(spec, args.out_dir, args.parallelism, save_weights=args.save_weights)
            print(f"\n✅ Sweep finished: {len(spec.cells())} cells")
            for name, path in paths.items():
                print(f"📁 {name}: {path}")

        elif args.command == 'report':
            raw = args.raw or os.path.join(args.out_dir, RAW_FILE)
            curves, summary = emit_report(raw, args.out_dir)
            print(f"\n✅ Report generated")
            print(f"📁 Learning curves saved to {curves}")
            print(f"📁 Summary saved to {summary}")

        elif args.command == 'oracle':
            results = run_verification_suite(args.seed, args.forward_backward_steps)
            for result in results:
                mark = '✅' if result.passed else '❌'
                print(f"{mark} {result.name}: {result.detail}")
            failed = [r for r in results if not r.passed]
            if failed:
                print(f"\n❌ {len(failed)} of {len(results)} checks failed")
                return 1
            print(f"\n✅ All {len(results)} checks passed")

        return 0

    except KeyboardInterrupt:
        print("\n⚠️  Interrupted by user")
        return 130

    except Exception as e:
        print(f"❌ Error: {e}")
        logging.getLogger(__name__).error(f"Unhandled error: {e}", exc_info=True)
        return 1


if __name__ == '__main__':
    sys.exit(main())
