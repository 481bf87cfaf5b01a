#!/usr/bin/env python3
"""
Benchmark reproduction for the three continuous problems.

Runs the reported best-final hyperparameters for each algorithm that the checks
need, then compares the final-performance scores against loose bands.
"""

import argparse
import os
import sys
from typing import Dict, Tuple

# Add src to Python path for imports
script_dir = os.path.dirname(os.path.abspath(__file__))
project_root = os.path.dirname(script_dir)
sys.path.insert(0, os.path.join(project_root, 'src'))

from offpac.cli import setup_logging
from offpac.config import SweepSpec
from offpac.harness import reported_config, reported_return, run_sweep, select_best


RUNS_NEEDED = (
    ('mountain_car', 'offpac'),
    ('mountain_car', 'behavior'),
    ('gridworld', 'offpac'),
    ('gridworld', 'greedy_gq'),
    ('gridworld', 'behavior'),
    ('pendulum', 'offpac'),
)


class BenchmarkReproducer:
    """Runs the benchmark cells and checks their final scores."""

    def __init__(self, out_dir: str, num_runs: int, parallelism: int, num_episodes=None):
        self.out_dir = out_dir
        self.num_runs = num_runs
        self.parallelism = parallelism
        self.num_episodes = num_episodes
        self.scores: Dict[Tuple[str, str], float] = {}
        self.errors = []
        self.passed_tests = 0
        self.total_tests = 0

    def log_error(self, message: str) -> None:
        self.errors.append(message)
        print(f"❌ FAIL: {message}")

    def log_success(self, message: str) -> None:
        self.passed_tests += 1
        print(f"✅ PASS: {message}")

    def run_cell(self, env: str, algorithm: str) -> float:
        cfg = reported_config(env, algorithm).with_overrides(num_runs=self.num_runs,
                                                             num_episodes=self.num_episodes)
        cell_dir = os.path.join(self.out_dir, f"{env}_{algorithm}")
        paths = run_sweep(SweepSpec(cfg), cell_dir, self.parallelism)
        score = float(select_best(paths['aggregated'], 'final')['score'])
        reported = reported_return(env, algorithm)
        print(f"📊 {env}/{algorithm}: final {score:.1f} (reported {reported})")
        self.scores[(env, algorithm)] = score
        return score

    def check(self, condition: bool, message: str) -> None:
        self.total_tests += 1
        if condition:
            self.log_success(message)
        else:
            self.log_error(message)

    def run(self) -> bool:
        for env, algorithm in RUNS_NEEDED:
            self.run_cell(env, algorithm)

        s = self.scores
        print("\n🔍 Checking bands...")
        self.check(s[('mountain_car', 'offpac')] >= -250.0, "mountain car: Off-PAC final return >= -250")
        self.check(-5000.0 <= s[('mountain_car', 'behavior')] <= -4000.0,
                   "mountain car: behavior return within [-5000, -4000]")
        self.check(s[('gridworld', 'offpac')] >= -1500.0, "grid world: Off-PAC final return >= -1500")
        self.check(s[('gridworld', 'offpac')] > s[('gridworld', 'greedy_gq')],
                   "grid world: Off-PAC beats Greedy-GQ")
        self.check(s[('gridworld', 'offpac')] > s[('gridworld', 'behavior')],
                   "grid world: Off-PAC beats the behavior policy")
        self.check(s[('pendulum', 'offpac')] >= 1200.0, "pendulum: Off-PAC final return >= 1200")

        print(f"\n📋 {self.passed_tests}/{self.total_tests} checks passed")
        return not self.errors


def main() -> int:
    parser = argparse.ArgumentParser(description='Reproduce the benchmark comparison at desk scale')
    parser.add_argument('--out-dir', default='results/benchmarks', help='Output directory')
    parser.add_argument('--runs', type=int, default=5, help='Runs per cell (default: 5)')
    parser.add_argument('--episodes', type=int, help='Override training episodes per run')
    parser.add_argument('--parallelism', type=int, default=os.cpu_count() or 1,
                        help='Worker processes (default: all cores)')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], default='WARNING')
    args = parser.parse_args()

    setup_logging(args.log_level)
    reproducer = BenchmarkReproducer(args.out_dir, args.runs, args.parallelism, args.episodes)
    return 0 if reproducer.run() else 1


if __name__ == '__main__':
    sys.exit(main())
