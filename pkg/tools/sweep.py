"""
Delivery sweep over link loss and QoS.

Runs the fleet simulation for every (drop probability, QoS, seed) combination
and reports how many generated readings reached the store.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from cli.output import write_output
from fleet import SimConfig, default_scenario, load_scenario, run_sim

logger = logging.getLogger(__name__)


def run_trial(cfg: SimConfig) -> dict[str, Any]:
    """One simulation, reduced to the numbers the sweep reports."""
    start = time.perf_counter()
    report = run_sim(cfg)
    totals = report.totals
    return {
        'drop_probability': cfg.drop_probability,
        'qos': cfg.qos,
        'seed': cfg.seed,
        'generated': totals['generated'],
        'stored': totals['stored'],
        'delivery_fraction': totals['delivery_fraction'],
        'complete_rides': totals['complete_rides'],
        'rides': totals['rides'],
        'duplicates': totals['duplicates'],
        'header_violations': totals['header_violations'],
        'retransmissions': sum(d['retransmissions'] for d in report.devices),
        'elapsed_seconds': time.perf_counter() - start,
    }


class SweepRunner:
    """
    Runs a grid of simulations derived from one base scenario.

    Attributes:
        base (SimConfig): Scenario every trial starts from.
        workers (int): Processes to use; 1 runs trials in this process.
    """

    def __init__(self, base: SimConfig, workers: int = 1) -> None:
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.base = base
        self.workers = workers

    def configurations(
        self, drop_probabilities: list[float], qos_levels: list[int], seeds: list[int]
    ) -> list[SimConfig]:
        """Every combination, in (drop, qos, seed) order."""
        return [
            replace(self.base, drop_probability=p, qos=q, seed=s)
            for p in drop_probabilities
            for q in qos_levels
            for s in seeds
        ]

    def run(
        self, drop_probabilities: list[float], qos_levels: list[int], seeds: list[int]
    ) -> dict[str, Any]:
        """
        Run the grid and summarize each (drop, qos) cell over its seeds.

        Returns:
            dict[str, Any]: 'trials' (one row per run) and 'cells' (means per
            drop/QoS pair); identical arguments give identical rows apart from
            elapsed_seconds.
        """
        configs = self.configurations(drop_probabilities, qos_levels, seeds)
        if self.workers == 1:
            trials = [run_trial(cfg) for cfg in configs]
        else:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                trials = list(pool.map(run_trial, configs))

        cells: list[dict[str, Any]] = []
        for p in drop_probabilities:
            for q in qos_levels:
                rows = [t for t in trials if t['drop_probability'] == p and t['qos'] == q]
                fractions = np.array([t['delivery_fraction'] for t in rows], dtype=float)
                cells.append({
                    'drop_probability': p,
                    'qos': q,
                    'runs': len(rows),
                    'mean_delivery_fraction': float(fractions.mean()),
                    'min_delivery_fraction': float(fractions.min()),
                    'mean_complete_rides': float(np.mean([t['complete_rides'] for t in rows])),
                    'mean_retransmissions': float(np.mean([t['retransmissions'] for t in rows])),
                })
        logger.info("sweep finished: %d trials", len(trials))
        return {'trials': trials, 'cells': cells}


def print_summary(results: dict[str, Any]) -> None:
    print("=" * 64)
    print(f"{'drop':>6}{'qos':>5}{'runs':>6}{'delivered':>12}{'worst':>10}{'retx':>10}")
    print("=" * 64)
    for cell in results['cells']:
        print(
            f"{cell['drop_probability']:>6.2f}{cell['qos']:>5}{cell['runs']:>6}"
            f"{cell['mean_delivery_fraction']:>12.1%}{cell['min_delivery_fraction']:>10.1%}"
            f"{cell['mean_retransmissions']:>10.1f}"
        )


def main(argv: list[str] | None = None) -> int:
    """Main entry point for the sweep script."""
    parser = argparse.ArgumentParser(description="Sweep delivery over link loss and QoS")
    parser.add_argument('--scenario', help='Base scenario JSON (default: built-in scenario)')
    parser.add_argument(
        '-p', '--drop', type=float, nargs='+', default=[0.0, 0.1, 0.2, 0.4],
        help='Drop probabilities (default: 0 0.1 0.2 0.4)',
    )
    parser.add_argument(
        '-q', '--qos', type=int, nargs='+', choices=[0, 1], default=[0, 1],
        help='QoS levels (default: 0 1)',
    )
    parser.add_argument(
        '-s', '--seeds', type=int, nargs='+', default=[1, 2, 3],
        help='Scenario seeds per cell (default: 1 2 3)',
    )
    parser.add_argument('-w', '--workers', type=int, default=1, help='Worker processes')
    parser.add_argument(
        '-o', '--output', default='sweep_results.json',
        help='Output JSON file, or - for stdout (default: sweep_results.json)',
    )
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )

    if any(not 0.0 <= p < 1.0 for p in args.drop):
        parser.error("drop probabilities must be in [0, 1)")
    base = load_scenario(args.scenario) if args.scenario else default_scenario()
    results = SweepRunner(base, workers=args.workers).run(args.drop, args.qos, args.seeds)
    write_output(args.output, json.dumps(results, indent=2) + "\n")
    if args.output != '-':
        print_summary(results)
        print(f"\nResults saved to {args.output}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
