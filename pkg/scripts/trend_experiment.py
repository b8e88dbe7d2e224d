#!/usr/bin/env python3
"""Miner-group growth experiment.

Plants a pool whose roster grows across five equal periods, recovers the
per-period miner counts by comparing its networks against a reference
pool's, and reports how closely the recovered trend tracks the plant.
"""

import argparse
import csv
import sys
from pathlib import Path

from coinflow.chain import build_spend_index
from coinflow.payout import TrendPeriod, miner_trend
from coinflow.synth import (
    PATTERN_DIRECT,
    PATTERN_IMMEDIATE,
    PoolSpec,
    SimConfig,
    generate_chain,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=9)
    parser.add_argument("--periods", type=int, default=5)
    parser.add_argument("--blocks-per-period", type=int, default=60)
    parser.add_argument("--start-miners", type=int, default=10)
    parser.add_argument("--end-miners", type=int, default=100)
    parser.add_argument("--pairs-per-period", type=int, default=5)
    parser.add_argument("--output-dir", default="trend-results")
    args = parser.parse_args()

    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    steps = [
        args.start_miners
        + round(i * (args.end_miners - args.start_miners) / (args.periods - 1))
        for i in range(args.periods)
    ]
    schedule = tuple(
        (i * args.blocks_per_period, steps[i]) for i in range(1, args.periods)
    )
    blocks = args.periods * args.blocks_per_period
    config = SimConfig(
        seed=args.seed,
        blocks=blocks,
        pools=[
            PoolSpec("grower", steps[0], PATTERN_IMMEDIATE, 0.5,
                     payout_delay=0, miner_schedule=schedule),
            PoolSpec("anchor", 150, PATTERN_DIRECT, 0.5, payout_delay=1),
        ],
    )
    store, truth = generate_chain(config)
    index = build_spend_index(store)

    periods, planted = [], []
    for p in range(args.periods):
        low, high = p * args.blocks_per_period, (p + 1) * args.blocks_per_period
        own = [store.coinbases[h] for h in range(low, high)
               if truth.blocks[h].pool == "grower"]
        refs = [store.coinbases[h] for h in range(low, high)
                if truth.blocks[h].pool == "anchor"]
        periods.append(TrendPeriod(
            f"p{p}", "grower",
            own[: args.pairs_per_period], refs[: args.pairs_per_period],
        ))
        planted.append(len(truth.miners_for("grower", low)))

    points = miner_trend(store, index, periods, max_pairs=args.pairs_per_period)

    with open(out / "trend.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "pool", "planted", "recovered", "blocks"])
        for point, want in zip(points, planted):
            writer.writerow([point.period, point.pool, want,
                             point.miner_count, point.blocks])

    print(f"{'period':<8}{'planted':>9}{'recovered':>11}{'error':>8}")
    for point, want in zip(points, planted):
        error = (point.miner_count - want) / want
        print(f"{point.period:<8}{want:>9}{point.miner_count:>11}{error:>8.1%}")
    print(f"table: {out / 'trend.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
