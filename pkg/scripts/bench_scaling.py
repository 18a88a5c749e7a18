#!/usr/bin/env python3
"""Acquisition time against pool size, with the per-doubling ratios.

    python scripts/bench_scaling.py --pool-sizes 1000,2000,4000,8000,16000
"""

import argparse

from batchbald.bench import BENCH_COLUMNS, doubling_ratios, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pool-sizes", default="2000,4000,8000")
    ap.add_argument("--strategies", default="batchbald,bald")
    ap.add_argument("--b", type=int, default=4)
    ap.add_argument("--c", type=int, default=4)
    ap.add_argument("--k", type=int, default=32)
    ap.add_argument("--m", type=int, default=1000)
    ap.add_argument("--exact-limit", type=int, default=10_000)
    ap.add_argument("--repeats", type=int, default=10)
    args = ap.parse_args()

    sizes = [int(n) for n in args.pool_sizes.split(",")]
    print("strategy," + ",".join(BENCH_COLUMNS))
    for strategy in args.strategies.split(","):
        rows = sweep(
            sizes, args.b, args.c, args.k, args.m,
            strategy=strategy, repeats=args.repeats, exact_limit=args.exact_limit,
        )
        for row in rows:
            print(f"{strategy},{row.csv()}")
        print(f"# {strategy} ratios per doubling: {', '.join(f'{x:.2f}' for x in doubling_ratios(rows))}")


if __name__ == "__main__":
    main()
