#!/usr/bin/env python3
"""Repeated-pool experiment and the repetition ablation.

For each repetition count r the default scenario is run for every strategy over
a set of trial seeds. Per-round medians go to ``curves.csv``; the label budget
needed to reach a fraction of the ground-truth predictor's test accuracy goes
to ``budgets.csv``.

    python scripts/repeated_pool.py --trials 20 --repetitions 0,1,2,4 --out runs/repeated
"""

import argparse
import csv
from dataclasses import replace
from pathlib import Path

import numpy as np

from batchbald.bayes_sim import Scenario, labels_to_threshold, run_scenario
from batchbald.seeding import child_seed


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--repetitions", default="0,1,2,4")
    ap.add_argument("--strategies", default="batchbald,random,bald")
    ap.add_argument("--threshold", type=float, default=0.95, help="fraction of the ground-truth accuracy")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/repeated_pool"))
    args = ap.parse_args()

    reps = [int(r) for r in args.repetitions.split(",")]
    strategies = args.strategies.split(",")
    seeds = [child_seed(args.seed, "trial", i) for i in range(args.trials)]
    args.out.mkdir(parents=True, exist_ok=True)

    curve_rows, budget_rows = [], []
    for r in reps:
        sc = replace(Scenario(), repetitions=r)
        for s in strategies:
            runs = [run_scenario(sc, s, seed) for seed in seeds]
            acc = np.median([tr.accuracies for tr, _ in runs], axis=0)
            ent = np.median([[rec.label_entropy for rec in tr.rounds] for tr, _ in runs], axis=0)
            sizes = [rec.train_size for rec in runs[0][0].rounds]
            curve_rows += [(r, s, n, f"{a:.6f}", f"{e:.6f}") for n, a, e in zip(sizes, acc, ent)]
            budget = np.median([labels_to_threshold(tr, args.threshold * orc) for tr, orc in runs])
            budget_rows.append((r, s, budget))
            print(f"r={r} {s:10s} final acc {acc[-1]:.4f}  labels to threshold {budget:g}")

    with open(args.out / "curves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["repetitions", "strategy", "train_size", "median_accuracy", "median_label_entropy"])
        w.writerows(curve_rows)
    with open(args.out / "budgets.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["repetitions", "strategy", "median_labels_to_threshold"])
        w.writerows(budget_rows)


if __name__ == "__main__":
    main()
