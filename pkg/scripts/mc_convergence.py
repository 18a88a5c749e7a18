#!/usr/bin/env python3
"""Error of the sampled joint entropy against exact enumeration as m grows.

Prints one CSV row per (instance, m) with the mean, standard error and worst
relative error over seeds.
"""

import argparse

import numpy as np

from batchbald.estimators import exact_state, joint_entropy_exact, joint_entropy_sampled, sample_configurations
from batchbald.seeding import rng
from batchbald.tensor_io import random_tensor


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=10)
    ap.add_argument("--points", type=int, default=5)
    ap.add_argument("--classes", type=int, default=4)
    ap.add_argument("--k", type=int, default=16)
    ap.add_argument("--ms", default="10,100,1000,10000")
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()

    print("instance,m,exact,mean,stderr,max_rel_err")
    for inst in range(args.instances):
        t = random_tensor(rng(0, "instance", inst), args.points, args.k, args.classes)
        exact = joint_entropy_exact(exact_state(t, range(t.n_pool), exact_limit=args.classes**args.points))
        context, last = list(range(t.n_pool - 1)), t.n_pool - 1
        for m in (int(v) for v in args.ms.split(",")):
            est = np.array(
                [
                    joint_entropy_sampled(sample_configurations(t, context, m, rng(0, inst, m, s)), t, last)
                    for s in range(args.seeds)
                ]
            )
            se = est.std(ddof=1) / np.sqrt(len(est))
            print(f"{inst},{m},{exact:.6f},{est.mean():.6f},{se:.6f},{np.abs(est - exact).max() / exact:.5f}")


if __name__ == "__main__":
    main()
