"""Command-line interface.

Exit codes: 0 success, 1 property violation, 2 tensor format error,
3 tensor validation error, 4 domain or usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import seeding
from .acquisition import STRATEGIES, AcquisitionError, AcquisitionRequest, acquire, meanstd_scores, varratios_scores
from .bayes_sim import BudgetError, Scenario, labels_to_threshold, run_scenario
from .bench import BENCH_COLUMNS, sweep
from .estimators import DEFAULT_EXACT_LIMIT, DEFAULT_M, bald_scores
from .tensor_io import (
    InvalidTensorError,
    TensorFormatError,
    atomic_write,
    read_tensor,
    require_valid,
    results_json,
    write_traces_csv,
)
from . import verify as verify_mod

EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_FORMAT = 2
EXIT_VALIDATION = 3
EXIT_DOMAIN = 4

SCORE_STRATEGIES = ("bald", "batchbald", "varratios", "meanstd")
# fraction of the ground-truth predictor's accuracy used for labels-to-threshold
THRESHOLD_FRACTION = 0.95


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected comma-separated positive integers, got {text!r}")
    return values


def _name_list(choices):
    def parse(text: str) -> list[str]:
        names = [v for v in text.split(",") if v]
        bad = [n for n in names if n not in choices]
        if not names or bad:
            raise argparse.ArgumentTypeError(f"unknown strategies {bad}; choose from {list(choices)}")
        return names

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="batchbald", description="Batch acquisition by joint mutual information.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, *, tensor=False, strategy=None, batch=False, out_help="output path"):
        if tensor:
            p.add_argument("--tensor", required=True, type=Path, help="PTF1 posterior tensor")
        if strategy:
            p.add_argument("--strategy", default=strategy[0], choices=strategy)
        if batch:
            p.add_argument("--b", type=_positive, default=1, help="acquisition size")
            p.add_argument("--m", type=_positive, default=DEFAULT_M, help="sampled configurations")
            p.add_argument("--exact-limit", type=_positive, default=DEFAULT_EXACT_LIMIT)
        p.add_argument("--seed", type=_u64, default=0)
        p.add_argument("--jobs", type=_positive, default=1)
        p.add_argument("--out", type=Path, help=out_help)

    p = sub.add_parser("score", help="per-point scores as CSV")
    common(p, tensor=True, strategy=SCORE_STRATEGIES, out_help="CSV path (default stdout)")

    p = sub.add_parser("acquire", help="select a batch, write a results document")
    common(p, tensor=True, strategy=STRATEGIES, batch=True, out_help="JSON path (default stdout)")

    d = Scenario()
    p = sub.add_parser("simulate", help="active-learning loops on a synthetic repeated pool")
    common(p, batch=True, out_help="output directory")
    p.set_defaults(b=d.b, m=d.m)
    p.add_argument("--strategies", type=_name_list(STRATEGIES[:5]), default=["batchbald", "random", "bald"])
    p.add_argument("--hypotheses", type=_positive, default=d.hypotheses)
    p.add_argument("--features", type=_positive, default=d.features)
    p.add_argument("--classes", type=_positive, default=d.classes)
    p.add_argument("--repetitions", type=_non_negative, default=d.repetitions)
    p.add_argument("--prototypes", type=_positive, default=d.prototypes_per_feature, help="prototypes per feature")
    p.add_argument("--concentration", type=float, default=d.concentration)
    p.add_argument("--test-size", type=_positive, default=d.test_size)
    p.add_argument("--rounds", type=_non_negative, default=d.rounds)
    p.add_argument("--trials", type=_positive, default=20)
    p.add_argument("--k", type=_positive, default=d.k)

    p = sub.add_parser("verify", help="run the property suite")
    common(p, out_help="JSON report path (default verify_report.json)")
    p.add_argument("--trials", type=_positive, default=None, help="trials per property (default: per-property)")
    p.add_argument("--only", type=_name_list(tuple(verify_mod.CHECKS)), default=None)

    p = sub.add_parser("bench", help="time acquisition over a pool-size sweep")
    common(p, strategy=("batchbald", "bald", "random", "varratios", "meanstd"), batch=True, out_help="CSV path")
    p.set_defaults(b=4, m=1000)
    p.add_argument("--pool-sizes", type=_int_list, default=[1000, 2000])
    p.add_argument("--classes", type=_positive, default=4)
    p.add_argument("--k", type=_positive, default=32)
    p.add_argument("--repeats", type=_positive, default=10)
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(out, text)


def _load(path: Path):
    return require_valid(read_tensor(path))


def cmd_score(args) -> int:
    t = _load(args.tensor)
    if args.strategy in ("bald", "batchbald"):
        scores = bald_scores(t)
    elif args.strategy == "varratios":
        scores = varratios_scores(t)
    else:
        scores = meanstd_scores(t)
    lines = ["index,score"] + [f"{i},{s:.17g}" for i, s in enumerate(scores)]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_acquire(args) -> int:
    t = _load(args.tensor)
    req = AcquisitionRequest(args.strategy, args.b, args.m, args.exact_limit, args.seed, args.jobs)
    res = acquire(t, req)
    _emit(results_json(res.to_document()), args.out)
    return EXIT_OK


def _trial(payload):
    sc, strategy, seed = payload
    trace, oracle = run_scenario(sc, strategy, seed)
    return trace, oracle


def cmd_simulate(args) -> int:
    sc = Scenario(
        hypotheses=args.hypotheses,
        features=args.features,
        classes=args.classes,
        repetitions=args.repetitions,
        prototypes_per_feature=args.prototypes,
        concentration=args.concentration,
        test_size=args.test_size,
        rounds=args.rounds,
        b=args.b,
        k=args.k,
        m=args.m,
        exact_limit=args.exact_limit,
    )
    if sc.hypotheses < 2 or sc.classes < 2 or not sc.concentration > 0:
        raise BudgetError("need --hypotheses >= 2, --classes >= 2 and --concentration > 0")
    if sc.rounds * sc.b > sc.pool_size:
        raise BudgetError(f"rounds*b = {sc.rounds * sc.b} exceeds pool size {sc.pool_size}")
    seeds = [seeding.child_seed(args.seed, "trial", i) for i in range(args.trials)]
    jobs = [(sc, s, seed) for s in args.strategies for seed in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_trial, jobs))
    else:
        results = [_trial(j) for j in jobs]

    out = args.out or Path("simulate_out")
    summary = {"scenario": sc.__dict__ | {"trials": args.trials, "seed": args.seed}, "strategies": {}}
    for s in args.strategies:
        runs = [r for j, r in zip(jobs, results) if j[1] == s]
        traces = [tr for tr, _ in runs]
        write_traces_csv(traces, out / f"trace_{s}.csv")
        summary["strategies"][s] = {
            "median_final_accuracy": float(np.median([tr.final_accuracy for tr in traces])),
            "median_accuracy_curve": np.median([tr.accuracies for tr in traces], axis=0).tolist(),
            "median_label_entropy": np.median(
                [[r.label_entropy for r in tr.rounds] for tr in traces], axis=0
            ).tolist(),
            "median_labels_to_threshold": float(
                np.median([labels_to_threshold(tr, THRESHOLD_FRACTION * orc) for tr, orc in runs])
            ),
        }
    atomic_write(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    for s, v in summary["strategies"].items():
        print(f"{s}: median final accuracy {v['median_final_accuracy']:.4f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify_mod.run_suite(args.trials, args.seed, args.only)
    out = args.out or Path("verify_report.json")
    atomic_write(out, json.dumps(verify_mod.report_dict(results, args.seed), indent=2) + "\n")
    for path in verify_mod.write_counterexamples(results, out.parent):
        print(f"counterexample written to {path}")
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: {r.trials} trials, {r.failures} failures, worst violation {r.worst:.3g}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_PROPERTY


def cmd_bench(args) -> int:
    too_small = [n for n in args.pool_sizes if n < args.b]
    if too_small:
        raise AcquisitionError(f"pool sizes {too_small} smaller than b={args.b}")
    rows = sweep(
        args.pool_sizes,
        args.b,
        args.classes,
        args.k,
        args.m,
        strategy=args.strategy,
        seed=args.seed,
        repeats=args.repeats,
        exact_limit=args.exact_limit,
        jobs=args.jobs,
    )
    text = ",".join(BENCH_COLUMNS) + "\n" + "".join(r.csv() + "\n" for r in rows)
    _emit(text, args.out)
    return EXIT_OK


COMMANDS = {
    "score": cmd_score,
    "acquire": cmd_acquire,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_DOMAIN
    except TensorFormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except InvalidTensorError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (AcquisitionError, BudgetError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
