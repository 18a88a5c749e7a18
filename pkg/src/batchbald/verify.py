"""Property suite for the batch score and the greedy acquisition.

Each check draws random instances from a seeded stream, evaluates one
property per trial and records the worst violation. A failing trial's
instance is kept so the caller can serialise it as a counterexample.

The batch scorer used by every check is looked up at call time as
``verify.batchbald_score``, which lets tests substitute a faulty estimator.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import seeding
from .acquisition import AcquisitionRequest, acquire_bald, acquire_batchbald, acquire_exhaustive
from .bench import doubling_ratios, sweep
from .estimators import (
    bald_scores,
    batchbald_score,
    exact_state,
    joint_entropy_exact,
    joint_entropy_sampled,
    sample_configurations,
)
from .tensor_io import PosteriorTensor, atomic_write, random_tensor

TOL = 1e-9
GREEDY_BOUND = 1.0 - 1.0 / math.e

# trials per check when the caller does not override them
DEFAULT_TRIALS = {
    "size1_equivalence": 500,
    "bald_upper_bound": 1000,
    "submodularity": 1000,
    "monotone_gains": 1000,
    "oracle_equivalence": 500,
    "mc_convergence": 50,
    "greedy_near_optimality": 200,
    "pool_scaling": 10,
}


@dataclass
class PropertyResult:
    name: str
    trials: int = 0
    failures: int = 0
    worst: float = 0.0
    seconds: float = 0.0
    stats: dict = field(default_factory=dict)
    counterexample: dict | None = None

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def record(self, violation: float, instance=None) -> None:
        """Count one trial; ``violation > 0`` marks it failed."""
        self.trials += 1
        self.worst = max(self.worst, violation)
        if violation > 0:
            self.failures += 1
            if self.counterexample is None and instance is not None:
                self.counterexample = instance


def _score(t, subset) -> float:
    if len(subset) == 0:
        return 0.0
    # resolved through the module so tests can patch it
    return globals()["batchbald_score"](t, list(subset)).score


def _instance(t: PosteriorTensor, **extra) -> dict:
    def plain(v):
        return [int(i) for i in v] if isinstance(v, (list, tuple)) else v

    return {"probs": t.probs.tolist(), **{key: plain(v) for key, v in extra.items()}}


def _small_instance(rng, max_pool=6, max_c=4, max_k=8, max_points=4) -> PosteriorTensor:
    c = int(rng.integers(2, max_c + 1))
    n_pool = int(rng.integers(max_points, max_pool + 1))
    k = int(rng.integers(1, max_k + 1))
    return random_tensor(rng, n_pool, k, c)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def check_size1_equivalence(trials: int, seed: int) -> PropertyResult:
    res = PropertyResult("size1_equivalence")
    for trial in range(trials):
        rng = seeding.rng(seed, "size1", trial)
        t = random_tensor(rng, int(rng.integers(1, 51)), int(rng.integers(1, 33)), int(rng.integers(2, 11)))
        a = acquire_batchbald(t, AcquisitionRequest("batchbald", 1))
        b = acquire_bald(t, AcquisitionRequest("bald", 1))
        same = a.indices == b.indices and a.scores == b.scores
        res.record(0.0 if same else max(1.0, abs(a.scores[0] - b.scores[0])), _instance(t) if not same else None)
    return res


def check_bald_upper_bound(trials: int, seed: int) -> PropertyResult:
    res = PropertyResult("bald_upper_bound")
    for trial in range(trials):
        rng = seeding.rng(seed, "upper", trial)
        t = _small_instance(rng)
        size = int(rng.integers(1, min(4, t.n_pool) + 1))
        subset = sorted(rng.choice(t.n_pool, size=size, replace=False).tolist())
        excess = _score(t, subset) - float(bald_scores(t)[subset].sum())
        res.record(max(0.0, excess - TOL), _instance(t, subset=subset))
    return res


def _submod_case(rng):
    t = _small_instance(rng, max_pool=6, max_c=4, max_k=8, max_points=4)
    size_a = int(rng.integers(0, 3))
    while t.c ** (size_a + 2) > 10_000:
        size_a -= 1
    picks = rng.choice(t.n_pool, size=size_a + 2, replace=False).tolist()
    return t, sorted(picks[:size_a]), picks[size_a], picks[size_a + 1]


def check_submodularity(trials: int, seed: int) -> PropertyResult:
    """f(A+y1) + f(A+y2) >= f(A+y1+y2) + f(A)."""
    res = PropertyResult("submodularity")
    for trial in range(trials):
        t, A, y1, y2 = _submod_case(seeding.rng(seed, "submod", trial))
        lhs = _score(t, A + [y1]) + _score(t, A + [y2])
        rhs = _score(t, A + [y1, y2]) + _score(t, A)
        res.record(max(0.0, rhs - lhs - TOL), _instance(t, A=A, y1=y1, y2=y2))
    return res


def check_monotone_gains(trials: int, seed: int) -> PropertyResult:
    """Greedy marginal gains and f(A+x) - f(A) are non-negative."""
    res = PropertyResult("monotone_gains")
    for trial in range(trials):
        t, A, y1, y2 = _submod_case(seeding.rng(seed, "submod", trial))
        worst = max(_score(t, A) - _score(t, A + [y1]), _score(t, A) - _score(t, A + [y2]))
        b = min(t.n_pool, 3)
        greedy = acquire_batchbald(t, AcquisitionRequest("batchbald", b))
        steps = [0.0] + greedy.scores
        worst = max(worst, max(prev - cur for prev, cur in zip(steps, steps[1:])))
        res.record(max(0.0, worst - TOL), _instance(t, A=A, y1=y1, y2=y2))
    return res


def brute_force_joint_entropy(t: PosteriorTensor, subset) -> float:
    """Enumerate every configuration, average per-sample products, take entropy."""
    probs = t.probs[list(subset)]
    n, k, c = probs.shape
    total = 0.0
    for config in itertools.product(range(c), repeat=n):
        per_sample = np.ones(k)
        for point, label in enumerate(config):
            per_sample = per_sample * probs[point, :, label]
        p = per_sample.mean()
        if p > 0:
            total -= p * math.log(p)
    return total


def _oracle_case(rng):
    c = int(rng.integers(2, 5))
    max_n = int(math.floor(math.log(4096) / math.log(c) + 1e-9))
    n = int(rng.integers(1, max_n + 1))
    k = int(rng.integers(1, 9))
    return random_tensor(rng, n, k, c)


def check_oracle_equivalence(trials: int, seed: int) -> PropertyResult:
    res = PropertyResult("oracle_equivalence")
    for trial in range(trials):
        t = _oracle_case(seeding.rng(seed, "oracle", trial))
        subset = list(range(t.n_pool))
        err = abs(joint_entropy_exact(exact_state(t, subset, 4096)) - brute_force_joint_entropy(t, subset))
        res.record(max(0.0, err - TOL), _instance(t, subset=subset))
    return res


MC_SIZES = (100, 1000, 10_000)
MC_SEEDS = 20
MC_REL_TOL = 0.02
MC_SE_MULT = 4.0


def _mc_case(rng):
    c = int(rng.integers(2, 5))
    max_n = int(math.floor(math.log(1024) / math.log(c) + 1e-9))
    n = int(rng.integers(2, max_n + 1))
    return random_tensor(rng, n, int(rng.integers(2, 17)), c)


def check_mc_convergence(trials: int, seed: int) -> PropertyResult:
    """Importance-sampled joint entropy against exact enumeration.

    At the largest ``m`` every seed's estimate must be within 2% relative error
    and the seed mean within 4 standard errors; the median absolute error over
    all instances and seeds must fall as ``m`` grows.
    """
    res = PropertyResult("mc_convergence")
    errors = {m: [] for m in MC_SIZES}
    worst_rel = 0.0
    worst_z = 0.0
    for trial in range(trials):
        t = _mc_case(seeding.rng(seed, "mc", trial))
        *context, last = range(t.n_pool)
        exact = joint_entropy_exact(exact_state(t, range(t.n_pool)))
        violation = 0.0
        for m in MC_SIZES:
            est = np.array(
                [
                    joint_entropy_sampled(
                        sample_configurations(t, context, m, seeding.rng(seed, "mc", trial, m, s)), t, last
                    )
                    for s in range(MC_SEEDS)
                ]
            )
            errors[m].extend(np.abs(est - exact).tolist())
            if m == MC_SIZES[-1]:
                rel = float(np.max(np.abs(est - exact)) / max(exact, 1e-12))
                se = float(est.std(ddof=1) / math.sqrt(MC_SEEDS))
                gap = abs(float(est.mean()) - exact)
                z = gap / se if se > 0 else (0.0 if gap <= TOL else math.inf)
                worst_rel = max(worst_rel, rel)
                worst_z = max(worst_z, z)
                violation = max(rel - MC_REL_TOL, 0.0) + max(gap - max(MC_SE_MULT * se, TOL), 0.0)
        res.record(violation, _instance(t, exact=exact) if violation > 0 else None)
    medians = [float(np.median(errors[m])) if errors[m] else 0.0 for m in MC_SIZES]
    res.stats = {
        "median_abs_error": dict(zip(map(str, MC_SIZES), medians)),
        "max_relative_error": worst_rel,
        "max_standard_errors": worst_z,
    }
    if trials and not all(a > b for a, b in zip(medians, medians[1:])):
        res.failures += 1
        res.worst = max(res.worst, 1.0)
    return res


def _greedy_case(rng):
    c = int(rng.integers(2, 4))
    n_pool = int(rng.integers(2, 9))
    b = int(rng.integers(1, min(3, n_pool) + 1))
    return random_tensor(rng, n_pool, int(rng.integers(1, 5)), c), b


def check_greedy_near_optimality(trials: int, seed: int) -> PropertyResult:
    res = PropertyResult("greedy_near_optimality")
    ratios = []
    for trial in range(trials):
        t, b = _greedy_case(seeding.rng(seed, "greedy", trial))
        greedy = acquire_batchbald(t, AcquisitionRequest("batchbald", b))
        best = acquire_exhaustive(t, AcquisitionRequest("exhaustive", b))
        g, opt = greedy.scores[-1], best.scores[-1]
        if opt > TOL:
            ratios.append(g / opt)
        res.record(max(0.0, GREEDY_BOUND * opt - g - TOL), _instance(t, b=b, greedy=greedy.indices, optimum=best.indices))
    if ratios:
        q = np.quantile(ratios, [0.0, 0.05, 0.5, 1.0])
        res.stats = {
            "ratio_min": float(q[0]),
            "ratio_p05": float(q[1]),
            "ratio_median": float(q[2]),
            "ratio_max": float(q[3]),
            "fraction_optimal": float(np.mean(np.array(ratios) >= 1.0 - 1e-12)),
        }
    return res


SCALING_SIZES = (2000, 4000, 8000)
SCALING_LIMIT = 2.5


def check_pool_scaling(trials: int, seed: int) -> PropertyResult:
    """Greedy time per doubling of the pool, best of ``trials`` timings."""
    res = PropertyResult("pool_scaling")
    rows = sweep(SCALING_SIZES, b=4, c=4, k=32, m=1000, seed=seed, repeats=max(1, trials))
    ratios = doubling_ratios(rows)
    res.stats = {"ms": [r.ms for r in rows], "ratios": ratios}
    for _ in range(trials):
        res.record(max(0.0, max(ratios) - SCALING_LIMIT))
    return res


CHECKS = {
    "size1_equivalence": check_size1_equivalence,
    "bald_upper_bound": check_bald_upper_bound,
    "submodularity": check_submodularity,
    "monotone_gains": check_monotone_gains,
    "oracle_equivalence": check_oracle_equivalence,
    "mc_convergence": check_mc_convergence,
    "greedy_near_optimality": check_greedy_near_optimality,
    "pool_scaling": check_pool_scaling,
}


def run_suite(trials: int | None = None, seed: int = 0, only=None) -> list[PropertyResult]:
    results = []
    for name, fn in CHECKS.items():
        if only and name not in only:
            continue
        n = DEFAULT_TRIALS[name] if trials is None else trials
        start = time.perf_counter()
        r = fn(n, seed)
        r.seconds = time.perf_counter() - start
        results.append(r)
    return results


def report_dict(results: list[PropertyResult], seed: int) -> dict:
    props = []
    for r in results:
        d = asdict(r)
        d.pop("counterexample")
        d["passed"] = r.passed
        props.append(d)
    return {"seed": seed, "passed": all(r.passed for r in results), "properties": props}


def write_counterexamples(results: list[PropertyResult], directory) -> list[Path]:
    paths = []
    for r in results:
        if not r.passed and r.counterexample is not None:
            path = Path(directory) / f"counterexample_{r.name}.json"
            atomic_write(path, json.dumps(r.counterexample) + "\n")
            paths.append(path)
    return paths

