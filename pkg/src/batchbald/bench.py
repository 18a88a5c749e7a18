"""Wall-clock scaling of the acquisition strategies."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from . import seeding
from .acquisition import AcquisitionRequest, acquire
from .estimators import DEFAULT_EXACT_LIMIT
from .tensor_io import random_tensor

BENCH_COLUMNS = ("n_pool", "b", "c", "k", "m", "mode", "ms")


@dataclass
class BenchRow:
    n_pool: int
    b: int
    c: int
    k: int
    m: int
    mode: str
    ms: float

    def csv(self) -> str:
        return f"{self.n_pool},{self.b},{self.c},{self.k},{self.m},{self.mode},{self.ms:.3f}"


def _mode_label(modes) -> str:
    kinds = sorted(set(modes))
    return "+".join(kinds)


def time_acquisition(
    n_pool: int,
    b: int,
    c: int,
    k: int,
    m: int,
    strategy: str = "batchbald",
    seed: int = 0,
    repeats: int = 3,
    exact_limit: int = DEFAULT_EXACT_LIMIT,
    jobs: int = 1,
) -> BenchRow:
    """Best-of-``repeats`` time for one acquisition on a random tensor."""
    t = random_tensor(seeding.rng(seed, "bench", n_pool, c, k), n_pool, k, c)
    req = AcquisitionRequest(strategy, b, m, exact_limit, seed, jobs)
    best = float("inf")
    modes = []
    for _ in range(max(1, repeats)):
        start = time.perf_counter()
        res = acquire(t, req)
        best = min(best, (time.perf_counter() - start) * 1e3)
        modes = res.modes
    return BenchRow(n_pool, b, c, k, m, _mode_label(modes), best)


def sweep(pool_sizes, b: int, c: int, k: int, m: int, **kw) -> list[BenchRow]:
    return [time_acquisition(n, b, c, k, m, **kw) for n in pool_sizes]


def doubling_ratios(rows: list[BenchRow]) -> list[float]:
    """Time ratio per doubling of ``n_pool``, normalised as ``ratio ** (1/log2 step)``."""
    out = []
    for a, z in zip(rows, rows[1:]):
        steps = math.log2(z.n_pool / a.n_pool)
        out.append((z.ms / a.ms) ** (1.0 / steps) if steps > 0 else float("nan"))
    return out
