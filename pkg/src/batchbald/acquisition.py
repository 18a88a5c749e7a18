"""Batch acquisition strategies over a posterior tensor.

Every strategy returns an :class:`AcquisitionResult` with the acquired pool
indices in selection order. Ties are always broken towards the lowest index.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .estimators import (
    DEFAULT_EXACT_LIMIT,
    DEFAULT_M,
    EXACT,
    SAMPLED,
    batchbald_score,
    bald_scores,
    candidate_joint_entropies,
    empty_state,
    extend_joint_exact,
    pointwise_conditional_entropies,
    sample_configurations,
)
from .tensor_io import PosteriorTensor

STRATEGIES = ("batchbald", "bald", "random", "varratios", "meanstd", "exhaustive")
EXHAUSTIVE_MAX_SUBSETS = 10**6


class AcquisitionError(ValueError):
    """Request does not fit the pool (e.g. ``b > n_pool``)."""


@dataclass(frozen=True)
class AcquisitionRequest:
    strategy: str = "batchbald"
    b: int = 1
    m: int = DEFAULT_M
    exact_limit: int = DEFAULT_EXACT_LIMIT
    seed: int = 0
    jobs: int = 1

    def check(self, t: PosteriorTensor) -> None:
        if self.strategy not in STRATEGIES:
            raise AcquisitionError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if not 1 <= self.b <= t.n_pool:
            raise AcquisitionError(f"batch size b={self.b} outside [1, n_pool={t.n_pool}]")
        if self.m < 1:
            raise AcquisitionError("m must be >= 1")
        if self.exact_limit < t.c:
            raise AcquisitionError(f"exact_limit={self.exact_limit} below class count c={t.c}")
        if not 0 <= self.seed < 1 << 64:
            raise AcquisitionError("seed must be an unsigned 64-bit integer")


@dataclass
class AcquisitionResult:
    request: AcquisitionRequest
    k: int
    indices: list[int] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)
    modes: list[str] = field(default_factory=list)
    step_ms: list[float] = field(default_factory=list)

    def to_document(self) -> dict:
        r = self.request
        return {
            "strategy": r.strategy,
            "b": r.b,
            "k": self.k,
            "m": r.m,
            "seed": r.seed,
            "exact_limit": r.exact_limit,
            "acquired": [int(i) for i in self.indices],
            "scores": [float(s) for s in self.scores],
            "step_ms": [round(float(s), 3) for s in self.step_ms],
        }


def _top_b(scores: np.ndarray, b: int) -> np.ndarray:
    # stable sort on the negated score keeps lowest index first among ties
    return np.argsort(-scores, kind="stable")[:b]


def _ranked(t: PosteriorTensor, req: AcquisitionRequest, scores: np.ndarray) -> AcquisitionResult:
    start = time.perf_counter()
    chosen = _top_b(scores, req.b)
    elapsed = (time.perf_counter() - start) * 1e3
    res = AcquisitionResult(req, t.k)
    res.indices = [int(i) for i in chosen]
    res.scores = [float(scores[i]) for i in chosen]
    res.modes = [EXACT] * req.b
    res.step_ms = [elapsed / req.b] * req.b
    return res


def acquire_batchbald(t: PosteriorTensor, req: AcquisitionRequest) -> AcquisitionResult:
    """Greedy maximisation of the joint mutual information.

    Step ``n`` scores every remaining point ``x`` by the batch score of
    ``A_{n-1} + {x}``. Exact enumeration is used while ``c ** n`` fits within
    ``exact_limit``; afterwards ``m`` configurations of ``A_{n-1}`` are drawn
    fresh for the step (stream ``seed -> step n``) and shared by all candidates.
    """
    req.check(t)
    res = AcquisitionResult(req, t.k)
    cond = pointwise_conditional_entropies(t)
    available = np.ones(t.n_pool, dtype=bool)
    state = empty_state(t.k)
    chosen_cond = 0.0
    for n in range(1, req.b + 1):
        start = time.perf_counter()
        candidates = np.flatnonzero(available)
        if t.c**n <= req.exact_limit:
            mode = EXACT
            context = state
        else:
            mode = SAMPLED
            context = sample_configurations(t, res.indices, req.m, seeding.rng(req.seed, "step", n))
        joint = candidate_joint_entropies(context, t, candidates, jobs=req.jobs)
        # singleton batches reduce to the per-point score bit for bit
        scores = joint - cond[candidates] if n == 1 else joint - (chosen_cond + cond[candidates])
        best = int(np.argmax(scores))
        x = int(candidates[best])
        available[x] = False
        res.indices.append(x)
        res.scores.append(float(scores[best]))
        res.modes.append(mode)
        chosen_cond += cond[x]
        if n < req.b and t.c ** (n + 1) <= req.exact_limit:
            state = extend_joint_exact(state, t, x, req.exact_limit)
        res.step_ms.append((time.perf_counter() - start) * 1e3)
    return res


def acquire_bald(t: PosteriorTensor, req: AcquisitionRequest) -> AcquisitionResult:
    req.check(t)
    return _ranked(t, req, bald_scores(t))


def acquire_random(t: PosteriorTensor, req: AcquisitionRequest) -> AcquisitionResult:
    """Uniform sample of ``b`` distinct indices; scores are reported as 0."""
    req.check(t)
    start = time.perf_counter()
    chosen = seeding.rng(req.seed, "random").choice(t.n_pool, size=req.b, replace=False)
    elapsed = (time.perf_counter() - start) * 1e3
    res = AcquisitionResult(req, t.k)
    res.indices = [int(i) for i in chosen]
    res.scores = [0.0] * req.b
    res.modes = ["none"] * req.b
    res.step_ms = [elapsed / req.b] * req.b
    return res


def varratios_scores(t: PosteriorTensor) -> np.ndarray:
    return 1.0 - t.probs.mean(axis=1).max(axis=1)


def meanstd_scores(t: PosteriorTensor) -> np.ndarray:
    # population std over samples (divisor k), averaged over classes
    return t.probs.std(axis=1, ddof=0).mean(axis=1)


def acquire_varratios(t: PosteriorTensor, req: AcquisitionRequest) -> AcquisitionResult:
    req.check(t)
    return _ranked(t, req, varratios_scores(t))


def acquire_meanstd(t: PosteriorTensor, req: AcquisitionRequest) -> AcquisitionResult:
    req.check(t)
    return _ranked(t, req, meanstd_scores(t))


def acquire_exhaustive(t: PosteriorTensor, req: AcquisitionRequest) -> AcquisitionResult:
    """Best subset of size ``b`` by exact batch score, enumerating all subsets.

    Reported per-step scores are the batch scores of the prefixes of the winning
    tuple (indices ascending), so the last entry is the optimum.
    """
    req.check(t)
    if math.comb(t.n_pool, req.b) > EXHAUSTIVE_MAX_SUBSETS:
        raise AcquisitionError(f"C({t.n_pool}, {req.b}) subsets exceed {EXHAUSTIVE_MAX_SUBSETS}")
    if t.c**req.b > req.exact_limit:
        raise AcquisitionError(f"c^b = {t.c ** req.b} exceeds exact_limit {req.exact_limit}")
    start = time.perf_counter()
    best, best_score = None, -np.inf
    for subset in itertools.combinations(range(t.n_pool), req.b):
        s = batchbald_score(t, subset, req.exact_limit).score
        if s > best_score:
            best, best_score = subset, s
    elapsed = (time.perf_counter() - start) * 1e3
    res = AcquisitionResult(req, t.k)
    res.indices = list(best)
    res.scores = [batchbald_score(t, best[: n + 1], req.exact_limit).score for n in range(req.b)]
    res.modes = [EXACT] * req.b
    res.step_ms = [elapsed / req.b] * req.b
    return res


ACQUIRERS = {
    "batchbald": acquire_batchbald,
    "bald": acquire_bald,
    "random": acquire_random,
    "varratios": acquire_varratios,
    "meanstd": acquire_meanstd,
    "exhaustive": acquire_exhaustive,
}


def acquire(t: PosteriorTensor, req: AcquisitionRequest) -> AcquisitionResult:
    if req.strategy not in ACQUIRERS:
        raise AcquisitionError(f"unknown strategy {req.strategy!r}; choose from {STRATEGIES}")
    return ACQUIRERS[req.strategy](t, req)
