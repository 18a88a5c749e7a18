"""Entropy and mutual-information estimators over posterior tensors.

All quantities are in nats. For a set of pool points the batch score is

    I(y_1..y_n ; w) = H(y_1..y_n) - E_w H(y_1..y_n | w)

The conditional term factorises over points given ``w``. The joint term is
computed from a cached matrix ``P`` with one row per label configuration of the
points folded in so far and one column per parameter sample, holding
``p(config | w_j)``. In exact mode the rows enumerate every configuration; in
sampled mode they are ``m`` configurations drawn from ``p(y_1..y_n)`` and the
joint entropy with one more point is an importance-weighted average.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import entr

from .tensor_io import PosteriorTensor

EXACT = "exact"
SAMPLED = "sampled"

DEFAULT_EXACT_LIMIT = 10_000
DEFAULT_M = 10_000
# lower clamp on importance-weight denominators
TINY = 1e-300
# elements of the (candidates, rows, classes) block evaluated per chunk
CHUNK_ELEMENTS = 1 << 16


class ExactLimitError(ValueError):
    """Raised when exact enumeration would exceed the configuration cap."""


@dataclass(frozen=True, eq=False)
class JointState:
    """Cached per-configuration, per-sample probabilities ``P`` (rows x k).

    ``configs`` has one row per configuration and one column per folded point;
    ``indices`` lists those points in fold order.
    """

    mode: str
    P: np.ndarray
    configs: np.ndarray
    indices: tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return len(self.indices)

    @property
    def rows(self) -> int:
        return self.P.shape[0]

    @property
    def k(self) -> int:
        return self.P.shape[1]

    @property
    def self_prob(self) -> np.ndarray:
        """Marginal probability of each stored configuration, ``mean_j P``."""
        return self.P.mean(axis=1)


@dataclass(frozen=True)
class EntropyBreakdown:
    joint_entropy: float
    conditional_entropy: float
    score: float
    mode: str


def empty_state(k: int, mode: str = EXACT, m: int = 1) -> JointState:
    rows = 1 if mode == EXACT else m
    return JointState(mode, np.ones((rows, k)), np.zeros((rows, 0), dtype=np.intp))


# ---------------------------------------------------------------------------
# per-point quantities
# ---------------------------------------------------------------------------


def _check_indices(t: PosteriorTensor, indices) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.intp).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= t.n_pool):
        raise IndexError(f"pool index out of range [0, {t.n_pool}): {indices}")
    return idx


def _conditional_terms(t: PosteriorTensor, idx) -> np.ndarray:
    return entr(t.probs[idx]).sum(axis=2).mean(axis=1)


def pointwise_conditional_entropies(t: PosteriorTensor) -> np.ndarray:
    """``mean_j H[y_i | w_j]`` for every pool point."""
    return _conditional_terms(t, slice(None))


def conditional_entropy(t: PosteriorTensor, subset) -> float:
    return float(_conditional_terms(t, _check_indices(t, subset)).sum())


def _class_by_sample(t: PosteriorTensor, candidates: np.ndarray) -> np.ndarray:
    """Candidate matrices laid out as (N, c, k), contiguous in k."""
    return np.ascontiguousarray(t.probs[candidates].transpose(0, 2, 1))


def _entropies_empty_context(cand: np.ndarray) -> np.ndarray:
    # the same routine serves BALD and the first greedy step, so a batch of
    # one is bit-identical to the per-point score
    return entr(cand.mean(axis=2)).sum(axis=1)


def _entropies_exact(P: np.ndarray, cand: np.ndarray) -> np.ndarray:
    k = P.shape[1]
    joint = np.matmul(P, cand.transpose(0, 2, 1)) / k  # (N, R, c)
    return entr(joint).sum(axis=(1, 2))


def _entropies_sampled(P: np.ndarray, cand: np.ndarray) -> np.ndarray:
    m, k = P.shape
    denom = np.maximum(P.sum(axis=1), TINY)
    q = np.matmul(P, cand.transpose(0, 2, 1)) / k  # (N, m, c), joint mean over samples
    # (num / den) * -ln(num / k) == k * entr(q) / den
    return (k / m) * (entr(q).sum(axis=2) / denom).sum(axis=1)


def candidate_joint_entropies(state: JointState, t: PosteriorTensor, candidates, jobs: int = 1) -> np.ndarray:
    """Joint entropy of ``state`` points plus each candidate, one per candidate.

    Candidates are processed in chunks; with ``jobs > 1`` chunks are scored on a
    thread pool. Each chunk is computed independently so the result does not
    depend on ``jobs``.
    """
    idx = _check_indices(t, candidates)
    if state.n == 0 and state.mode == EXACT:
        fn = lambda P, cand: _entropies_empty_context(cand)  # noqa: E731
    elif state.mode == EXACT:
        fn = _entropies_exact
    else:
        fn = _entropies_sampled
    per_candidate = max(1, state.rows * t.c)
    step = max(1, CHUNK_ELEMENTS // per_candidate)
    chunks = [idx[s : s + step] for s in range(0, idx.size, step)]

    def run(chunk):
        return fn(state.P, _class_by_sample(t, chunk))

    if jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(ch) for ch in chunks]
    return np.concatenate(parts) if parts else np.zeros(0)


def bald_scores(t: PosteriorTensor) -> np.ndarray:
    """Per-point mutual information between label and parameters."""
    everyone = np.arange(t.n_pool)
    joint = candidate_joint_entropies(empty_state(t.k), t, everyone)
    return joint - pointwise_conditional_entropies(t)


# ---------------------------------------------------------------------------
# exact enumeration
# ---------------------------------------------------------------------------


def extend_joint_exact(
    state: JointState, t: PosteriorTensor, i: int, exact_limit: int = DEFAULT_EXACT_LIMIT
) -> JointState:
    """Fold point ``i`` into an exact state: rows become (config, y) pairs."""
    if state.mode != EXACT:
        raise ValueError("extend_joint_exact needs an exact-mode state")
    _check_indices(t, [i])
    rows = state.rows * t.c
    if rows > exact_limit:
        raise ExactLimitError(f"{rows} configurations exceed exact limit {exact_limit}")
    point = t.probs[i].T  # (c, k)
    P = (state.P[:, None, :] * point[None, :, :]).reshape(rows, t.k)
    configs = np.concatenate(
        [np.repeat(state.configs, t.c, axis=0), np.tile(np.arange(t.c), state.rows)[:, None]], axis=1
    )
    return JointState(EXACT, P, configs, state.indices + (int(i),))


def exact_state(t: PosteriorTensor, subset, exact_limit: int = DEFAULT_EXACT_LIMIT) -> JointState:
    state = empty_state(t.k)
    for i in subset:
        state = extend_joint_exact(state, t, i, exact_limit)
    return state


def joint_entropy_exact(state: JointState) -> float:
    if state.mode != EXACT:
        raise ValueError("joint_entropy_exact needs an exact-mode state")
    return float(entr(state.P.mean(axis=1)).sum())


# ---------------------------------------------------------------------------
# sampled configurations
# ---------------------------------------------------------------------------


def _draw_labels(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of ``probs`` (rows, c) by inverse CDF."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    labels = (cdf <= u[:, None]).sum(axis=1)
    return np.minimum(labels, probs.shape[1] - 1)


def _config_likelihoods(t: PosteriorTensor, subset: np.ndarray, configs: np.ndarray) -> np.ndarray:
    """``p(config_r | w_j)`` for every sampled configuration, shape (m, k)."""
    m = configs.shape[0]
    P = np.ones((m, t.k))
    for col, i in enumerate(subset):
        P *= t.probs[i][:, configs[:, col]].T
    return P


def sample_configurations(
    t: PosteriorTensor, subset, m: int, rng: np.random.Generator
) -> JointState:
    """Draw ``m`` configurations of ``subset`` from the sample mixture.

    Ancestral sampling: pick a parameter sample uniformly, then each label from
    that sample's categorical.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    idx = _check_indices(t, subset)
    if idx.size == 0:
        raise ValueError("subset must be non-empty")
    which = rng.integers(t.k, size=m)
    configs = np.empty((m, idx.size), dtype=np.intp)
    for col, i in enumerate(idx):
        configs[:, col] = _draw_labels(t.probs[i][which], rng)
    P = _config_likelihoods(t, idx, configs)
    return JointState(SAMPLED, P, configs, tuple(int(i) for i in idx))


def extend_joint_sampled(
    state: JointState, t: PosteriorTensor, i: int, rng: np.random.Generator
) -> JointState:
    """Fold point ``i`` into a sampled state.

    Each stored configuration is extended by a label drawn from
    ``p(y_i | config)``, i.e. the sample mixture reweighted by ``P``, so the
    extended rows remain draws from the joint over all folded points.
    """
    if state.mode != SAMPLED:
        raise ValueError("extend_joint_sampled needs a sampled-mode state")
    _check_indices(t, [i])
    point = t.probs[i]  # (k, c)
    predictive = state.P @ point  # (m, c), unnormalised p(y_i | config)
    labels = _draw_labels(np.maximum(predictive, 0.0), rng)
    P = state.P * point[:, labels].T
    configs = np.concatenate([state.configs, labels[:, None]], axis=1)
    return JointState(SAMPLED, P, configs, state.indices + (int(i),))


def joint_entropy_sampled(state: JointState, t: PosteriorTensor, i: int) -> float:
    """Importance-sampled joint entropy of ``state`` points plus candidate ``i``."""
    if state.mode != SAMPLED:
        raise ValueError("joint_entropy_sampled needs a sampled-mode state")
    return float(candidate_joint_entropies(state, t, [i])[0])


# ---------------------------------------------------------------------------
# batch score
# ---------------------------------------------------------------------------


def batchbald_score(
    t: PosteriorTensor,
    subset,
    exact_limit: int = DEFAULT_EXACT_LIMIT,
    m: int = DEFAULT_M,
    rng: np.random.Generator | None = None,
) -> EntropyBreakdown:
    """Joint mutual information between the labels of ``subset`` and ``w``.

    Exact enumeration when ``c ** len(subset) <= exact_limit``; otherwise ``m``
    configurations of all but the last point are sampled with ``rng``.
    """
    idx = [int(i) for i in _check_indices(t, subset)]
    if not idx:
        raise ValueError("subset must be non-empty")
    if len(set(idx)) != len(idx):
        raise ValueError(f"subset has repeated indices: {idx}")
    *context, last = idx
    if t.c ** len(idx) <= exact_limit:
        state = exact_state(t, context, exact_limit)
        mode = EXACT
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        state = sample_configurations(t, context, m, rng)
        mode = SAMPLED
    joint = float(candidate_joint_entropies(state, t, [last])[0])
    cond = float(_conditional_terms(t, idx).sum())
    return EntropyBreakdown(joint, cond, joint - cond, mode)
