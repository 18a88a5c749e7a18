"""Exact-Bayes active-learning simulator.

The model is a finite ensemble of hypotheses. Each hypothesis ``h`` is a table
``p(y | f, h)`` over discrete feature buckets ``f``, and the posterior over
hypotheses is exact. Posterior tensors for the acquisition strategies are built
by drawing ``k`` hypotheses from the posterior and reading their tables at
each pool point's feature, the same draws serving every point.

Repeated pools contain exact copies of each prototype (same feature, same
label). A copy reveals nothing new: the posterior is conditioned on the set of
distinct prototypes whose labels have been acquired.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import entr, logsumexp

from . import seeding
from .acquisition import AcquisitionRequest, acquire
from .estimators import DEFAULT_EXACT_LIMIT
from .tensor_io import PosteriorTensor

LIKELIHOOD_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class HypothesisEnsemble:
    tables: np.ndarray  # (H, F, c)
    log_weights: np.ndarray  # (H,), normalised

    @property
    def H(self) -> int:
        return self.tables.shape[0]

    @property
    def F(self) -> int:
        return self.tables.shape[1]

    @property
    def c(self) -> int:
        return self.tables.shape[2]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def predictive(self, features) -> np.ndarray:
        """Posterior predictive ``p(y | f)`` for each feature, shape (len, c)."""
        return np.einsum("h,hfc->fc", self.weights, self.tables[:, np.asarray(features)])


@dataclass(frozen=True)
class SyntheticPool:
    """Pool points in prototype order: every prototype is followed by its copies."""

    features: np.ndarray
    labels: np.ndarray
    prototype: np.ndarray
    repetitions: int

    def __len__(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class TestSet:
    features: np.ndarray
    labels: np.ndarray


@dataclass
class RoundRecord:
    round: int
    train_size: int
    test_accuracy: float
    acquired: list[int]
    acquired_labels: list[int]
    label_entropy: float
    class_counts: list[int]


@dataclass
class ALTrace:
    strategy: str
    seed: int
    rounds: list[RoundRecord] = field(default_factory=list)

    @property
    def final_accuracy(self) -> float:
        return self.rounds[-1].test_accuracy

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([r.test_accuracy for r in self.rounds])


@dataclass(frozen=True)
class Scenario:
    hypotheses: int = 32
    features: int = 16
    classes: int = 4
    repetitions: int = 2
    prototypes_per_feature: int = 10
    concentration: float = 0.3
    test_size: int = 1000
    rounds: int = 10
    b: int = 4
    k: int = 64
    m: int = 10_000
    exact_limit: int = DEFAULT_EXACT_LIMIT

    @property
    def pool_size(self) -> int:
        return self.features * self.prototypes_per_feature * (self.repetitions + 1)


class BudgetError(ValueError):
    pass


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


def _normalise(log_w: np.ndarray) -> np.ndarray:
    return log_w - logsumexp(log_w)


def make_ensemble(H: int, F: int, c: int, concentration: float, seed: int) -> tuple[HypothesisEnsemble, int]:
    """Dirichlet-distributed tables, uniform prior, and a ground-truth index."""
    if H < 2 or F < 1 or c < 2:
        raise ValueError(f"need H >= 2, F >= 1, c >= 2; got H={H}, F={F}, c={c}")
    if not concentration > 0:
        raise ValueError("concentration must be positive")
    rng = seeding.rng(seed, "ensemble")
    tables = rng.dirichlet(np.full(c, float(concentration)), size=(H, F))
    # Dirichlet draws with tiny concentration can underflow to all-zero rows
    tables = np.where(np.isfinite(tables), tables, 0.0)
    sums = tables.sum(axis=2, keepdims=True)
    tables = np.where(sums > 0, tables / np.where(sums > 0, sums, 1.0), 1.0 / c)
    truth = int(rng.integers(H))
    return HypothesisEnsemble(tables, np.full(H, -np.log(H))), truth


def posterior_update(e: HypothesisEnsemble, feature: int, label: int) -> HypothesisEnsemble:
    if not (0 <= feature < e.F and 0 <= label < e.c):
        raise IndexError(f"feature {feature} / label {label} out of range")
    lik = np.maximum(e.tables[:, feature, label], LIKELIHOOD_FLOOR)
    return replace(e, log_weights=_normalise(e.log_weights + np.log(lik)))


def condition(e: HypothesisEnsemble, features, labels) -> HypothesisEnsemble:
    """Posterior after a batch of observations, in one vectorised update."""
    features = np.asarray(features, dtype=np.intp)
    labels = np.asarray(labels, dtype=np.intp)
    if features.size == 0:
        return e
    lik = np.maximum(e.tables[:, features, labels], LIKELIHOOD_FLOOR)
    return replace(e, log_weights=_normalise(e.log_weights + np.log(lik).sum(axis=1)))


def make_pool(
    e: HypothesisEnsemble, truth: int, prototypes_per_feature: int, repetitions: int, seed: int
) -> SyntheticPool:
    rng = seeding.rng(seed, "pool")
    proto_features = np.repeat(np.arange(e.F), prototypes_per_feature)
    proto_labels = np.array(
        [rng.choice(e.c, p=e.tables[truth, f]) for f in proto_features], dtype=np.intp
    )
    copies = repetitions + 1
    return SyntheticPool(
        features=np.repeat(proto_features, copies),
        labels=np.repeat(proto_labels, copies),
        prototype=np.repeat(np.arange(proto_features.size), copies),
        repetitions=repetitions,
    )


def make_test_set(e: HypothesisEnsemble, truth: int, size: int, seed: int) -> TestSet:
    rng = seeding.rng(seed, "test")
    features = rng.integers(e.F, size=size)
    cdf = np.cumsum(e.tables[truth, features], axis=1)
    labels = np.minimum((cdf <= rng.random(size)[:, None]).sum(axis=1), e.c - 1)
    return TestSet(features, labels)


def test_accuracy(e: HypothesisEnsemble, test: TestSet) -> float:
    pred = e.predictive(test.features).argmax(axis=1)
    return float((pred == test.labels).mean())


test_accuracy.__test__ = False  # not a pytest test


def sample_posterior_tensor(e: HypothesisEnsemble, features, k: int, seed: int) -> tuple[PosteriorTensor, np.ndarray]:
    """``k`` posterior draws shared across all points; returns tensor and draws."""
    if k < 1:
        raise ValueError("k must be >= 1")
    draws = seeding.rng(seed, "posterior").choice(e.H, size=k, p=e.weights / e.weights.sum())
    probs = e.tables[draws][:, np.asarray(features, dtype=np.intp)].transpose(1, 0, 2)
    return PosteriorTensor(np.ascontiguousarray(probs)), draws


def exact_bald(e: HypothesisEnsemble, feature: int) -> float:
    rows = e.tables[:, feature]
    w = e.weights
    return float(entr(w @ rows).sum() - w @ entr(rows).sum(axis=1))


def exact_conditional_mi(e: HypothesisEnsemble, pool: SyntheticPool, target: int, conditioning=()) -> float:
    """``I[y_target ; w | observed labels]`` under the full weighted ensemble.

    ``conditioning`` is a sequence of ``(pool_index, label)`` pairs.
    """
    pairs = list(conditioning)
    if pairs:
        idx, labels = zip(*pairs)
        e = condition(e, pool.features[list(idx)], labels)
    return exact_bald(e, int(pool.features[target]))


# ---------------------------------------------------------------------------
# loop
# ---------------------------------------------------------------------------


def label_entropy(labels, c: int) -> tuple[float, list[int]]:
    counts = np.bincount(np.asarray(labels, dtype=np.intp), minlength=c)
    if counts.sum() == 0:
        return 0.0, counts.tolist()
    return float(entr(counts / counts.sum()).sum()), counts.tolist()


def run_al_loop(
    e: HypothesisEnsemble,
    pool: SyntheticPool,
    test: TestSet,
    strategy: str,
    rounds: int,
    b: int,
    k: int,
    m: int,
    seed: int,
    exact_limit: int = DEFAULT_EXACT_LIMIT,
) -> ALTrace:
    """Run ``rounds`` acquisitions of size ``b`` starting from the prior ``e``."""
    if rounds * b > len(pool):
        raise BudgetError(f"rounds*b = {rounds * b} exceeds pool size {len(pool)}")
    trace = ALTrace(strategy, seed)
    acquired: list[int] = []
    labels: list[int] = []
    trace.rounds.append(RoundRecord(0, 0, test_accuracy(e, test), [], [], 0.0, [0] * e.c))
    for rnd in range(1, rounds + 1):
        # recompute the posterior from scratch on distinct labelled prototypes
        _, first = np.unique(pool.prototype[acquired], return_index=True) if acquired else ((), [])
        seen = np.asarray(acquired, dtype=np.intp)[np.asarray(first, dtype=np.intp)]
        post = condition(e, pool.features[seen], pool.labels[seen])

        remaining = np.setdiff1d(np.arange(len(pool)), acquired)
        tensor, _ = sample_posterior_tensor(post, pool.features[remaining], k, seeding.child_seed(seed, "round", rnd))
        req = AcquisitionRequest(strategy, b, m, exact_limit, seeding.child_seed(seed, "acquire", rnd))
        picked = [int(remaining[i]) for i in acquire(tensor, req).indices]
        acquired.extend(picked)
        labels.extend(int(pool.labels[i]) for i in picked)

        _, first = np.unique(pool.prototype[acquired], return_index=True)
        seen = np.asarray(acquired, dtype=np.intp)[first]
        post = condition(e, pool.features[seen], pool.labels[seen])
        ent, counts = label_entropy(labels, e.c)
        trace.rounds.append(
            RoundRecord(
                rnd,
                len(acquired),
                test_accuracy(post, test),
                picked,
                [int(pool.labels[i]) for i in picked],
                ent,
                counts,
            )
        )
    return trace


def label_diversity(trace: ALTrace) -> tuple[list[float], list[tuple[int, int]]]:
    """Cumulative acquired-label entropy per round and the final class histogram.

    The histogram is a list of ``(class, count)`` sorted by descending count.
    """
    if not trace.rounds:
        raise ValueError("empty trace")
    entropies = [r.label_entropy for r in trace.rounds]
    final = Counter({cls: n for cls, n in enumerate(trace.rounds[-1].class_counts)})
    hist = sorted(final.items(), key=lambda kv: (-kv[1], kv[0]))
    return entropies, hist


def labels_to_threshold(trace: ALTrace, threshold: float) -> int:
    """Training-set size at the first round reaching ``threshold`` accuracy.

    Returns one batch past the budget when the threshold is never reached.
    """
    for r in trace.rounds:
        if r.test_accuracy >= threshold:
            return r.train_size
    last = trace.rounds[-1]
    step = trace.rounds[1].train_size if len(trace.rounds) > 1 else 1
    return last.train_size + step


def run_scenario(sc: Scenario, strategy: str, seed: int) -> tuple[ALTrace, float]:
    """One trial; returns the trace and the ground-truth hypothesis' test accuracy."""
    e, truth = make_ensemble(sc.hypotheses, sc.features, sc.classes, sc.concentration, seeding.child_seed(seed, "model"))
    pool = make_pool(e, truth, sc.prototypes_per_feature, sc.repetitions, seeding.child_seed(seed, "model"))
    test = make_test_set(e, truth, sc.test_size, seeding.child_seed(seed, "model"))
    oracle = float((e.tables[truth, test.features].argmax(axis=1) == test.labels).mean())
    trace = run_al_loop(e, pool, test, strategy, sc.rounds, sc.b, sc.k, sc.m, seed, sc.exact_limit)
    return trace, oracle
