import functools
import os
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import settings

from batchbald.bayes_sim import Scenario, run_scenario
from batchbald.seeding import child_seed
from batchbald.tensor_io import PosteriorTensor

settings.register_profile("ci", max_examples=60, deadline=None)
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

LN2 = float(np.log(2.0))


def one_hot(labels, c=2):
    return np.eye(c)[list(labels)]


@pytest.fixture
def flip_point():
    """k=2 point whose prediction flips with the parameter sample."""
    return np.array([[1.0, 0.0], [0.0, 1.0]])


@pytest.fixture
def soft_flip():
    return np.array([[0.8, 0.2], [0.2, 0.8]])


@pytest.fixture
def dup_pool():
    """Pool {A, A_dup, B}, k=4: A tracks the first parameter bit, B the second."""
    a = one_hot([0, 0, 1, 1])
    b = one_hot([0, 1, 0, 1])
    return PosteriorTensor(np.stack([a, a, b]))


# Golden PTF1 fixtures; the bytes under tests/fixtures/ were written from these.
def golden_tensors():
    return {
        "small_3x2x2": PosteriorTensor(
            [[[0.5, 0.5], [0.25, 0.75]], [[1.0, 0.0], [0.0, 1.0]], [[0.125, 0.875], [0.625, 0.375]]]
        ),
        "dup_pool_3x4x2": PosteriorTensor(np.stack([one_hot([0, 0, 1, 1])] * 2 + [one_hot([0, 1, 0, 1])])),
        "ternary_2x3x3": PosteriorTensor(
            [
                [[0.5, 0.25, 0.25], [0.0, 0.5, 0.5], [1.0, 0.0, 0.0]],
                [[0.0625, 0.4375, 0.5], [0.75, 0.125, 0.125], [0.3125, 0.3125, 0.375]],
            ]
        ),
    }


# Repeated-pool experiment shared by the simulator tests and the acceptance gate.
ABLATION_TRIALS = 20
ABLATION_REPETITIONS = (0, 1, 2, 4)


@functools.lru_cache(maxsize=None)
def repetition_ablation():
    """{(r, strategy): [(trace, oracle accuracy), ...]} over the CLI trial seeds.

    All three strategies run at the default r; BALD and BatchBALD run at every r.
    """
    base = Scenario()
    seeds = [child_seed(0, "trial", i) for i in range(ABLATION_TRIALS)]
    runs = {}
    for r in ABLATION_REPETITIONS:
        strategies = ("batchbald", "random", "bald") if r == base.repetitions else ("batchbald", "bald")
        for s in strategies:
            sc = replace(base, repetitions=r)
            runs[r, s] = [run_scenario(sc, s, seed) for seed in seeds]
    return runs
