"""Batch acquisition for Bayesian active learning by joint mutual information."""

from .acquisition import (
    AcquisitionError,
    AcquisitionRequest,
    AcquisitionResult,
    acquire,
    acquire_bald,
    acquire_batchbald,
    acquire_exhaustive,
    acquire_meanstd,
    acquire_random,
    acquire_varratios,
)
from .estimators import (
    EntropyBreakdown,
    JointState,
    bald_scores,
    batchbald_score,
    conditional_entropy,
    extend_joint_exact,
    extend_joint_sampled,
    joint_entropy_exact,
    joint_entropy_sampled,
    sample_configurations,
)
from .tensor_io import PosteriorTensor, random_tensor, read_tensor, validate_tensor, write_tensor

__version__ = "0.1.0"
