"""privcalc: a small calculus for building and checking differentially private programs."""

from privcalc.core import (
    ABSOLUTE,
    APPROX_DP,
    CHANGE_ONE,
    L1,
    PER_PIECE,
    PURE_DP,
    SYMMETRIC,
    Dataset,
    DatasetDomain,
    Measurement,
    PrivacyLoss,
    PrivacyMap,
    ScalarDomain,
    Schema,
    StabilityMap,
    Transformation,
    loss_at,
    make_measurement,
    make_transformation,
)
from privcalc.combinators import chain_mt, chain_tt, compose_basic, compose_parallel, pipeline, postprocess
from privcalc.mechanisms import laplace_noise, noisy_average, noisy_count, noisy_sum, randomized_response
from privcalc.transforms import PartitionSpec

__all__ = [
    "ABSOLUTE", "APPROX_DP", "CHANGE_ONE", "L1", "PER_PIECE", "PURE_DP", "SYMMETRIC",
    "Dataset", "DatasetDomain", "Measurement", "PrivacyLoss", "PrivacyMap", "ScalarDomain",
    "Schema", "StabilityMap", "Transformation", "loss_at", "make_measurement", "make_transformation",
    "chain_mt", "chain_tt", "compose_basic", "compose_parallel", "pipeline", "postprocess",
    "laplace_noise", "noisy_average", "noisy_count", "noisy_sum", "randomized_response",
    "PartitionSpec",
]

__version__ = "0.1.0"
