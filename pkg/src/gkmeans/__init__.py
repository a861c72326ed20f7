"""Generalized k-means clustering with out-of-space cluster centers."""

from .core import (
    EnergyReport,
    MCEnergyEstimate,
    Observation2D,
    assign_partition,
    kmeans_energy,
    limit_energy_mc,
    permutation_accuracy,
    pointwise_cost,
)
from .lloyd import (
    ClusterProblem,
    EmptyClusterError,
    FitResult,
    LloydConfig,
    lloyd_run,
    multistart,
    random_partition,
)
from .spline import (
    PenaltyMatrices,
    SplineCenter,
    bending_energy,
    build_penalty,
    evaluate_spline,
    fit_smoothing_spline,
    l2_distance,
)

__version__ = "0.1.0"

__all__ = [
    "EnergyReport",
    "MCEnergyEstimate",
    "Observation2D",
    "assign_partition",
    "kmeans_energy",
    "limit_energy_mc",
    "permutation_accuracy",
    "pointwise_cost",
    "ClusterProblem",
    "EmptyClusterError",
    "FitResult",
    "LloydConfig",
    "lloyd_run",
    "multistart",
    "random_partition",
    "PenaltyMatrices",
    "SplineCenter",
    "bending_energy",
    "build_penalty",
    "evaluate_spline",
    "fit_smoothing_spline",
    "l2_distance",
    "__version__",
]
