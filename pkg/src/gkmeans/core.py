"""Generic k-means energies, pointwise cost, and the assignment step.

Shared by the smoothing-data association problem (spline centers) and, via
the generic Lloyd engine, by the passive tracking problem.  All functions are
pure; cluster indices run from 0 to k-1 and ties break toward the lowest
index so that runs are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class Observation2D:
    """A (time, value) data point for the association problem."""

    t: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.z)):
            raise ValueError("observation coordinates must be finite")


@dataclass(frozen=True)
class EnergyReport:
    """k-means energy split into mean min-cost and weighted penalty."""

    total: float
    data_term: float
    reg_term: float


@dataclass(frozen=True)
class MCEnergyEstimate:
    """Monte Carlo estimate of the limit energy with its standard error."""

    total: float
    data_term: float
    reg_term: float
    stderr: float


def data_arrays(data: Sequence[Observation2D]):
    """Extract (t, z) arrays from a sequence of observations."""
    t = np.fromiter((obs.t for obs in data), dtype=float, count=len(data))
    z = np.fromiter((obs.z for obs in data), dtype=float, count=len(data))
    return t, z


def pointwise_cost(obs: Observation2D, center) -> float:
    """Squared distance from the observed value to the trajectory at obs.t."""
    residual = obs.z - float(center(obs.t))
    return residual * residual


def cost_matrix(t: np.ndarray, z: np.ndarray, centers) -> np.ndarray:
    """(k, n) matrix of pointwise costs against each center."""
    return np.stack([(z - np.asarray(c(t), dtype=float)) ** 2 for c in centers])


def assign_partition(data: Sequence[Observation2D], centers) -> np.ndarray:
    """Assign each observation to its nearest center (lowest index on ties)."""
    if len(centers) == 0:
        raise ValueError("need at least one center")
    t, z = data_arrays(data)
    costs = cost_matrix(t, z, centers)
    # np.argmin returns the first minimum, which is the lowest cluster index.
    return np.argmin(costs, axis=0)


def kmeans_energy(data: Sequence[Observation2D], centers, lam: float) -> EnergyReport:
    """k-means energy: mean min-cost plus lam times total bending energy."""
    if len(data) == 0:
        raise ValueError("energy of an empty dataset is undefined")
    if len(centers) == 0:
        raise ValueError("need at least one center")
    t, z = data_arrays(data)
    costs = cost_matrix(t, z, centers)
    data_term = float(np.mean(np.min(costs, axis=0)))
    reg_term = float(lam) * sum(c.bending_energy() for c in centers)
    return EnergyReport(total=data_term + reg_term, data_term=data_term, reg_term=reg_term)


def permutation_accuracy(partition, labels) -> float:
    """Percent agreement with the labels under the best cluster relabeling."""
    import itertools

    partition = np.asarray(partition, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if partition.shape != labels.shape:
        raise ValueError("partition and labels must have equal length")
    k = int(max(partition.max(), labels.max())) + 1
    best = 0.0
    for perm in itertools.permutations(range(k)):
        mapped = np.asarray(perm)[partition]
        best = max(best, float(np.mean(mapped == labels)))
    return 100.0 * best


def limit_energy_mc(
    centers,
    sample_fn: Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]],
    lam: float,
    n_mc: int,
    rng: np.random.Generator,
) -> MCEnergyEstimate:
    """Monte Carlo estimate of the population energy at fixed centers.

    ``sample_fn(rng, n)`` must return fresh (t, z) draws from the data
    distribution.  The standard error refers to the data term only; the
    penalty term is deterministic.
    """
    if n_mc < 2:
        raise ValueError("n_mc must be at least 2")
    t, z = sample_fn(rng, n_mc)
    g = np.min(cost_matrix(t, z, centers), axis=0)
    data_term = float(np.mean(g))
    reg_term = float(lam) * sum(c.bending_energy() for c in centers)
    stderr = float(np.std(g, ddof=1) / np.sqrt(n_mc))
    return MCEnergyEstimate(
        total=data_term + reg_term,
        data_term=data_term,
        reg_term=reg_term,
        stderr=stderr,
    )
