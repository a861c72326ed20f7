"""Alternating-minimization k-means engine with multistart.

The engine is generic over a clustering problem: it only needs a per-cluster
fitting routine, a per-center cost row over all observations, and a per-center
penalty.  The association problem plugs in smoothing-spline fits; the tracking
problem plugs in nonlinear track fits.  Convergence is partition equality,
exactly the fixed-point test of the underlying iterative scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .core import EnergyReport
from .seeds import child_seed, generator_from


class EmptyClusterError(RuntimeError):
    """A cluster lost all observations under the drop-error policy."""


@dataclass(frozen=True)
class LloydConfig:
    k: int
    lam: float = 0.0
    max_iter: int = 100
    empty_cluster_policy: str = "reseed-farthest"
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.empty_cluster_policy not in ("reseed-farthest", "drop-error"):
            raise ValueError(f"unknown empty-cluster policy: {self.empty_cluster_policy!r}")


@dataclass(frozen=True)
class ClusterProblem:
    """Callables tying the engine to a concrete center space.

    ``fit_cluster(indices, seed_seq, warm)`` fits one center to the
    observations at ``indices``, optionally warm-started from the previous
    iteration's center; ``cost_rows(center)`` returns the cost of every
    observation against that center; ``center_penalty(center)`` is the
    regularizer value (weighted by the config's lam in the energy).
    """

    n: int
    fit_cluster: Callable[..., Any]
    cost_rows: Callable[[Any], np.ndarray]
    center_penalty: Callable[[Any], float] = field(default=lambda center: 0.0)


@dataclass(frozen=True)
class FitResult:
    centers: tuple
    partition: np.ndarray
    energy: EnergyReport
    iterations: int
    converged: bool
    energy_history: tuple[float, ...]


def random_partition(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random assignment of each observation to one of k clusters."""
    return rng.integers(0, k, size=n)


def _energy(cost_stack, penalties, lam) -> EnergyReport:
    data_term = float(np.mean(np.min(cost_stack, axis=0)))
    reg_term = float(lam) * float(sum(penalties))
    return EnergyReport(total=data_term + reg_term, data_term=data_term, reg_term=reg_term)


def _fit_centers(problem, config, partition, seed_seq, iteration, previous):
    """Fit all centers; resolve empty clusters per the configured policy."""
    k = config.k
    counts = np.bincount(partition, minlength=k)
    centers: list = [None] * k
    for j in range(k):
        if counts[j] > 0:
            idx = np.nonzero(partition == j)[0]
            warm = previous[j] if previous is not None else None
            centers[j] = problem.fit_cluster(idx, child_seed(seed_seq, iteration, j), warm)
    for j in range(k):
        if counts[j] > 0:
            continue
        if config.empty_cluster_policy == "drop-error":
            raise EmptyClusterError(f"cluster {j} became empty at iteration {iteration}")
        fitted = [c for c in centers if c is not None]
        min_cost = np.min(np.stack([problem.cost_rows(c) for c in fitted]), axis=0)
        eligible = counts[partition] > 1
        if not eligible.any():
            raise EmptyClusterError("cannot reseed: every remaining cluster is a singleton")
        scores = np.where(eligible, min_cost, -np.inf)
        i_star = int(np.argmax(scores))
        donor = int(partition[i_star])
        counts[donor] -= 1
        partition[i_star] = j
        counts[j] = 1
        centers[j] = problem.fit_cluster(
            np.array([i_star]), child_seed(seed_seq, iteration, j), None
        )
        # refit the donor without the moved point so the returned centers are
        # exactly the per-cluster fits of the returned partition
        donor_idx = np.nonzero(partition == donor)[0]
        centers[donor] = problem.fit_cluster(
            donor_idx, child_seed(seed_seq, iteration, donor), centers[donor]
        )
    return centers, partition


def lloyd_run(
    problem: ClusterProblem,
    config: LloydConfig,
    initial_partition: Sequence[int],
    seed_seq: np.random.SeedSequence | None = None,
) -> FitResult:
    """Alternate center refits and reassignment until the partition is fixed.

    The reseed-farthest policy moves the observation with the largest current
    min-cost into an emptied cluster, refits both the singleton and its donor,
    and continues; the singleton fit has zero cost and zero penalty, so the
    energy stays non-increasing.
    """
    if problem.n < 1:
        raise ValueError("dataset must be nonempty")
    partition = np.asarray(initial_partition, dtype=int).copy()
    if partition.shape != (problem.n,):
        raise ValueError("initial partition length must match the dataset size")
    if partition.min() < 0 or partition.max() >= config.k:
        raise ValueError("initial partition entries must lie in [0, k)")
    if seed_seq is None:
        seed_seq = child_seed(np.random.SeedSequence(config.seed), "lloyd")

    history: list[float] = []
    converged = False
    iterations = 0
    centers: list | None = None
    report = None
    for iteration in range(config.max_iter):
        iterations = iteration + 1
        centers, partition = _fit_centers(
            problem, config, partition, seed_seq, iteration, centers
        )
        cost_stack = np.stack([problem.cost_rows(c) for c in centers])
        new_partition = np.argmin(cost_stack, axis=0)
        report = _energy(cost_stack, [problem.center_penalty(c) for c in centers], config.lam)
        history.append(report.total)
        if np.array_equal(new_partition, partition):
            converged = True
            break
        partition = new_partition
    return FitResult(
        centers=tuple(centers),
        partition=partition,
        energy=report,
        iterations=iterations,
        converged=converged,
        energy_history=tuple(history),
    )


def multistart(
    problem: ClusterProblem,
    config: LloydConfig,
    n_starts: int,
    seed_seq: np.random.SeedSequence | None = None,
) -> FitResult:
    """Best of n_starts Lloyd runs from seeded uniform random partitions.

    Start s derives its seeds from (seed, s), so the first run of a larger
    multistart reproduces a smaller one exactly.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    root = np.random.SeedSequence(config.seed) if seed_seq is None else seed_seq
    best: FitResult | None = None
    for s in range(n_starts):
        rng = generator_from(child_seed(root, s, 0))
        init = random_partition(problem.n, config.k, rng)
        result = lloyd_run(problem, config, init, seed_seq=child_seed(root, s, 1))
        if best is None or result.energy.total < best.energy.total:
            best = result
    return best
