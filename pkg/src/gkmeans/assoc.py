"""Smoothing-data association experiments: generators, metrics, Monte Carlo.

Covers the polynomial-trajectory mixture generator, the trajectory-recovery
metric, association accuracy, the Monte Carlo convergence suite over growing
dataset sizes, and the crossing-tracks energy study.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .core import Observation2D, cost_matrix, permutation_accuracy
from .lloyd import ClusterProblem, FitResult, LloydConfig, lloyd_run, multistart
from .seeds import child_seed, generator_from
from .spline import fit_smoothing_spline, l2_distance


@dataclass(frozen=True)
class PolyTrajectory:
    """Polynomial trajectory on [0, t_max]; coefficients in ascending order."""

    coeffs: tuple[float, ...]
    t_max: float

    def __call__(self, t):
        return npoly.polyval(np.asarray(t, dtype=float), self.coeffs)

    def bending_energy(self) -> float:
        """Exact integral of the squared second derivative over [0, t_max]."""
        d2 = npoly.polyder(self.coeffs, 2)
        sq = npoly.polymul(d2, d2)
        anti = npoly.polyint(sq)
        return float(npoly.polyval(self.t_max, anti) - npoly.polyval(0.0, anti))


@dataclass(frozen=True)
class GenModel:
    """Mixture of polynomial trajectories observed under truncated noise."""

    k: int
    T: float
    trajectories: tuple[PolyTrajectory, ...]
    weights: tuple[float, ...]
    noise_var: float
    noise_bound: float

    def __post_init__(self):
        if len(self.trajectories) != self.k or len(self.weights) != self.k:
            raise ValueError("need one trajectory and one weight per cluster")
        if not math.isclose(sum(self.weights), 1.0, rel_tol=1e-9):
            raise ValueError("weights must sum to 1")
        if min(self.weights) <= 0:
            raise ValueError("weights must be positive")
        if self.noise_var <= 0 or self.noise_bound <= 0:
            raise ValueError("noise variance and truncation bound must be positive")

    def sample_arrays(self, n: int, rng: np.random.Generator):
        """Draw n observations; returns (t, z, labels)."""
        labels = rng.choice(self.k, size=n, p=self.weights)
        t = rng.uniform(0.0, self.T, size=n)
        eps = sample_truncated_normal(self.noise_var, self.noise_bound, rng, size=n)
        z = np.empty(n)
        for j in range(self.k):
            mask = labels == j
            z[mask] = self.trajectories[j](t[mask])
        z += eps
        return t, z, labels

    def sampler(self):
        """(rng, n) -> (t, z) closure for Monte Carlo energy estimates."""
        return lambda rng, n: self.sample_arrays(n, rng)[:2]


def figure1_model() -> GenModel:
    """Three-trajectory benchmark: parabola, line, constant; N(0,5) cut at 100."""
    T = 10.0
    return GenModel(
        k=3,
        T=T,
        trajectories=(
            PolyTrajectory((-15.0, -2.0, 0.2), T),
            PolyTrajectory((5.0, 1.0), T),
            PolyTrajectory((40.0,), T),
        ),
        weights=(1 / 3, 1 / 3, 1 / 3),
        noise_var=5.0,
        noise_bound=100.0,
    )


def crossing_model() -> GenModel:
    """Two tracks that intersect near t = 8.63: a parabola and a line."""
    T = 11.0
    return GenModel(
        k=2,
        T=T,
        trajectories=(
            PolyTrajectory((-20.0, 0.0, 1.0), T),
            PolyTrajectory((20.0, 4.0), T),
        ),
        weights=(0.5, 0.5),
        noise_var=5.0,
        noise_bound=math.inf,
    )


def sample_truncated_normal(variance: float, bound: float, rng: np.random.Generator, size=None):
    """Draw from N(0, variance) conditioned on |x| <= bound by rejection."""
    if variance <= 0 or bound <= 0:
        raise ValueError("variance and bound must be positive")
    sd = math.sqrt(variance)
    if size is None:
        while True:
            x = rng.normal(0.0, sd)
            if abs(x) <= bound:
                return x
    out = rng.normal(0.0, sd, size=size)
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = rng.normal(0.0, sd, size=int(bad.sum()))
        bad = np.abs(out) > bound
    return out


def sample_dataset(model: GenModel, n: int, rng: np.random.Generator):
    """Draw n observations from the model; returns (observations, labels)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    t, z, labels = model.sample_arrays(n, rng)
    data = [Observation2D(float(ti), float(zi)) for ti, zi in zip(t, z)]
    return data, labels


def spline_problem(t: np.ndarray, z: np.ndarray, lam: float) -> ClusterProblem:
    """Clustering problem whose centers are smoothing splines of the data."""
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    n = t.size

    def fit_cluster(indices, seed_seq, warm=None):
        # The spline refit is exact; no warm start or randomness is needed.
        return fit_smoothing_spline(t[indices], z[indices], lam, n)

    def cost_rows(center):
        return (z - center(t)) ** 2

    return ClusterProblem(
        n=n,
        fit_cluster=fit_cluster,
        cost_rows=cost_rows,
        center_penalty=lambda c: c.bending_energy(),
    )


def fit_association(
    t,
    z,
    k: int,
    lam: float,
    n_starts: int,
    seed,
    max_iter: int = 100,
) -> FitResult:
    """Multistart spline k-means on raw (t, z) arrays."""
    problem = spline_problem(t, z, lam)
    config = LloydConfig(k=k, lam=lam, max_iter=max_iter)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return multistart(problem, config, n_starts, seed_seq=root)


def eta_metric(centers, model: GenModel, n_grid: int = 2001) -> float:
    """Trajectory-recovery error, minimized over center labelings."""
    if len(centers) != model.k:
        raise ValueError("number of centers must equal the model's k")
    k = model.k
    dists = np.empty((k, k))
    for i, c in enumerate(centers):
        for j, truth in enumerate(model.trajectories):
            dists[i, j] = l2_distance(c, truth, (0.0, model.T), n_grid)
    best = min(
        sum(dists[perm[j], j] ** 2 for j in range(k))
        for perm in itertools.permutations(range(k))
    )
    return math.sqrt(best) / k


def association_accuracy(partition, labels) -> float:
    """Percent of observations matching the truth under the best relabeling."""
    return permutation_accuracy(partition, labels)


def truth_energy(t, z, labels, k: int, lam: float):
    """Energy of the spline projections of the generating trajectories.

    Fits one spline per true cluster and evaluates the k-means energy there;
    the fitted minimum is typically below this value.
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    n = t.size
    centers = []
    for j in range(k):
        mask = labels == j
        if not mask.any():
            raise ValueError(f"true cluster {j} has no observations")
        centers.append(fit_smoothing_spline(t[mask], z[mask], lam, n))
    costs = cost_matrix(t, z, centers)
    data_term = float(np.mean(np.min(costs, axis=0)))
    return data_term + lam * sum(c.bending_energy() for c in centers)


@dataclass(frozen=True)
class TrialStats:
    eta: float
    energy: float
    accuracy_pct: float
    iterations: int


@dataclass(frozen=True)
class CellSummary:
    """All trial statistics for one grid cell plus derived summaries."""

    cell_value: float
    trials: tuple[TrialStats, ...]
    below_truth_frac: float

    def quantile(self, field: str, pct: float) -> float:
        values = sorted(getattr(s, field) for s in self.trials)
        return float(values[nearest_rank(len(values), pct)])


def nearest_rank(n: int, pct: float) -> int:
    """0-based index of the nearest-rank percentile in a sorted sample."""
    return min(max(math.ceil(pct / 100.0 * n) - 1, 0), n - 1)


def association_suite(
    model: GenModel,
    n_grid,
    trials: int,
    n_starts: int,
    lam: float,
    master_seed: int,
    max_iter: int = 100,
    eta_grid: int = 2001,
) -> list[CellSummary]:
    """Monte Carlo convergence study over a grid of dataset sizes.

    Trial (cell, index) draws its data and multistart streams from seeds
    derived as (master_seed, cell, index), so cells and trials can be
    evaluated in any order without changing the results.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    root = np.random.SeedSequence(master_seed)
    cells = []
    for ci, n in enumerate(n_grid):
        stats = []
        below = 0
        for ti in range(trials):
            trial_seed = child_seed(root, ci, ti)
            t, z, labels = model.sample_arrays(n, generator_from(child_seed(trial_seed, "data")))
            result = fit_association(
                t, z, model.k, lam, n_starts, child_seed(trial_seed, "fit"), max_iter
            )
            stats.append(
                TrialStats(
                    eta=eta_metric(result.centers, model, eta_grid),
                    energy=result.energy.total,
                    accuracy_pct=association_accuracy(result.partition, labels),
                    iterations=result.iterations,
                )
            )
            if result.energy.total <= truth_energy(t, z, labels, model.k, lam):
                below += 1
        cells.append(
            CellSummary(cell_value=float(n), trials=tuple(stats), below_truth_frac=below / trials)
        )
    return cells


def crossing_time(model: GenModel) -> float:
    """First intersection time of the two trajectories, from the coefficients.

    Identical trajectories intersect everywhere; the first crossing is then 0
    and swapping labels after it is a pure relabeling.
    """
    if model.k != 2:
        raise ValueError("crossing time is defined for two-trajectory models")
    a = np.asarray(model.trajectories[0].coeffs)
    b = np.asarray(model.trajectories[1].coeffs)
    width = max(a.size, b.size)
    diff = np.zeros(width)
    diff[: a.size] += a
    diff[: b.size] -= b
    if np.max(np.abs(diff)) < 1e-12:
        return 0.0
    roots = np.roots(diff[::-1])
    real = roots[np.abs(roots.imag) < 1e-9].real
    valid = sorted(r for r in real if 0.0 < r <= model.T)
    if not valid:
        raise ValueError("trajectories do not cross inside [0, T]")
    return float(valid[0])


@dataclass(frozen=True)
class CrossingTrial:
    """Outcome of one crossing-tracks trial.

    ``delta_e`` is the non-crossing minus the crossing per-time energy, where
    each hypothesis energy comes from a Lloyd descent started at that
    hypothesis' association; positive values favor the crossing (correct)
    association.  ``found_crossing`` reports whether the multistart solution
    (energy ``e_best``) agrees better with the crossing hypothesis than with
    the non-crossing one.
    """

    delta_e: float
    found_crossing: bool
    e_cross: float
    e_noncross: float
    e_best: float


def _balanced_crossing_data(model: GenModel, n: int, rng: np.random.Generator):
    """n observations split evenly between the two tracks over [0, T]."""
    counts = [n - n // 2, n // 2]
    t_parts, z_parts, label_parts = [], [], []
    for j, nj in enumerate(counts):
        tj = rng.uniform(0.0, model.T, size=nj)
        eps = sample_truncated_normal(model.noise_var, model.noise_bound, rng, size=nj)
        t_parts.append(tj)
        z_parts.append(model.trajectories[j](tj) + eps)
        label_parts.append(np.full(nj, j, dtype=int))
    return np.concatenate(t_parts), np.concatenate(z_parts), np.concatenate(label_parts)


def crossing_trial(
    model: GenModel,
    t_fit: float,
    n: int,
    lam: float,
    seed,
    n_starts: int = 1,
    max_iter: int = 100,
) -> CrossingTrial:
    """Compare the crossing and non-crossing association hypotheses.

    Data are generated on [0, T] with n/2 points per track and restricted to
    t <= t_fit.  Each hypothesis energy is the converged energy of a Lloyd run
    started from that hypothesis' partition, divided by t_fit.  The detection
    flag uses a fresh run from ``n_starts`` random initializations; with the
    default single start the detection rate stabilizes near the reported
    two-thirds level once the horizon is well past the crossing.
    """
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    t_c = crossing_time(model)
    t, z, labels = _balanced_crossing_data(model, n, generator_from(child_seed(root, "data")))
    mask = t <= t_fit
    t_r, z_r, labels_r = t[mask], z[mask], labels[mask]

    swapped = np.where(t_r > t_c, 1 - labels_r, labels_r)
    problem = spline_problem(t_r, z_r, lam)
    config = LloydConfig(k=2, lam=lam, max_iter=max_iter)
    fit_cross = lloyd_run(problem, config, labels_r, seed_seq=child_seed(root, "hc"))
    fit_non = lloyd_run(problem, config, swapped, seed_seq=child_seed(root, "hnc"))
    e_cross = fit_cross.energy.total / t_fit
    e_noncross = fit_non.energy.total / t_fit

    best = multistart(problem, config, n_starts, seed_seq=child_seed(root, "ms"))
    acc_cross = association_accuracy(best.partition, labels_r)
    acc_non = association_accuracy(best.partition, swapped)
    return CrossingTrial(
        delta_e=e_noncross - e_cross,
        found_crossing=acc_cross > acc_non,
        e_cross=e_cross,
        e_noncross=e_noncross,
        e_best=best.energy.total / t_fit,
    )


@dataclass(frozen=True)
class CrossingCell:
    t_fit: float
    trials: int
    delta_e_mean: float
    delta_e_std: float
    detect_pct: float


def crossing_suite(
    model: GenModel,
    t_grid,
    trials: int,
    n: int,
    lam: float,
    master_seed: int,
    n_starts: int = 1,
    max_iter: int = 100,
) -> list[CrossingCell]:
    """Mean energy gap and crossing-detection rate over a grid of horizons."""
    root = np.random.SeedSequence(master_seed)
    cells = []
    for ci, t_fit in enumerate(t_grid):
        gaps = np.empty(trials)
        found = 0
        for ti in range(trials):
            out = crossing_trial(
                model, t_fit, n, lam, child_seed(root, ci, ti), n_starts, max_iter
            )
            gaps[ti] = out.delta_e
            found += int(out.found_crossing)
        cells.append(
            CrossingCell(
                t_fit=float(t_fit),
                trials=trials,
                delta_e_mean=float(np.mean(gaps)),
                delta_e_std=float(np.std(gaps, ddof=1)) if trials > 1 else 0.0,
                detect_pct=100.0 * found / trials,
            )
        )
    return cells


def calibrate_crossing_trials(
    model: GenModel,
    t_fit: float,
    n: int,
    lam: float,
    master_seed: int,
    target: int = 100,
    max_trials: int = 100000,
    n_starts: int = 1,
) -> int:
    """Adaptive pre-run sizing: grow until both outcome counts reach target.

    Runs trials until at least ``target`` crossing and ``target`` non-crossing
    outcomes have been seen, then recommends ten times the total count.
    """
    root = np.random.SeedSequence(master_seed)
    n_c = n_nc = 0
    for ti in range(max_trials):
        out = crossing_trial(model, t_fit, n, lam, child_seed(root, "cal", ti), n_starts)
        if out.found_crossing:
            n_c += 1
        else:
            n_nc += 1
        if min(n_c, n_nc) >= target:
            return 10 * (n_c + n_nc)
    raise RuntimeError("calibration did not reach the target outcome counts")
