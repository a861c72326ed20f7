"""Passive multi-sensor tracking: pulse model, track fitting, experiments.

Targets moving on straight lines emit one pulse per frame of length tau at a
constant per-target offset; each sensor records a time of arrival and a
log-amplitude.  Cluster centers are finite-dimensional (initial position,
velocity, offset) tuples fitted per cluster by damped Gauss-Newton
(Levenberg-Marquardt) with a finite-difference Jacobian over the weighted
squared residuals.  No curvature penalty is needed in this finite-dimensional
center space.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import permutation_accuracy
from .lloyd import ClusterProblem, LloydConfig, multistart
from .seeds import child_seed, generator_from
from .spline import simpson_nodes


@dataclass(frozen=True)
class SensorNet:
    """Known sensor geometry and signal constants."""

    sensor_positions: tuple[tuple[float, float], ...]
    c: float
    tau: float
    alpha: float
    beta: float
    sigma: float
    nu: float
    T: float

    def __post_init__(self):
        if len(self.sensor_positions) < 1:
            raise ValueError("need at least one sensor")
        for name in ("c", "tau", "alpha", "beta", "sigma", "nu", "T"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def sensors(self) -> np.ndarray:
        return np.asarray(self.sensor_positions, dtype=float)


@dataclass(frozen=True)
class TrackParams:
    """Straight-line track center: x(t) = x0 + v t, offset o within a frame."""

    x0: tuple[float, float]
    v: tuple[float, float]
    o: float
    converged: bool = field(default=True, compare=False)

    def position(self, t):
        t = np.asarray(t, dtype=float)
        return np.asarray(self.x0) + t[..., None] * np.asarray(self.v)

    def theta(self) -> np.ndarray:
        return np.array([*self.x0, *self.v, self.o])


@dataclass(frozen=True)
class PulseObservation:
    """One detection: time of arrival, log-amplitude, sensor index."""

    t: float
    a: float
    p: int


def paper_net(T: float = 200.0) -> SensorNet:
    """Three-sensor benchmark configuration (horizon shortened by default)."""
    return SensorNet(
        sensor_positions=((-10.0, -10.0), (10.0, -10.0), (0.0, 10.0)),
        c=100.0,
        tau=1.0,
        alpha=1e8,
        beta=5.0,
        sigma=0.03,
        nu=0.05,
        T=T,
    )


def paper_tracks() -> tuple[TrackParams, TrackParams]:
    """The two benchmark targets: a diagonal drifter and a westbound track."""
    s = math.sqrt(2.0) / 400.0
    return (
        TrackParams(x0=(0.0, 5.0), v=(s, s), o=0.3),
        TrackParams(x0=(6.0, 7.0), v=(-1.0 / 125.0, 0.0), o=0.6),
    )


def emission_index(t, tau: float):
    """Frame index max{m : m*tau <= t}, robust at the frame boundaries."""
    t_arr = np.asarray(t, dtype=float)
    m = np.floor(t_arr / tau)
    m = np.where((m + 1.0) * tau <= t_arr, m + 1.0, m)
    m = np.where(m * tau > t_arr, m - 1.0, m)
    m_int = m.astype(int)
    return int(m_int) if np.isscalar(t) or t_arr.ndim == 0 else m_int


def predict_pulse(params: TrackParams, net: SensorNet, p: int, m: int):
    """Predicted (arrival time, log-amplitude) for frame m at sensor p."""
    pos = np.asarray(params.x0) + m * net.tau * np.asarray(params.v)
    d = float(np.linalg.norm(pos - net.sensors[p]))
    t_hat = d / net.c + params.o + m * net.tau
    a_hat = math.log(net.alpha / (d * d + net.beta))
    return t_hat, a_hat


def pulse_cost(obs: PulseObservation, params: TrackParams, net: SensorNet) -> float:
    """Weighted squared residual of one observation against a track."""
    m = emission_index(obs.t, net.tau)
    t_hat, a_hat = predict_pulse(params, net, obs.p, m)
    return ((obs.t - t_hat) / net.sigma) ** 2 + ((obs.a - a_hat) / net.nu) ** 2


def pulse_arrays(pulses: Sequence[PulseObservation]):
    t = np.fromiter((q.t for q in pulses), dtype=float, count=len(pulses))
    a = np.fromiter((q.a for q in pulses), dtype=float, count=len(pulses))
    p = np.fromiter((q.p for q in pulses), dtype=int, count=len(pulses))
    return t, a, p


def generate_pulses(tracks: Sequence[TrackParams], net: SensorNet, rng: np.random.Generator):
    """Simulate all detections on [0, T]; returns (pulses, true labels).

    Each target emits once per frame while m*tau + o <= T; every sensor
    records each emission.  Positions are taken at the emission time.
    Detections that would land outside [0, T] are dropped.
    """
    sensors = net.sensors
    pulses: list[PulseObservation] = []
    labels: list[int] = []
    for j, track in enumerate(tracks):
        n_frames = int(math.floor((net.T - track.o) / net.tau)) + 1
        if n_frames < 1:
            continue
        m = np.arange(n_frames)
        emit_t = m * net.tau + track.o
        pos = track.position(emit_t)
        eps = rng.normal(0.0, net.sigma, size=(n_frames, sensors.shape[0]))
        delta = rng.normal(0.0, net.nu, size=(n_frames, sensors.shape[0]))
        for p in range(sensors.shape[0]):
            d = np.linalg.norm(pos - sensors[p], axis=1)
            toa = emit_t + d / net.c + eps[:, p]
            amp = np.log(net.alpha / (d**2 + net.beta)) + delta[:, p]
            keep = (toa >= 0.0) & (toa <= net.T)
            for ti, ai in zip(toa[keep], amp[keep]):
                pulses.append(PulseObservation(float(ti), float(ai), p))
                labels.append(j)
    return pulses, np.asarray(labels, dtype=int)


def _residual_closure(t, a, p_idx, net: SensorNet):
    sensors = net.sensors[p_idx]
    m_tau = emission_index(t, net.tau) * net.tau

    def residual(theta: np.ndarray) -> np.ndarray:
        pos = theta[:2] + m_tau[:, None] * theta[2:4]
        diff = pos - sensors
        d = np.sqrt(np.sum(diff**2, axis=1))
        t_hat = d / net.c + theta[4] + m_tau
        a_hat = np.log(net.alpha) - np.log(d**2 + net.beta)
        return np.concatenate(((t - t_hat) / net.sigma, (a - a_hat) / net.nu))

    return residual


_FD_SCALE = np.array([1.0, 1.0, 1e-2, 1e-2, 1e-1])


def _fd_jacobian(residual, theta: np.ndarray) -> np.ndarray:
    steps = 1e-6 * np.maximum(np.abs(theta), _FD_SCALE)
    cols = []
    for j in range(theta.size):
        left = theta.copy()
        right = theta.copy()
        left[j] -= steps[j]
        right[j] += steps[j]
        cols.append((residual(right) - residual(left)) / (2.0 * steps[j]))
    return np.stack(cols, axis=1)


def _levenberg_marquardt(residual, theta0: np.ndarray, max_iter: int = 80):
    """Damped Gauss-Newton descent; returns (theta, cost, converged)."""
    theta = theta0.astype(float).copy()
    r = residual(theta)
    cost = float(r @ r)
    mu = None
    gnorm = math.inf
    for _ in range(max_iter):
        J = _fd_jacobian(residual, theta)
        g = J.T @ r
        gnorm = float(np.linalg.norm(2.0 * g))
        if gnorm <= 1e-9 * (1.0 + cost):
            break
        A = J.T @ J
        diag = np.diag(A).copy()
        diag[diag <= 0] = 1e-12
        if mu is None:
            mu = 1e-3
        improved = False
        for _ in range(25):
            step = np.linalg.solve(A + mu * np.diag(diag), -g)
            trial = theta + step
            r_trial = residual(trial)
            cost_trial = float(r_trial @ r_trial)
            if cost_trial < cost:
                rel_drop = (cost - cost_trial) / (1.0 + cost)
                theta, r, cost = trial, r_trial, cost_trial
                mu = max(mu * 0.3, 1e-12)
                improved = rel_drop > 1e-14
                break
            mu *= 4.0
            if mu > 1e14:
                break
        if not improved:
            break
    J = _fd_jacobian(residual, theta)
    gnorm = float(np.linalg.norm(2.0 * (J.T @ r)))
    converged = gnorm < 1e-6 * (1.0 + cost)
    return theta, cost, converged


def _initial_guesses(t, a, p_idx, net: SensorNet, n_starts: int, rng: np.random.Generator):
    """Data-driven starting points: amplitude-implied box, residual phase."""
    d_implied = np.sqrt(np.maximum(net.alpha * np.exp(-a) - net.beta, 1e-6))
    m_tau = emission_index(t, net.tau) * net.tau
    phase = t - m_tau - d_implied / net.c
    o0 = float(np.clip(np.median(phase), 0.0, net.tau * (1.0 - 1e-9)))
    spread = float(np.median(d_implied))
    lo = net.sensors.min(axis=0) - spread
    hi = net.sensors.max(axis=0) + spread

    guesses = []
    grid = np.linspace(0.0, 1.0, 5)
    candidates = np.array([(lo + (hi - lo) * np.array([gx, gy])) for gx in grid for gy in grid])
    residual = _residual_closure(t, a, p_idx, net)
    costs = [
        float(np.sum(residual(np.array([x, y, 0.0, 0.0, o0])) ** 2)) for x, y in candidates
    ]
    bx, by = candidates[int(np.argmin(costs))]
    guesses.append(np.array([bx, by, 0.0, 0.0, o0]))
    for _ in range(n_starts - 1):
        x0 = rng.uniform(lo, hi)
        o_jit = (o0 + rng.uniform(-0.1, 0.1) * net.tau) % net.tau
        guesses.append(np.array([x0[0], x0[1], 0.0, 0.0, o_jit]))
    return guesses


def _fit_track_arrays(
    t,
    a,
    p_idx,
    net: SensorNet,
    n_starts: int,
    rng: np.random.Generator,
    warm: TrackParams | None = None,
) -> TrackParams:
    if t.size == 0:
        raise ValueError("cannot fit a track to an empty cluster")
    residual = _residual_closure(t, a, p_idx, net)
    if warm is not None:
        starts = [warm.theta()]
    else:
        starts = _initial_guesses(t, a, p_idx, net, n_starts, rng)
    best = None
    for theta0 in starts:
        theta, cost, converged = _levenberg_marquardt(residual, theta0)
        if best is None or cost < best[1]:
            best = (theta, cost, converged)
    theta, _, converged = best
    o = theta[4] - net.tau * math.floor(theta[4] / net.tau)
    return TrackParams(
        x0=(float(theta[0]), float(theta[1])),
        v=(float(theta[2]), float(theta[3])),
        o=float(o),
        converged=bool(converged),
    )


def fit_track(
    cluster: Sequence[PulseObservation],
    net: SensorNet,
    n_starts: int,
    rng: np.random.Generator,
    warm: TrackParams | None = None,
) -> TrackParams:
    """Best local minimum of the summed pulse cost over (x0, v, o).

    The frame index of every observation is fixed from its arrival time, so
    the objective is smooth in the parameters; the offset is optimized
    unconstrained and wrapped into [0, tau) afterwards.
    """
    t, a, p_idx = pulse_arrays(cluster)
    return _fit_track_arrays(t, a, p_idx, net, n_starts, rng, warm)


def pulse_problem(
    pulses: Sequence[PulseObservation], net: SensorNet, inner_starts: int = 5
) -> ClusterProblem:
    """Clustering problem whose centers are fitted straight-line tracks."""
    t, a, p_idx = pulse_arrays(pulses)
    m_tau = emission_index(t, net.tau) * net.tau
    sensors = net.sensors

    def fit_cluster(indices, seed_seq, warm=None):
        rng = generator_from(seed_seq)
        return _fit_track_arrays(t[indices], a[indices], p_idx[indices], net, inner_starts, rng, warm)

    def cost_rows(track: TrackParams):
        pos = np.asarray(track.x0) + m_tau[:, None] * np.asarray(track.v)
        d2 = np.sum((pos - sensors[p_idx]) ** 2, axis=1)
        d = np.sqrt(d2)
        t_hat = d / net.c + track.o + m_tau
        a_hat = np.log(net.alpha) - np.log(d2 + net.beta)
        return ((t - t_hat) / net.sigma) ** 2 + ((a - a_hat) / net.nu) ** 2

    return ClusterProblem(n=t.size, fit_cluster=fit_cluster, cost_rows=cost_rows)


def tracking_eta(fitted, truth, T: float, n_grid: int = 2001) -> float:
    """Trajectory-recovery error over [0, T], best labeling, offsets ignored."""
    if len(fitted) != len(truth):
        raise ValueError("fitted and true track counts must match")
    k = len(fitted)
    x, w = simpson_nodes(0.0, T, n_grid)
    norms = np.empty((k, k))
    for i, f in enumerate(fitted):
        for j, g in enumerate(truth):
            diff = f.position(x) - g.position(x)
            norms[i, j] = np.sum(w * np.sum(diff**2, axis=1))
    best = min(
        sum(norms[perm[j], j] for j in range(k)) for perm in itertools.permutations(range(k))
    )
    return math.sqrt(best) / k


@dataclass(frozen=True)
class SubsampleRow:
    fraction: float
    trial: int
    eta: float
    accuracy_pct: float
    iterations: int
    energy: float
    converged: bool


def subsample_experiment(
    pulses: Sequence[PulseObservation],
    labels: np.ndarray,
    fractions,
    trials: int,
    k: int,
    net: SensorNet,
    truth: Sequence[TrackParams],
    master_seed: int,
    n_starts: int = 5,
    inner_starts: int = 5,
    max_iter: int = 100,
    eta_grid: int = 2001,
) -> list[SubsampleRow]:
    """Cluster random subsamples of one dataset at growing sample fractions.

    Each (fraction, trial) cell derives its own seed, draws its subsample
    without replacement, and runs the multistart Lloyd engine with track
    centers; eta and accuracy are measured against the generating tracks.
    """
    t_all, a_all, p_all = pulse_arrays(pulses)
    labels = np.asarray(labels, dtype=int)
    n = t_all.size
    root = np.random.SeedSequence(master_seed)
    rows = []
    for ci, frac in enumerate(fractions):
        if not 0.0 < frac <= 1.0:
            raise ValueError("fractions must lie in (0, 1]")
        n_s = max(int(round(frac * n)), 1)
        for ti in range(trials):
            cell_seed = child_seed(root, ci, ti)
            rng = generator_from(child_seed(cell_seed, "sample"))
            idx = np.sort(rng.choice(n, size=n_s, replace=False))
            subset = [PulseObservation(float(t_all[i]), float(a_all[i]), int(p_all[i])) for i in idx]
            problem = pulse_problem(subset, net, inner_starts)
            config = LloydConfig(k=k, lam=0.0, max_iter=max_iter)
            result = multistart(problem, config, n_starts, seed_seq=child_seed(cell_seed, "fit"))
            rows.append(
                SubsampleRow(
                    fraction=float(frac),
                    trial=ti,
                    eta=tracking_eta(result.centers, truth, net.T, eta_grid),
                    accuracy_pct=permutation_accuracy(result.partition, labels[idx]),
                    iterations=result.iterations,
                    energy=result.energy.total,
                    converged=result.converged,
                )
            )
    return rows
