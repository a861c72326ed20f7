"""Randomized verification battery for the spline solver.

Each instance fits a small random dataset and measures three independent
diagnostics: agreement of the banded solve with a dense solve of the same
normal equations, agreement of the algebraic penalty with quadrature of the
squared second derivative, and local optimality of the fitted knot values
under random perturbations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeds import child_seed, generator_from
from .spline import bending_energy, build_penalty, fit_smoothing_spline, simpson_nodes


@dataclass(frozen=True)
class SplineCheckRow:
    instance: int
    m: int
    lam: float
    dense_rel_err: float
    quad_rel_err: float
    perturb_gain: float


def random_instance(rng: np.random.Generator, max_points: int = 12):
    """Random weighted dataset with at least three distinct abscissae."""
    m = int(rng.integers(3, max_points + 1))
    t = np.sort(rng.uniform(0.0, 10.0, size=m))
    while np.any(np.diff(t) < 1e-6):
        t = np.sort(rng.uniform(0.0, 10.0, size=m))
    z = rng.normal(0.0, 2.0, size=m)
    w = rng.uniform(0.5, 2.0, size=m)
    return t, z, w


def dense_fit(t, z, w, lam, n_total):
    """Reference knot values from a dense solve of the same linear system."""
    pm = build_penalty(t)
    W = np.diag(w)
    A = W + n_total * lam * pm.Q @ np.linalg.solve(pm.R, pm.Q.T)
    return np.linalg.solve(A, w * z)


def quadrature_penalty(center, n_per_interval: int = 41) -> float:
    """Simpson quadrature of the squared second derivative, knot by knot."""
    total = 0.0
    for a, b in zip(center.knots[:-1], center.knots[1:]):
        x, wts = simpson_nodes(a, b, n_per_interval)
        total += float(np.sum(wts * center.second_derivative(x) ** 2))
    return total


def objective(t, z, w, lam, n_total, knot_values):
    """Penalized objective at arbitrary knot values (natural spline through them)."""
    pm = build_penalty(t)
    gamma = np.linalg.solve(pm.R, pm.Q.T @ knot_values)
    penalty = float(gamma @ pm.R @ gamma)
    resid = float(np.sum(w * (z - knot_values) ** 2)) / n_total
    return resid + lam * penalty


def perturbation_gain(t, z, w, lam, n_total, fitted_values, rng, n_dirs=100, step=1e-3):
    """Largest objective decrease over random knot-value perturbations."""
    base = objective(t, z, w, lam, n_total, fitted_values)
    best_gain = 0.0
    for _ in range(n_dirs):
        d = rng.normal(size=fitted_values.size)
        d *= step / np.linalg.norm(d)
        for sgn in (1.0, -1.0):
            val = objective(t, z, w, lam, n_total, fitted_values + sgn * d)
            best_gain = max(best_gain, base - val)
    return best_gain


def spline_check(
    instances: int,
    max_points: int,
    lams,
    master_seed: int,
) -> list[SplineCheckRow]:
    """Run the verification battery; one row per random instance."""
    root = np.random.SeedSequence(master_seed)
    rows = []
    for i in range(instances):
        rng = generator_from(child_seed(root, i))
        t, z, w = random_instance(rng, max_points)
        lam = float(lams[i % len(lams)])
        n_total = t.size
        fit = fit_smoothing_spline(t, z, lam, n_total, weights=w)
        ref = dense_fit(t, z, w, lam, n_total)
        scale = max(float(np.max(np.abs(ref))), 1e-12)
        dense_err = float(np.max(np.abs(fit.values - ref))) / scale
        pen = bending_energy(fit)
        quad = quadrature_penalty(fit)
        quad_err = abs(pen - quad) / max(quad, 1e-300) if max(pen, quad) > 0 else 0.0
        gain = perturbation_gain(t, z, w, lam, n_total, fit.values, rng)
        rows.append(
            SplineCheckRow(
                instance=i,
                m=t.size,
                lam=lam,
                dense_rel_err=dense_err,
                quad_rel_err=quad_err,
                perturb_gain=gain,
            )
        )
    return rows
