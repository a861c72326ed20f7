"""Natural cubic smoothing splines via the Reinsch banded algorithm.

The fitted spline minimizes

    (1/n_total) * sum_i w_i * (z_i - g(t_i))**2 + lam * integral (g'')**2

over all twice weakly differentiable functions; the minimizer is the natural
cubic spline with knots at the distinct data abscissae.  With Q the second-
difference matrix and R the Gram matrix of the hat basis (Green & Silverman
decomposition), the penalty is gamma' R gamma where Q' g = R gamma, and the
knot values solve a symmetric positive definite pentadiagonal system in
O(m) time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_banded, solveh_banded


@dataclass(frozen=True)
class SplineCenter:
    """A fitted natural cubic spline: one cluster-center trajectory.

    ``second_derivs`` holds the curvature at the interior knots only; the
    natural boundary conditions force zero curvature at both end knots.
    Outside the knot range the spline continues linearly with matching slope.
    """

    knots: np.ndarray
    values: np.ndarray
    second_derivs: np.ndarray
    lambda_eff: float

    def __call__(self, t):
        return evaluate_spline(self, t)

    def second_derivative(self, t):
        """Piecewise-linear second derivative; zero outside the knot range."""
        knots = self.knots
        m = knots.size
        t = np.asarray(t, dtype=float)
        if m < 3:
            return np.zeros_like(t)
        curv = np.concatenate(([0.0], self.second_derivs, [0.0]))
        idx = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, m - 2)
        h = knots[idx + 1] - knots[idx]
        frac = (t - knots[idx]) / h
        out = (1.0 - frac) * curv[idx] + frac * curv[idx + 1]
        return np.where((t < knots[0]) | (t > knots[-1]), 0.0, out)

    def bending_energy(self) -> float:
        return bending_energy(self)


@dataclass(frozen=True)
class PenaltyMatrices:
    """Dense Q (m x m-2) and R (m-2 x m-2) of the Reinsch decomposition."""

    Q: np.ndarray
    R: np.ndarray


def _gaps(knots: np.ndarray) -> np.ndarray:
    h = np.diff(knots)
    if np.any(h <= 0):
        raise ValueError("knots must be strictly increasing")
    return h


def _reinsch_bands(knots: np.ndarray):
    """Banded pieces for interior nodes: Q columns (p, q, r) and R diagonals."""
    h = _gaps(knots)
    inv = 1.0 / h
    p = inv[:-1]
    q = -(inv[:-1] + inv[1:])
    r = inv[1:]
    r_main = (h[:-1] + h[1:]) / 3.0
    r_off = h[1:-1] / 6.0
    return p, q, r, r_main, r_off


def build_penalty(knots) -> PenaltyMatrices:
    """Assemble the dense Q and R matrices for a strictly increasing knot set.

    Raises ValueError for fewer than 3 knots or non-increasing knots.
    """
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 1 or knots.size < 3:
        raise ValueError("need at least 3 strictly increasing knots")
    p, q, r, r_main, r_off = _reinsch_bands(knots)
    m = knots.size
    mi = m - 2
    Q = np.zeros((m, mi))
    cols = np.arange(mi)
    Q[cols, cols] = p
    Q[cols + 1, cols] = q
    Q[cols + 2, cols] = r
    R = np.diag(r_main)
    if mi > 1:
        R += np.diag(r_off, 1) + np.diag(r_off, -1)
    return PenaltyMatrices(Q=Q, R=R)


def _merge_duplicates(t, z, w):
    """Collapse repeated abscissae to (summed weight, weighted mean ordinate).

    Exact for the quadratic objective; keeps the knot vector strictly
    increasing.  Abscissae closer than 1e-9 of the data span are treated as
    duplicates so that near-collisions cannot wreck the conditioning of the
    banded system.
    """
    order = np.argsort(t, kind="stable")
    t, z, w = t[order], z[order], w[order]
    tol = 1e-9 * max(t[-1] - t[0], 1e-30)
    first = np.concatenate(([True], t[1:] - t[:-1] > tol))
    if first.all():
        return t, z, w
    group = np.cumsum(first) - 1
    n_groups = group[-1] + 1
    w_sum = np.bincount(group, weights=w, minlength=n_groups)
    wz_sum = np.bincount(group, weights=w * z, minlength=n_groups)
    wt_sum = np.bincount(group, weights=w * t, minlength=n_groups)
    return wt_sum / w_sum, wz_sum / w_sum, w_sum


def fit_smoothing_spline(t, z, lam: float, n_total: int, weights=None) -> SplineCenter:
    """Fit the penalized natural cubic spline to weighted points.

    The residual term is divided by ``n_total`` (the full dataset size, not
    the cluster size), so the penalty acting on the raw residual sum is
    ``n_total * lam``.  One point yields a constant, two distinct points the
    interpolating line; both sit in the penalty's null space.
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    if t.size == 0:
        raise ValueError("cannot fit a spline to an empty point set")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if weights is None:
        weights = np.ones_like(t)
    else:
        weights = np.asarray(weights, dtype=float)
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")

    knots, zbar, w = _merge_duplicates(t, z, weights)
    m = knots.size
    p_eff = float(n_total) * float(lam)
    if m <= 2:
        return SplineCenter(
            knots=knots,
            values=zbar,
            second_derivs=np.zeros(0),
            lambda_eff=p_eff,
        )

    p_col, q_col, r_col, r_main, r_off = _reinsch_bands(knots)
    wi = 1.0 / w
    mi = m - 2

    # A = R + p_eff * Q' W^-1 Q, pentadiagonal SPD; stored in upper banded form.
    main = p_col**2 * wi[:-2] + q_col**2 * wi[1:-1] + r_col**2 * wi[2:]
    sup1 = q_col[:-1] * p_col[1:] * wi[1:-2] + r_col[:-1] * q_col[1:] * wi[2:-1]
    sup2 = r_col[:-2] * p_col[2:] * wi[2:-2]
    ab = np.zeros((3, mi))
    ab[2] = r_main + p_eff * main
    if mi > 1:
        ab[1, 1:] = r_off + p_eff * sup1
    if mi > 2:
        ab[0, 2:] = p_eff * sup2

    rhs = p_col * zbar[:-2] + q_col * zbar[1:-1] + r_col * zbar[2:]
    try:
        gamma = solveh_banded(ab, rhs)
    except LinAlgError:
        # fall back to pivoted banded LU when extreme knot geometry pushes
        # the Cholesky factorization past float precision
        full = np.zeros((5, mi))
        full[0] = ab[0]
        full[1] = ab[1]
        full[2] = ab[2]
        full[3, :-1] = ab[1, 1:]
        full[4, :-2] = ab[0, 2:]
        gamma = solve_banded((2, 2), full, rhs)

    q_gamma = np.zeros(m)
    q_gamma[:-2] += p_col * gamma
    q_gamma[1:-1] += q_col * gamma
    q_gamma[2:] += r_col * gamma
    g = zbar - p_eff * wi * q_gamma
    return SplineCenter(knots=knots, values=g, second_derivs=gamma, lambda_eff=p_eff)


def evaluate_spline(s: SplineCenter, t):
    """Evaluate the spline at scalar or array ``t`` (linear extrapolation)."""
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    knots, g = s.knots, s.values
    m = knots.size

    if m == 1:
        out = np.full_like(t_arr, g[0])
        return float(out[0]) if scalar else out

    curv = np.zeros(m)
    if m >= 3:
        curv[1:-1] = s.second_derivs
    idx = np.clip(np.searchsorted(knots, t_arr, side="right") - 1, 0, m - 2)
    h = knots[idx + 1] - knots[idx]
    a = (knots[idx + 1] - t_arr) / h
    b = (t_arr - knots[idx]) / h
    out = (
        a * g[idx]
        + b * g[idx + 1]
        + ((a**3 - a) * curv[idx] + (b**3 - b) * curv[idx + 1]) * h**2 / 6.0
    )

    h0 = knots[1] - knots[0]
    slope_left = (g[1] - g[0]) / h0 - h0 * (2.0 * curv[0] + curv[1]) / 6.0
    h1 = knots[-1] - knots[-2]
    slope_right = (g[-1] - g[-2]) / h1 + h1 * (curv[-2] + 2.0 * curv[-1]) / 6.0
    left = t_arr < knots[0]
    right = t_arr > knots[-1]
    if left.any():
        out[left] = g[0] + slope_left * (t_arr[left] - knots[0])
    if right.any():
        out[right] = g[-1] + slope_right * (t_arr[right] - knots[-1])
    return float(out[0]) if scalar else out


def bending_energy(s: SplineCenter) -> float:
    """Integral of the squared second derivative, gamma' R gamma; 0 below 3 knots."""
    if s.knots.size < 3:
        return 0.0
    _, _, _, r_main, r_off = _reinsch_bands(s.knots)
    gamma = s.second_derivs
    total = float(np.sum(r_main * gamma**2))
    if gamma.size > 1:
        total += 2.0 * float(np.sum(r_off * gamma[:-1] * gamma[1:]))
    return total


def simpson_nodes(a: float, b: float, n_grid: int):
    """Composite Simpson nodes and weights on [a, b]; n_grid must be odd >= 3."""
    if n_grid < 3 or n_grid % 2 == 0:
        raise ValueError("n_grid must be an odd integer >= 3")
    x = np.linspace(a, b, n_grid)
    w = np.ones(n_grid)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (b - a) / (n_grid - 1) / 3.0
    return x, w


def l2_distance(a, b, interval, n_grid: int = 2001) -> float:
    """L2 distance between two evaluable trajectories by composite Simpson."""
    lo, hi = interval
    x, w = simpson_nodes(lo, hi, n_grid)
    diff = np.asarray(a(x), dtype=float) - np.asarray(b(x), dtype=float)
    return float(np.sqrt(np.sum(w * diff**2)))
