"""Periodic smoothing in the Fourier domain and regularization scaling.

For 1-periodic signals observed at n equally spaced times, the penalized
least-squares minimizer is a componentwise shrinkage of the data's discrete
Fourier coefficients, and the expected curvature penalty of the fit has the
closed form S(n) evaluated here.  The Monte Carlo estimator draws noisy
signals, runs them through the shrinkage, and checks S(n) empirically; the
scaling of S(n) with n diagnoses the regularization exponent p.

The forward transform is unnormalized, z_hat_l = sum_j z_j exp(-2 pi i l j/n),
with l running over -(n-1)/2 .. (n-1)/2; the inverse carries the 1/n factor.
Only odd n is supported so the index range is symmetric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_PI4_16 = 16.0 * math.pi**4


@dataclass(frozen=True)
class PeriodicProblem:
    """One periodic-smoothing configuration with its true-signal spectrum."""

    n: int
    lam: float
    p: float
    sigma2: float
    mu_dagger_hat: np.ndarray = field(default=None)

    def __post_init__(self):
        _require_odd(self.n)
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        if self.mu_dagger_hat is None:
            object.__setattr__(self, "mu_dagger_hat", np.zeros(self.n, dtype=complex))
        elif len(self.mu_dagger_hat) != self.n:
            raise ValueError("mu_dagger_hat must have length n")

    @property
    def a_n(self) -> float:
        return 1.0 / self.n

    @property
    def b_n(self) -> float:
        return self.lam * self.n**self.p

    @property
    def gamma_n(self) -> float:
        return _PI4_16 * self.b_n / self.a_n

    @classmethod
    def two_cosine(cls, n: int, lam: float, p: float, sigma2: float) -> "PeriodicProblem":
        """True signal 2*cos(2 pi t): spectrum n at l = +-1, zero elsewhere."""
        _require_odd(n)
        hat = np.zeros(n, dtype=complex)
        half = (n - 1) // 2
        hat[half + 1] = n
        hat[half - 1] = n
        return cls(n=n, lam=lam, p=p, sigma2=sigma2, mu_dagger_hat=hat)


def _require_odd(n: int):
    if n < 1 or n % 2 == 0:
        raise ValueError("only odd n is supported (symmetric frequency range)")


def freq_indices(n: int) -> np.ndarray:
    """Frequencies -(n-1)/2 .. (n-1)/2 in the array order used throughout."""
    _require_odd(n)
    half = (n - 1) // 2
    return np.arange(-half, half + 1)


def dft(values, fast: bool = False) -> np.ndarray:
    """Unnormalized forward transform, coefficients ordered by freq_indices."""
    z = np.asarray(values)
    n = z.size
    _require_odd(n)
    if fast:
        return np.fft.fftshift(np.fft.fft(z))
    l = freq_indices(n)
    j = np.arange(n)
    return np.exp(-2j * math.pi * np.outer(l, j) / n) @ z.astype(complex)


def inverse_dft(coefficients, fast: bool = False) -> np.ndarray:
    """Inverse transform with the 1/n factor; input ordered by freq_indices."""
    c = np.asarray(coefficients, dtype=complex)
    n = c.size
    _require_odd(n)
    if fast:
        return np.fft.ifft(np.fft.ifftshift(c))
    l = freq_indices(n)
    j = np.arange(n)
    return np.exp(2j * math.pi * np.outer(j, l) / n) @ c / n


def periodic_minimizer(z_hat, gamma_n: float, n: int) -> np.ndarray:
    """Shrink each coefficient by 1/(1 + gamma_n * l^4 / n)."""
    z_hat = np.asarray(z_hat, dtype=complex)
    l = freq_indices(n)
    return z_hat / (1.0 + gamma_n * l.astype(float) ** 4 / n)


def second_deriv_norm_fourier(mu_hat, n: int) -> float:
    """Squared L2 norm of the second derivative from the spectrum."""
    mu_hat = np.asarray(mu_hat, dtype=complex)
    l = freq_indices(n).astype(float)
    return float(_PI4_16 / n**2 * np.sum(l**4 * np.abs(mu_hat) ** 2))


def closed_form_S(n: int, lam: float, p: float, sigma2: float) -> float:
    """Expected curvature penalty of the fit under a zero true signal."""
    _require_odd(n)
    if lam <= 0:
        raise ValueError("lam must be positive")
    l4 = freq_indices(n).astype(float) ** 4
    return float(_PI4_16 * sigma2 / n * np.sum(l4 / (1.0 + _PI4_16 * lam * n**p * l4) ** 2))


def empirical_penalty_mc(
    problem: PeriodicProblem, trials: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the fit's curvature penalty.

    Each trial observes the true signal plus iid N(0, sigma2) noise at the n
    sample times and measures the penalty of the shrinkage fit.  With a zero
    true signal the mean estimates closed_form_S.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials for a standard error")
    n = problem.n
    mu_vals = inverse_dft(problem.mu_dagger_hat, fast=True).real
    sd = math.sqrt(problem.sigma2)
    gamma_n = problem.gamma_n
    samples = np.empty(trials)
    for i in range(trials):
        z = mu_vals + rng.normal(0.0, sd, size=n)
        mu_hat = periodic_minimizer(dft(z, fast=True), gamma_n, n)
        samples[i] = second_deriv_norm_fourier(mu_hat, n)
    return float(np.mean(samples)), float(np.std(samples, ddof=1) / math.sqrt(trials))
