"""Predictor distributions used by the synthetic scenarios."""

from __future__ import annotations

import numpy as np

from core.errors import ConfigurationError
from core.rng import RngStream


def sample_uniform_cube(rng: RngStream, n: int, d: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    """Draw an n x d matrix of i.i.d. Unif(lo, hi) entries."""
    _check_counts(n, d)
    if not lo < hi:
        raise ConfigurationError(f"uniform bounds need lo < hi, got lo={lo}, hi={hi}")
    return rng.uniform(lo, hi, (n, d))


def equicorrelation_matrix(d: int, rho: float) -> np.ndarray:
    """Unit-diagonal covariance with every off-diagonal entry equal to *rho*."""
    lower = -1.0 / (d - 1) if d > 1 else -np.inf
    if not lower < rho < 1.0:
        raise ConfigurationError(
            f"rho={rho} does not give a positive-definite {d}x{d} equicorrelation matrix "
            f"(need {lower:.4g} < rho < 1)"
        )
    sigma = np.full((d, d), float(rho))
    np.fill_diagonal(sigma, 1.0)
    return sigma


def cholesky_factor(sigma: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T == sigma."""
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError(f"covariance is not positive definite: {exc}") from exc


def sample_mvn(rng: RngStream, n: int, sigma: np.ndarray) -> np.ndarray:
    """Rows i.i.d. N(0, sigma) via the Cholesky factor of sigma."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ConfigurationError(f"covariance must be square, got shape {sigma.shape}")
    _check_counts(n, sigma.shape[0])
    factor = cholesky_factor(sigma)
    return rng.normal((n, sigma.shape[0])) @ factor.T


def sample_equicorr_normal(rng: RngStream, n: int, d: int, rho: float) -> np.ndarray:
    """Rows i.i.d. N_d(0, Sigma_rho)."""
    _check_counts(n, d)
    return sample_mvn(rng, n, equicorrelation_matrix(d, rho))


def _check_counts(n: int, d: int) -> None:
    if n < 1 or d < 1:
        raise ConfigurationError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
