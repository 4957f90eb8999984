"""
Draws from the limit law of the trapezoidal sum:

    f(X_t) - f(X_0) + sqrt(6)/12 * int_0^t f'''(X_s) dB_s,

B a Brownian motion independent of X with Var(B_t) = eta(t). The Ito
integral is discretized at left points on the grid of X.

The correction enters with a plus sign. Writing the same identity for f(X_t)
instead puts a minus in front of it; since the correction is symmetric in
law (B -> -B) both forms describe one distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._summation import neumaier_sum
from .errors import ParameterDomainError
from .kernels import CovarianceKernel, GridSpec, grid_index
from .sampler import (
    STREAM_B,
    STREAM_X,
    factorize,
    sample_bm,
    sample_bm_paths,
    sample_path,
    sample_paths,
)
from .variation import TestFunction

CORRECTION_COEF = math.sqrt(6.0) / 12.0


@dataclass(frozen=True)
class LimitSample:
    """Terminal value x_t, the correction alone, and rhs = f(x_t) - f(0) + correction.

    Fields are floats for a single draw and arrays for an ensemble.
    """

    x_t: float | np.ndarray
    rhs: float | np.ndarray
    correction: float | np.ndarray


def _check_t(grid: GridSpec, t: float) -> int:
    m_t = grid_index(grid.n, t)
    if t < 0 or m_t > grid.m:
        raise ParameterDomainError(f"t={t} is outside [0, {grid.T}]")
    if abs(m_t / grid.n - t) > 1e-9 * max(1.0, t):
        raise ParameterDomainError(f"t={t} is not a grid point of step 1/{grid.n}")
    return m_t


def ito_correction(f: TestFunction, x, b, m_t: int):
    """sqrt(6)/12 * sum_{j < m_t} f'''(X_j) (B_{j+1} - B_j)."""
    x = np.asarray(x)[..., :m_t]
    db = np.diff(np.asarray(b)[..., : m_t + 1], axis=-1)
    if m_t == 0:
        return np.zeros(x.shape[:-1]) if x.ndim > 1 else 0.0
    return CORRECTION_COEF * neumaier_sum(f.d(3, x) * db)


def sample_limit(kernel: CovarianceKernel, grid: GridSpec, f: TestFunction, t: float,
                 eta, seed: int, index: int = 0) -> LimitSample:
    """One draw: X from stream X and B from the disjoint stream B of ``seed``."""
    m_t = _check_t(grid, t)
    x = sample_path(factorize(kernel, grid), seed, index, STREAM_X).values
    b = sample_bm(eta, grid, seed, index, STREAM_B).values
    corr = float(ito_correction(f, x, b, m_t))
    x_t = float(x[m_t])
    return LimitSample(x_t, float(f(x_t) - f(x[0])) + corr, corr)


def sample_limit_ensemble(kernel: CovarianceKernel, grid: GridSpec, f: TestFunction, t: float,
                          eta, seed: int, n_paths: int, start: int = 0) -> LimitSample:
    """Draws ``start .. start + n_paths - 1``; draw i equals ``sample_limit(..., index=i)``
    up to BLAS round-off in the path transform."""
    m_t = _check_t(grid, t)
    x = sample_paths(factorize(kernel, grid), seed, n_paths, start, STREAM_X).values
    b = sample_bm_paths(eta, grid, seed, n_paths, start, STREAM_B).values
    corr = ito_correction(f, x, b, m_t)
    x_t = x[:, m_t]
    return LimitSample(x_t, f(x_t) - f(x[:, 0]) + corr, corr)


def conditional_variance(f: TestFunction, x_path, eta) -> float:
    """sum_j f'''(X_j)^2 (eta((j+1)/n) - eta(j/n)) over the whole path.

    Multiply by (sqrt(6)/12)^2 = 1/24 for the variance of the correction given X.
    """
    grid = x_path.grid
    x = np.asarray(x_path.values)
    v = np.array([float(eta(u)) for u in grid.times])
    dv = np.diff(v)
    return neumaier_sum(f.d(3, x[..., :-1]) ** 2 * dv)
