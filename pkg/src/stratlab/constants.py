"""
Limit variance eta(t) of the cubic increment sums.

In the critical cases eta(t) = C t with

    C_K = 8^-K (8 + 2 S),      C_h = 1 + S / 4,
    S   = sum_{m>=1} D(m)^3,   D(m) = (m+1)^(1/3) - 2 m^(1/3) + (m-1)^(1/3).

Truncation after M terms is certified by the mean-value bound
|D(m)| <= (2/9)(m-1)^(-5/3), which gives

    sum_{m>M} |D(m)|^3 <= (8/729) sum_{m>M} (m-1)^-5 <= (8/729) (M-1)^-4 / 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._summation import exact_sum
from .errors import ParameterDomainError, UnsupportedRegimeError
from .kernels import CovarianceKernel, Family, beta_matrix, grid_index

_TAIL_COEF = 8.0 / 729.0 / 4.0


@dataclass(frozen=True)
class SeriesValue:
    value: float
    truncation_M: int
    tail_bound: float


def second_difference(m):
    """D(m) for integer m >= 1, evaluated without the O(m^2) cancellation."""
    m = np.asarray(m, dtype=float)
    if np.any(m < 1):
        raise ParameterDomainError("second difference needs m >= 1")
    x = 1.0 / m
    inner = np.expm1(np.log1p(x) / 3.0) + np.expm1(np.log1p(-np.minimum(x, 0.5)) / 3.0)
    out = np.cbrt(m) * inner
    # m = 1: (m-1)^(1/3) = 0 is outside the log1p branch
    out = np.where(m == 1, 2.0 ** (1.0 / 3.0) - 2.0, out)
    return float(out) if out.ndim == 0 else out


def tail_bound(M: int) -> float:
    """Upper bound on |sum_{m>M} D(m)^3|, valid for M >= 2."""
    if M < 2:
        raise ParameterDomainError("tail bound needs M >= 2")
    return _TAIL_COEF * (M - 1.0) ** -4


def _truncation_for(tol: float) -> int:
    M = max(2, math.ceil(1.0 + (_TAIL_COEF / tol) ** 0.25))
    while M > 2 and tail_bound(M - 1) < tol:
        M -= 1
    while tail_bound(M) >= tol:
        M += 1
    return M


def core_series_S(tol: float) -> SeriesValue:
    """Partial sum of S whose certified tail is below ``tol``."""
    if not tol > 0:
        raise ParameterDomainError(f"tol must be positive, got {tol}")
    M = _truncation_for(tol)
    terms = second_difference(np.arange(1, M + 1)) ** 3
    return SeriesValue(exact_sum(terms), M, tail_bound(M))


def c_K(K: float, tol: float = 1e-12) -> SeriesValue:
    """C_K = 8^-K (8 + 2 S); valid for K in (0, 2) (bBm and extended bBm)."""
    if not 0.0 < K < 2.0:
        raise ParameterDomainError(f"K must lie in (0, 2), got {K}")
    if not tol > 0:
        raise ParameterDomainError(f"tol must be positive, got {tol}")
    scale = 8.0 ** (-K)
    S = core_series_S(tol / (2.0 * scale))
    return SeriesValue(scale * (8.0 + 2.0 * S.value), S.truncation_M, 2.0 * scale * S.tail_bound)


def c_h(tol: float = 1e-12) -> SeriesValue:
    """C_h = 1 + S / 4 for sub-fractional Brownian motion with h = 1/3."""
    if not tol > 0:
        raise ParameterDomainError(f"tol must be positive, got {tol}")
    S = core_series_S(4.0 * tol)
    return SeriesValue(1.0 + S.value / 4.0, S.truncation_M, S.tail_bound / 4.0)


def empirical_eta(kernel: CovarianceKernel, n: int, t: float) -> float:
    """sum_{j,k=0}^{floor(nt)-1} beta_n(j,k)^3, summed exactly (fsum)."""
    if t < 0:
        raise ParameterDomainError(f"t must be non-negative, got {t}")
    m = grid_index(n, t)
    if m == 0:
        return 0.0
    return exact_sum(beta_matrix(kernel, n, m) ** 3)


def cross_block_eta(kernel: CovarianceKernel, n: int, s: float, t: float) -> float:
    """Rectangle part sum_{j < floor(ns) <= k < floor(nt)} beta_n(j,k)^3."""
    a, b = grid_index(n, s), grid_index(n, t)
    if not 0 <= a <= b:
        raise ParameterDomainError("need 0 <= s <= t")
    B = beta_matrix(kernel, n, b)
    return exact_sum(B[:a, a:b] ** 3)


class EtaFunction:
    """t -> slope * t, the variance function of the correction Brownian motion.

    ``slope`` is 0 in the supercritical regime.
    """

    def __init__(self, slope: float, constant: SeriesValue | None = None):
        self.slope = float(slope)
        self.constant = constant

    @property
    def trivial(self) -> bool:
        return self.slope == 0.0

    def __call__(self, t):
        out = self.slope * np.asarray(t, dtype=float)
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        return f"EtaFunction(slope={self.slope!r})"


def critical_constant(kernel: CovarianceKernel, tol: float = 1e-12) -> SeriesValue:
    if kernel.family is Family.SFBM:
        return c_h(tol)
    return c_K(kernel.K, tol)


def eta_fn(kernel: CovarianceKernel, tol: float = 1e-12) -> EtaFunction:
    """eta for a critical kernel (C t) or a supercritical one (identically 0)."""
    regime = kernel.regime
    if regime == "critical":
        c = critical_constant(kernel, tol)
        return EtaFunction(c.value, c)
    if regime == "supercritical":
        return EtaFunction(0.0)
    raise UnsupportedRegimeError(
        f"{kernel.params()} is subcritical (increment exponent "
        f"{kernel.increment_exponent:.6g} < 1/3); no limit theory is available"
    )
