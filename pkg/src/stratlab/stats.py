"""Distribution comparison for Monte Carlo ensembles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import kstwobign

from .errors import ParameterDomainError


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Sorted sample with its first four moments.

    ``var`` is the unbiased estimator; ``skew`` = m3 / m2^1.5 and
    ``ex_kurtosis`` = m4 / m2^2 - 3 use central moments m_k with divisor n.
    Both are 0 for a constant sample.
    """

    sorted_values: np.ndarray = field(repr=False)
    n: int
    mean: float
    var: float
    skew: float
    ex_kurtosis: float


def moments(values) -> EmpiricalDistribution:
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 2:
        raise ParameterDomainError("need at least two values")
    mean = float(np.mean(x))
    c = x - mean
    m2 = float(np.mean(c**2))
    m3 = float(np.mean(c**3))
    m4 = float(np.mean(c**4))
    var = m2 * x.size / (x.size - 1)
    if m2 > 0:
        skew = m3 / m2**1.5
        kurt = m4 / m2**2 - 3.0
    else:
        skew = kurt = 0.0
    return EmpiricalDistribution(np.sort(x), x.size, mean, var, skew, kurt)


def _as_dist(a) -> EmpiricalDistribution:
    return a if isinstance(a, EmpiricalDistribution) else moments(a)


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic D and asymptotic p-value.

    Both empirical CDFs are evaluated right-continuously at every pooled
    point, so ties are handled exactly. The p-value is the Kolmogorov tail
    at sqrt(n_a n_b / (n_a + n_b)) * D.
    """
    xa = _sorted(a)
    xb = _sorted(b)
    if xa.size == 0 or xb.size == 0:
        raise ParameterDomainError("KS needs two non-empty samples")
    pooled = np.concatenate([xa, xb])
    fa = np.searchsorted(xa, pooled, side="right") / xa.size
    fb = np.searchsorted(xb, pooled, side="right") / xb.size
    D = float(np.max(np.abs(fa - fb)))
    n_eff = xa.size * xb.size / (xa.size + xb.size)
    p = float(kstwobign.sf(math.sqrt(n_eff) * D))
    return D, min(1.0, p)


def _sorted(a):
    if isinstance(a, EmpiricalDistribution):
        return a.sorted_values
    return np.sort(np.asarray(a, dtype=float).ravel())


def ks_null_quantile(n_a: int, n_b: int, coef: float = 1.36) -> float:
    """coef / sqrt(n_eff); coef = 1.36 is the asymptotic 95% point."""
    return coef / math.sqrt(n_a * n_b / (n_a + n_b))


def correlation(x, y) -> float:
    """Pearson correlation; raises on constant input."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size or x.size < 3:
        raise ParameterDomainError("correlation needs two samples of equal length >= 3")
    cx = x - x.mean()
    cy = y - y.mean()
    sx = math.sqrt(float(cx @ cx))
    sy = math.sqrt(float(cy @ cy))
    if sx == 0.0 or sy == 0.0:
        raise ParameterDomainError("correlation is undefined for a constant sample")
    r = float(cx @ cy) / (sx * sy)
    return max(-1.0, min(1.0, r))
