import math
import time

import mpmath
import numpy as np
import pytest

from stratlab.constants import (
    c_h,
    c_K,
    core_series_S,
    critical_constant,
    cross_block_eta,
    empirical_eta,
    eta_fn,
    second_difference,
    tail_bound,
)
from stratlab.errors import ParameterDomainError, UnsupportedRegimeError
from stratlab.kernels import CovarianceKernel

mpmath.mp.dps = 40


def _D(m):
    m = mpmath.mpf(m)
    third = mpmath.mpf(1) / 3
    return (m + 1) ** third - 2 * m**third + (m - 1) ** third


# Reference value of sum_{m>=1} D(m)^3 computed at 40 digits with Richardson-type
# acceleration; independent of the package's truncation and tail bound.
S_ORACLE = float(mpmath.nsum(lambda m: _D(m) ** 3, [1, mpmath.inf]))
C1_ORACLE = (8 + 2 * S_ORACLE) / 8


def test_oracle_sanity():
    assert S_ORACLE == pytest.approx(-0.40589042118209586, abs=1e-15)
    assert float(_D(1) ** 3) == pytest.approx(-0.405353713, abs=1e-9)


@pytest.mark.parametrize("m", [1, 2, 3, 10, 1000, 10**6])
def test_second_difference_matches_high_precision(m):
    assert second_difference(m) == pytest.approx(float(_D(m)), rel=1e-12)


@pytest.mark.parametrize("M", [2, 5, 20, 60])
def test_tail_bound_dominates_true_tail(M):
    true_tail = abs(S_ORACLE - math.fsum(second_difference(m) ** 3 for m in range(1, M)))
    assert true_tail <= tail_bound(M)


@pytest.mark.parametrize("tol", [1e-6, 1e-10, 1e-13])
def test_core_series(tol):
    sv = core_series_S(tol)
    assert sv.tail_bound <= tol
    assert abs(sv.value - S_ORACLE) <= tol + 1e-15


def test_c_K_at_one():
    t0 = time.perf_counter()
    sv = c_K(1.0, tol=1e-10)
    assert time.perf_counter() - t0 < 1.0
    assert sv.value == pytest.approx(0.8985, abs=5e-4)
    assert sv.value == pytest.approx(7.188 / 8, abs=5e-4)
    assert abs(sv.value - C1_ORACLE) <= 1e-10
    assert sv.tail_bound <= 1e-10


@pytest.mark.parametrize("K", [0.25, 2 / 3, 1.0, 1.5, 1.9])
def test_c_K_formula(K):
    sv = c_K(K, tol=1e-12)
    assert sv.value == pytest.approx(8.0**-K * (8 + 2 * S_ORACLE), abs=1e-12)


def test_c_h_equals_c_K_at_one():
    assert abs(c_h(1e-12).value - c_K(1.0, 1e-12).value) < 1e-12
    assert c_h(1e-12).value == pytest.approx(1 + S_ORACLE / 4, abs=1e-12)


@pytest.mark.parametrize("K", [0.0, 2.0, -1.0])
def test_c_K_domain(K):
    with pytest.raises(ParameterDomainError):
        c_K(K)


def _fbm_eta_oracle(n, t=1.0):
    # Stationary increments with beta_n(j,k) = n^(-1/3) rho(|j-k|): collapse the double sum.
    m = int(n * t)
    rho = lambda d: 0.5 * (abs(d + 1) ** (1 / 3) - 2 * d ** (1 / 3) + abs(d - 1) ** (1 / 3))
    total = m * rho(0) ** 3 + 2 * math.fsum((m - d) * rho(d) ** 3 for d in range(1, m))
    return total / n


@pytest.mark.parametrize("n", [8, 64, 512])
def test_empirical_eta_matches_collapsed_sum(n):
    assert empirical_eta(CovarianceKernel.fbm(1 / 6), n, 1.0) == pytest.approx(
        _fbm_eta_oracle(n), rel=1e-12)


def test_empirical_eta_approaches_constant():
    k = CovarianceKernel.fbm(1 / 6)
    vals = [empirical_eta(k, n, 1.0) for n in (64, 128, 256, 512)]
    gaps = [abs(v - C1_ORACLE) for v in vals]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.02 * C1_ORACLE


def test_empirical_eta_sfbm_and_bbm_close_to_constant():
    assert empirical_eta(CovarianceKernel.sfbm(1 / 3), 512, 1.0) == pytest.approx(
        c_h().value, rel=0.03)
    k = CovarianceKernel.bbm(1 / 4, 2 / 3)
    assert empirical_eta(k, 512, 1.0) == pytest.approx(c_K(2 / 3).value, rel=0.03)


def test_empirical_eta_linear_in_t_and_cross_block_small():
    k = CovarianceKernel.fbm(1 / 6)
    assert empirical_eta(k, 512, 0.5) / empirical_eta(k, 512, 1.0) == pytest.approx(0.5, abs=1e-3)
    assert abs(cross_block_eta(k, 256, 0.5, 1.0)) < 1e-3
    assert empirical_eta(k, 4, 0.1) == 0.0


def test_empirical_eta_vanishes_supercritically():
    k = CovarianceKernel.bbm(0.5, 0.5)
    vals = [empirical_eta(k, n, 1.0) for n in (64, 256, 1024)]
    assert vals[0] > vals[1] > vals[2]
    # rate n^(1 - 6HK) = n^(-1/2)
    assert vals[0] / vals[2] == pytest.approx(4.0, rel=0.15)


def test_eta_fn_by_regime():
    eta = eta_fn(CovarianceKernel.fbm(1 / 6))
    assert eta.slope == pytest.approx(C1_ORACLE, abs=1e-12)
    np.testing.assert_allclose(eta(np.array([0.0, 0.5, 2.0])), [0, C1_ORACLE / 2, 2 * C1_ORACLE])
    assert eta_fn(CovarianceKernel.sfbm(1 / 3)).slope == pytest.approx(C1_ORACLE, abs=1e-12)
    assert eta_fn(CovarianceKernel.bbm(0.25, 2 / 3)).slope == pytest.approx(
        8 ** (-2 / 3) * (8 + 2 * S_ORACLE), abs=1e-12)
    assert eta_fn(CovarianceKernel.fbm(0.3)).trivial
    with pytest.raises(UnsupportedRegimeError):
        eta_fn(CovarianceKernel.fbm(0.1))
    assert critical_constant(CovarianceKernel.ext_bbm(1 / 9, 1.5)).value == pytest.approx(
        8**-1.5 * (8 + 2 * S_ORACLE), abs=1e-12)
