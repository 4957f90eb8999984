import numpy as np
import pytest

from stratlab.constants import EtaFunction, c_K, eta_fn
from stratlab.errors import ParameterDomainError
from stratlab.kernels import CovarianceKernel, GridSpec
from stratlab.limitlaw import (
    CORRECTION_COEF,
    conditional_variance,
    ito_correction,
    sample_limit,
    sample_limit_ensemble,
)
from stratlab.sampler import factorize, sample_bm_paths, sample_path
from stratlab.stats import ks_two_sample, moments
from stratlab.variation import TestFunction

from conftest import REFERENCE_KERNELS

FBM = REFERENCE_KERNELS["fbm"]
ETA = eta_fn(FBM)


def test_coefficient():
    assert CORRECTION_COEF**2 == pytest.approx(1 / 24)


def test_conditional_variance_quartic():
    grid = GridSpec(64, 1.0)
    p = sample_path(factorize(FBM, grid), 2)
    f = TestFunction.parse("x4")
    dv = np.diff(ETA(grid.times))
    expected = 576 * np.sum(p.values[:-1] ** 2 * dv)
    assert conditional_variance(f, p, ETA) == pytest.approx(expected, rel=1e-12)


def test_nested_conditional_law():
    grid = GridSpec(64, 1.0)
    f = TestFunction.parse("x4")
    x = sample_path(factorize(FBM, grid), 8).values
    b = sample_bm_paths(ETA, grid, seed=123, n_paths=1000).values
    corr = ito_correction(f, x, b, grid.m)
    m = moments(corr)
    target = conditional_variance(f, sample_path(factorize(FBM, grid), 8), ETA) / 24
    assert m.var == pytest.approx(target, rel=0.15)
    assert abs(m.skew) < 0.25 and abs(m.ex_kurtosis) < 0.5


def test_correction_variance_and_independence():
    grid = GridSpec(128, 1.0)
    s = sample_limit_ensemble(FBM, grid, TestFunction.parse("x3"), 1.0, ETA, 17, 20000)
    # f''' = 6, so Var = 36/24 eta(1)
    assert np.var(s.correction, ddof=1) == pytest.approx(1.5 * c_K(1.0).value, rel=0.05)
    assert abs(np.corrcoef(s.x_t, s.correction)[0, 1]) < 0.03


def test_sign_symmetry_in_law():
    grid = GridSpec(64, 1.0)
    f = TestFunction.parse("x3")
    s = sample_limit_ensemble(FBM, grid, f, 1.0, ETA, 5, 10000)
    base = f(s.x_t) - f(0.0)
    D, _ = ks_two_sample(base + s.correction, base - s.correction)
    assert D < 0.02


def test_single_draw_matches_ensemble_row():
    grid = GridSpec(32, 1.0)
    f = TestFunction.parse("x5")
    ens = sample_limit_ensemble(FBM, grid, f, 0.5, ETA, 3, 6)
    one = sample_limit(FBM, grid, f, 0.5, ETA, 3, index=4)
    assert one.x_t == pytest.approx(ens.x_t[4], abs=1e-12)
    assert one.rhs == pytest.approx(ens.rhs[4], rel=1e-10, abs=1e-12)


def test_trivial_eta_and_quadratic_have_no_correction():
    grid = GridSpec(32, 1.0)
    f3 = TestFunction.parse("x3")
    s = sample_limit_ensemble(CovarianceKernel.fbm(0.3), grid, f3, 1.0, EtaFunction(0.0), 1, 50)
    assert not np.any(s.correction)
    np.testing.assert_allclose(s.rhs, s.x_t**3)
    q = sample_limit_ensemble(FBM, grid, TestFunction.parse("x2/2"), 1.0, ETA, 1, 50)
    assert not np.any(q.correction)


def test_time_must_be_grid_point():
    grid = GridSpec(8, 1.0)
    f = TestFunction.parse("x3")
    with pytest.raises(ParameterDomainError):
        sample_limit(FBM, grid, f, 0.3, ETA, 0)
    with pytest.raises(ParameterDomainError):
        sample_limit(FBM, grid, f, 2.0, ETA, 0)
    z = sample_limit(FBM, grid, f, 0.0, ETA, 0)
    assert z.rhs == 0.0 and z.correction == 0.0
