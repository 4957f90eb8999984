import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from stratlab.errors import ParameterDomainError
from stratlab.stats import correlation, ks_null_quantile, ks_two_sample, moments

samples = st.lists(st.integers(-5, 5).map(float), min_size=1, max_size=40)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@given(samples, samples)
@settings(max_examples=200)
def test_ks_statistic_matches_scipy_with_ties(a, b):
    D, _ = ks_two_sample(a, b)
    assert D == pytest.approx(sps.ks_2samp(a, b, method="asymp").statistic, abs=1e-12)


def test_ks_pvalue_matches_scipy_asymptotic():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=3000), rng.normal(0.05, 1, size=2500)
    D, p = ks_two_sample(a, b)
    ref = sps.ks_2samp(a, b, method="asymp")
    assert D == pytest.approx(ref.statistic, abs=1e-12)
    n_eff = 3000 * 2500 / 5500
    assert p == pytest.approx(sps.kstwobign.sf(np.sqrt(n_eff) * D), rel=1e-12)
    # scipy uses the finite-n distribution; the limit law is close at this size
    assert p == pytest.approx(ref.pvalue, rel=0.1)


def test_ks_null_behaviour():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=20000), rng.normal(size=20000)
    D, p = ks_two_sample(a, b)
    assert D < ks_null_quantile(20000, 20000) * 1.5
    assert ks_null_quantile(20000, 20000) == pytest.approx(1.36 / 100)
    assert ks_two_sample(a, a) == (0.0, 1.0)


def test_ks_accepts_distribution_objects():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=500), rng.normal(size=400)
    assert ks_two_sample(moments(a), moments(b)) == ks_two_sample(a, b)


def test_ks_empty():
    with pytest.raises(ParameterDomainError):
        ks_two_sample([], [1.0])


def test_moments_match_scipy():
    x = np.random.default_rng(3).gamma(2.0, size=5000)
    m = moments(x)
    assert m.n == 5000
    assert m.mean == pytest.approx(np.mean(x))
    assert m.var == pytest.approx(np.var(x, ddof=1))
    assert m.skew == pytest.approx(sps.skew(x))
    assert m.ex_kurtosis == pytest.approx(sps.kurtosis(x))
    assert np.all(np.diff(m.sorted_values) >= 0)


def test_moments_constant_and_short():
    m = moments([2.0, 2.0, 2.0])
    assert (m.var, m.skew, m.ex_kurtosis) == (0.0, 0.0, 0.0)
    with pytest.raises(ParameterDomainError):
        moments([1.0])


def test_correlation():
    rng = np.random.default_rng(4)
    x = rng.normal(size=1000)
    y = 0.3 * x + rng.normal(size=1000)
    assert correlation(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], rel=1e-12)
    assert correlation(x, -x) == pytest.approx(-1.0)
    with pytest.raises(ParameterDomainError):
        correlation(x, np.ones(1000))
    with pytest.raises(ParameterDomainError):
        correlation(x, x[:10])
