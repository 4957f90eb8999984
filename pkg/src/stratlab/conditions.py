"""
Numerical audit of the covariance bounds (i)-(vi).

Each ratio check scans s geometrically, s = 2^(-i/4) for i = 0..res-1, and
t (and r) uniformly on the admissible interval with ``res`` points, then
reports the sup of |quantity| / bound. A bound is judged to hold when the
sup is finite and grows by less than 10% from resolution res/2 to res.
Finer resolutions also reach smaller s, so a wrong exponent shows up as an
exploding sup. This is a regression heuristic, not a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import critical_constant, empirical_eta
from .errors import ParameterDomainError
from .kernels import CovarianceKernel, Family

GROWTH_LIMIT = 0.10
ZERO_FLOOR = 1e-14


@dataclass(frozen=True)
class ExponentSet:
    theta: float
    nu: float
    lam: float
    gamma: float

    def __post_init__(self):
        _check_theta(self.theta)
        _check_nu(self.nu)
        _check_lambda(self.lam)
        _check_gamma(self.gamma)


def _check_theta(theta):
    if not 0.5 < theta < 1.0:
        raise ParameterDomainError(f"theta must lie in (1/2, 1), got {theta}")


def _check_nu(nu):
    if not nu > 1.0:
        raise ParameterDomainError(f"nu must exceed 1, got {nu}")


def _check_lambda(lam):
    if not 1.0 / 6.0 < lam <= 1.0 / 3.0 + 1e-15:
        raise ParameterDomainError(f"lambda must lie in (1/6, 1/3], got {lam}")


def _check_gamma(gamma):
    if not gamma > 1.0:
        raise ParameterDomainError(f"gamma must exceed 1, got {gamma}")


def default_exponents(kernel: CovarianceKernel) -> ExponentSet:
    """Exponents proven for each family at criticality.

    theta = 2/3 throughout. For (extended) bBm and fBm: nu = 5/3 if H < 1/2
    else 4H - 1/3; gamma = 2/3 + 2H if H <= 1/2 and K < 1 else 5/3;
    lambda = 1/3, or min(2H, 1/3) when K > 1. For sfBm: nu = gamma = 5/3,
    lambda = 1/3.
    """
    if kernel.family is Family.SFBM:
        return ExponentSet(2 / 3, 5 / 3, 1 / 3, 5 / 3)
    H, K = kernel.H, kernel.K
    nu = 5 / 3 if H < 0.5 else 4 * H - 1 / 3
    gamma = 2 / 3 + 2 * H if (H <= 0.5 and K < 1) else 5 / 3
    lam = min(2 * H, 1 / 3) if K > 1 else 1 / 3
    return ExponentSet(2 / 3, nu, lam, gamma)


@dataclass
class ConditionReport:
    condition: str
    sup_ratio: float
    argmax_point: tuple
    grid_resolution: int
    passed: bool
    exponent: float | None = None
    sup_by_resolution: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "sup_ratio": self.sup_ratio,
            "argmax_point": list(self.argmax_point),
            "grid_resolution": self.grid_resolution,
            "pass": self.passed,
            "exponent": self.exponent,
            "sup_by_resolution": {str(k): v for k, v in self.sup_by_resolution.items()},
        }


def s_levels(res: int) -> np.ndarray:
    return 2.0 ** (-np.arange(res) / 4.0)


def _safe_ratio(num, den):
    num = np.abs(num)
    num = np.where(num < ZERO_FLOOR, 0.0, num)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(num == 0.0, 0.0, num / den)
    return r


def _incr_var(R, t, s):
    """E[(X_t - X_{t-s})^2]."""
    return R(t, t) - 2 * R(t, t - s) + R(t - s, t - s)


def _sup_i(kernel, T, res, _):
    R = kernel.cov
    best = (0.0, (math.nan,) * 3)
    for s in s_levels(res):
        if s > T:
            continue
        t = np.linspace(s, T, res)
        r = _safe_ratio(_incr_var(R, t, s), s ** (1 / 3))
        best = _keep(best, r, lambda i: (s, t[i], math.nan))
    return best


def _sup_ii(kernel, T, res, theta):
    R = kernel.cov
    best = (0.0, (math.nan,) * 3)
    for s in s_levels(res):
        if s > T:
            continue
        t = np.linspace(s, T, res)
        num = (R(t, t) - R(t - s, t - s)) * (t - s) ** theta
        r = _safe_ratio(num, s ** (1 / 3 + theta))
        best = _keep(best, r, lambda i: (s, t[i], math.nan))
    return best


def _sup_iii(kernel, T, res, nu):
    R = kernel.cov
    best = (0.0, (math.nan,) * 3)
    for s in s_levels(res):
        if 4 * s > T:
            continue
        t = np.linspace(4 * s, T, res)
        num = _incr_var(R, t, s) - _incr_var(R, t - s, s)
        r = _safe_ratio(num, s ** (1 / 3 + nu) * (t - 2 * s) ** (-nu))
        best = _keep(best, r, lambda i: (s, t[i], math.nan))
    return best


def _sup_iv(kernel, T, res, lam):
    R = kernel.cov
    best = (0.0, (math.nan,) * 3)
    r_grid = np.linspace(0.0, T, res)
    for s in s_levels(res):
        if s > T:
            continue
        t = np.linspace(s, T, res)
        tt, rr = np.meshgrid(t, r_grid, indexing="ij")
        num = R(rr, tt) - R(rr, tt - s)
        far = (np.abs(tt - rr) >= 2 * s) & (tt >= 2 * s)
        with np.errstate(divide="ignore"):
            bound_far = s * ((tt - s) ** (lam - 1) + np.abs(tt - rr) ** (lam - 1))
        bound = np.where(far, bound_far, s**lam)
        r = _safe_ratio(num, bound).ravel()
        best = _keep(best, r, lambda i: (s, tt.flat[i], rr.flat[i]))
    return best


def _sup_v(kernel, T, res, gamma):
    R = kernel.cov
    best = (0.0, (math.nan,) * 3)
    for s in s_levels(res):
        if 4 * s > T:
            continue
        g = np.linspace(2 * s, T, res)
        tt, rr = np.meshgrid(g, g, indexing="ij")
        ok = np.abs(tt - rr) >= 2 * s
        tt, rr = tt[ok], rr[ok]
        if tt.size == 0:
            continue
        num = R(tt, rr) - R(tt - s, rr) - R(tt, rr - s) + R(tt - s, rr - s)
        r = _safe_ratio(num, s ** (1 / 3 + gamma) * np.abs(tt - rr) ** (-gamma))
        best = _keep(best, r, lambda i: (s, tt[i], rr[i]))
    return best


def _keep(best, ratios, point):
    if ratios.size == 0:
        return best
    i = int(np.argmax(ratios))
    if ratios[i] > best[0] or not np.isfinite(ratios[i]):
        return float(ratios[i]), tuple(float(x) for x in point(i))
    return best


def _audit(name, scan, kernel, T, res, exponent):
    if res < 8:
        raise ParameterDomainError(f"res must be >= 8, got {res}")
    if not T > 0:
        raise ParameterDomainError(f"T must be positive, got {T}")
    sups = {}
    for r in (res // 4, res // 2, res):
        if r >= 4:
            sups[r] = scan(kernel, T, r, exponent)
    sup, point = sups[res]
    coarse = sups[res // 2][0]
    finite = math.isfinite(sup)
    if coarse == 0.0:
        passed = finite and sup == 0.0
    else:
        passed = finite and sup < (1.0 + GROWTH_LIMIT) * coarse
    return ConditionReport(
        condition=name,
        sup_ratio=sup,
        argmax_point=point,
        grid_resolution=res,
        passed=bool(passed),
        exponent=exponent,
        sup_by_resolution={r: v[0] for r, v in sups.items()},
    )


def check_condition_i(kernel: CovarianceKernel, T: float = 2.0, res: int = 64) -> ConditionReport:
    """sup E[(X_t - X_{t-s})^2] / s^(1/3)."""
    return _audit("I", _sup_i, kernel, T, res, None)


def check_condition_ii(kernel: CovarianceKernel, T: float = 2.0, res: int = 64,
                       theta: float = 2 / 3) -> ConditionReport:
    """sup |E[X_t^2 - X_{t-s}^2]| (t-s)^theta / s^(1/3+theta)."""
    _check_theta(theta)
    return _audit("II", _sup_ii, kernel, T, res, theta)


def check_condition_iii(kernel: CovarianceKernel, T: float = 2.0, res: int = 64,
                        nu: float = 5 / 3) -> ConditionReport:
    """Difference of consecutive increment variances against s^(1/3+nu) (t-2s)^-nu, t >= 4s."""
    _check_nu(nu)
    return _audit("III", _sup_iii, kernel, T, res, nu)


def check_condition_iv(kernel: CovarianceKernel, T: float = 2.0, res: int = 64,
                       lam: float = 1 / 3) -> ConditionReport:
    """|E[X_r (X_t - X_{t-s})]| against the two-branch bound with exponent lambda."""
    _check_lambda(lam)
    return _audit("IV", _sup_iv, kernel, T, res, lam)


def check_condition_v(kernel: CovarianceKernel, T: float = 2.0, res: int = 64,
                      gamma: float = 5 / 3) -> ConditionReport:
    """Covariance of separated increments against s^(1/3+gamma) |t-r|^-gamma."""
    _check_gamma(gamma)
    return _audit("V", _sup_v, kernel, T, res, gamma)


def audit_all(kernel: CovarianceKernel, T: float = 2.0, res: int = 64,
              exponents: ExponentSet | None = None) -> list[ConditionReport]:
    """Run audits (i)-(v), by default with :func:`default_exponents`."""
    ex = exponents or default_exponents(kernel)
    return [
        check_condition_i(kernel, T, res),
        check_condition_ii(kernel, T, res, ex.theta),
        check_condition_iii(kernel, T, res, ex.nu),
        check_condition_iv(kernel, T, res, ex.lam),
        check_condition_v(kernel, T, res, ex.gamma),
    ]


@dataclass
class EtaConvergenceReport:
    t: float
    n_list: list
    values: list
    predicted: float | None
    passed: bool

    def to_dict(self) -> dict:
        return {
            "condition": "VI",
            "t": self.t,
            "n_list": list(self.n_list),
            "values": list(self.values),
            "predicted": self.predicted,
            "pass": self.passed,
        }


def check_condition_vi(kernel: CovarianceKernel, t: float = 1.0, n_list=(64, 128, 256, 512),
                       tol: float = 1e-12) -> EtaConvergenceReport:
    """Table of sum beta_n^3 over ``n_list`` with the predicted eta(t).

    Passes when the distance to the prediction shrinks at every step (for a
    subcritical kernel, with no prediction, when successive differences shrink).
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 2 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ParameterDomainError("n_list must be increasing with at least two entries")
    values = [empirical_eta(kernel, n, t) for n in n_list]
    regime = kernel.regime
    if regime == "critical":
        predicted = critical_constant(kernel, tol).value * t
    elif regime == "supercritical":
        predicted = 0.0
    else:
        predicted = None
    if predicted is not None:
        gaps = [abs(v - predicted) for v in values]
    else:
        gaps = [abs(b - a) for a, b in zip(values, values[1:])]
    passed = all(b <= a for a, b in zip(gaps, gaps[1:]))
    return EtaConvergenceReport(float(t), n_list, values, predicted, passed)
