"""
Path functionals built on the trapezoidal Stratonovich sum.

All functionals take a :class:`~stratlab.sampler.SamplePath` (scalar result)
or a :class:`~stratlab.sampler.PathEnsemble` (one result per path) and a time
t; the sums run over j = 0..floor(nt)-1 and ignore the partial step after the
last grid point.

Per step, with D = X_{j+1} - X_j and midpoint Xh = (X_j + X_{j+1}) / 2,

    f(X_{j+1}) - f(X_j) = (f'(X_j) + f'(X_{j+1})) / 2 * D
                          - f'''(Xh) D^3 / 12 - f^(5)(Xh) D^5 / 480 + rho_j

where rho_j collects derivatives of order >= 7 (exactly zero for
polynomials of degree <= 6).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from ._summation import neumaier_sum
from .errors import ParameterDomainError
from .kernels import beta, grid_index

THIRD_ORDER_COEF = 1.0 / 12.0
FIFTH_ORDER_COEF = 1.0 / 480.0


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Polynomial test function with exact derivatives."""

    __test__ = False  # not a pytest class

    name: str
    poly: Polynomial

    def __call__(self, x):
        return self.poly(x)

    def derivative(self, k: int = 1) -> Polynomial:
        return self.poly.deriv(k) if k else self.poly

    def d(self, k: int, x):
        """k-th derivative evaluated at x."""
        return self.derivative(k)(x)

    @property
    def degree(self) -> int:
        return self.poly.degree()

    @classmethod
    def from_coefficients(cls, coef, name: str | None = None) -> "TestFunction":
        coef = [float(c) for c in coef]
        return cls(name or "poly:" + ",".join(f"{c:g}" for c in coef), Polynomial(coef))

    @classmethod
    def parse(cls, spec: str) -> "TestFunction":
        """Build from ``x3``, ``x^3``, ``x2/2``, ``3x2``, or ``poly:c0,c1,...``."""
        text = spec.strip().lower().replace(" ", "")
        if text.startswith("poly:"):
            return cls.from_coefficients(text[5:].split(","), name=spec)
        m = re.fullmatch(r"(\d*\.?\d*)\*?x(?:\^?(\d+))?(?:/(\d+\.?\d*))?", text)
        if not m:
            raise ParameterDomainError(f"cannot parse test function {spec!r}")
        scale = float(m.group(1)) if m.group(1) else 1.0
        power = int(m.group(2)) if m.group(2) else 1
        if m.group(3):
            scale /= float(m.group(3))
        coef = [0.0] * power + [scale]
        return cls(spec, Polynomial(coef))


def _values(path):
    v = np.asarray(path.values, dtype=float)
    return v


def _steps(path, t) -> int:
    m_t = grid_index(path.grid.n, t)
    if t < 0 or m_t > path.grid.m:
        raise ParameterDomainError(f"t={t} is outside the path horizon [0, {path.grid.T}]")
    if m_t < 1:
        raise ParameterDomainError(f"t={t} gives no complete grid step at n={path.grid.n}")
    return m_t


def _increments(path, t):
    m_t = _steps(path, t)
    x = _values(path)[..., : m_t + 1]
    dx = np.diff(x, axis=-1)
    mid = 0.5 * (x[..., :-1] + x[..., 1:])
    return x, dx, mid


def phi_n(path, f: TestFunction, t: float):
    """Trapezoidal sum 1/2 sum_j [f'(X_j) + f'(X_{j+1})] D_j."""
    x, dx, _ = _increments(path, t)
    fp = f.d(1, x)
    return neumaier_sum(0.5 * (fp[..., :-1] + fp[..., 1:]) * dx)


def increment_of_f(path, f: TestFunction, t: float):
    """f(X_{floor(nt)/n}) - f(X_0)."""
    m_t = _steps(path, t)
    x = _values(path)
    return f(x[..., m_t]) - f(x[..., 0])


def third_order_sum(path, f: TestFunction, t: float):
    """sum_j f'''(Xh_j) D_j^3 (unsigned; the expansion carries -1/12)."""
    _, dx, mid = _increments(path, t)
    return neumaier_sum(f.d(3, mid) * dx**3)


def fifth_order_sum(path, f: TestFunction, t: float):
    """sum_j f^(5)(Xh_j) D_j^5."""
    _, dx, mid = _increments(path, t)
    return neumaier_sum(f.d(5, mid) * dx**3 * dx**2)


def y_n_term(path, f: TestFunction, t: float):
    """sum_j beta_n(j,j) f'''(Xh_j) D_j, with beta taken from the path's kernel."""
    if path.kernel is None:
        raise ParameterDomainError("y_n_term needs a path that carries its kernel")
    _, dx, mid = _increments(path, t)
    j = np.arange(dx.shape[-1])
    w = beta(path.kernel, path.grid.n, j, j)
    return neumaier_sum(w * f.d(3, mid) * dx)


def cubic_variation(path, t: float):
    """sum_j D_j^3."""
    _, dx, _ = _increments(path, t)
    return neumaier_sum(dx**3)


def taylor_residuals(path, f: TestFunction, t: float):
    """Per-step rho_j of the expansion in the module docstring."""
    x, dx, mid = _increments(path, t)
    fp = f.d(1, x)
    trap = 0.5 * (fp[..., :-1] + fp[..., 1:]) * dx
    return (
        f(x[..., 1:]) - f(x[..., :-1]) - trap
        + THIRD_ORDER_COEF * f.d(3, mid) * dx**3
        + FIFTH_ORDER_COEF * f.d(5, mid) * dx**5
    )


def taylor_remainder(path, f: TestFunction, t: float):
    """sum_j rho_j, i.e. the part of f(X_t) - f(X_0) - Phi_n not captured by orders 3 and 5."""
    return neumaier_sum(taylor_residuals(path, f, t))


def residual_bound(path, f: TestFunction, t: float):
    """Per-step bound max|f^(7)| / (8 * 7!) * |D_j|^7, max taken over the path's range.

    Each side of the expansion contributes a Lagrange remainder; their sum is
    2 (1/7! + 1/6!) max|f^(7)| (D/2)^7 = max|f^(7)| D^7 / (8 * 7!).
    """
    x, dx, _ = _increments(path, t)
    f7 = f.derivative(7)
    lo = np.min(x, axis=-1, keepdims=True)
    hi = np.max(x, axis=-1, keepdims=True)
    m7 = _poly_abs_max(f7, lo, hi)
    return m7 / (8.0 * math.factorial(7)) * np.abs(dx) ** 7


def _poly_abs_max(p: Polynomial, lo, hi):
    """max |p| over [lo, hi] (elementwise over broadcast intervals)."""
    crit = p.deriv().roots() if p.degree() > 0 else np.array([])
    crit = np.real(crit[np.abs(np.imag(crit)) < 1e-12]) if crit.size else crit
    best = np.maximum(np.abs(p(lo)), np.abs(p(hi)))
    for c in crit:
        inside = (lo <= c) & (c <= hi)
        best = np.where(inside, np.maximum(best, abs(p(c))), best)
    return best
