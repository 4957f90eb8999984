"""
Covariance kernels of the fBm-type process families.

Four centered Gaussian families are supported, all starting at zero:

* ``FBM``      fractional Brownian motion,
               R(s,t) = 1/2 (s^2H + t^2H - |t-s|^2H),
* ``BBM``      bifractional Brownian motion, K in (0, 1],
               R(s,t) = 2^-K [(s^2H + t^2H)^K - |t-s|^2HK],
* ``EXT_BBM``  the same formula with K in (1, 2) and 0 < HK < 1,
* ``SFBM``     sub-fractional Brownian motion, h in (0, 2),
               R(s,t) = s^h + t^h - 1/2 [(s+t)^h + |s-t|^h].

Increment covariances are always obtained from the four-point difference of
R, so every family shares one code path.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParameterDomainError, UnsupportedFamilyError

# HK (or h/2) closer than this to 1/6 counts as the critical case.
CRITICAL_TOL = 1e-12


class Family(str, enum.Enum):
    FBM = "fbm"
    BBM = "bbm"
    EXT_BBM = "ext-bbm"
    SFBM = "sfbm"

    @classmethod
    def parse(cls, name: str) -> "Family":
        key = name.strip().lower().replace("_", "-")
        for fam in cls:
            if fam.value == key:
                return fam
        raise UnsupportedFamilyError(f"unknown process family {name!r}")


@dataclass(frozen=True)
class CovarianceKernel:
    """Parametrized covariance function of one of the four families.

    Use the ``fbm``/``bbm``/``ext_bbm``/``sfbm`` constructors rather than
    filling the fields by hand; unused parameters are stored as ``None``.
    """

    family: Family
    H: float | None = None
    K: float | None = None
    h: float | None = None

    def __post_init__(self):
        fam = self.family
        if fam is Family.SFBM:
            if self.h is None or not 0.0 < self.h < 2.0:
                raise ParameterDomainError(f"sfBm needs h in (0, 2), got h={self.h}")
            return
        if self.H is None:
            raise ParameterDomainError(f"{fam.value} needs H")
        if fam is Family.FBM:
            if not 0.0 < self.H < 1.0:
                raise ParameterDomainError(f"fBm needs H in (0, 1), got H={self.H}")
            if self.K not in (None, 1.0):
                raise ParameterDomainError("fBm has K = 1")
            object.__setattr__(self, "K", 1.0)
        elif fam is Family.BBM:
            if not 0.0 < self.H < 1.0:
                raise ParameterDomainError(f"bBm needs H in (0, 1), got H={self.H}")
            if self.K is None or not 0.0 < self.K <= 1.0:
                raise ParameterDomainError(f"bBm needs K in (0, 1], got K={self.K}")
        elif fam is Family.EXT_BBM:
            if self.K is None or not 1.0 < self.K < 2.0:
                raise ParameterDomainError(f"extended bBm needs K in (1, 2), got K={self.K}")
            if not 0.0 < self.H * self.K < 1.0:
                raise ParameterDomainError(
                    f"extended bBm needs 0 < HK < 1, got HK={self.H * self.K}"
                )

    @classmethod
    def fbm(cls, H: float) -> "CovarianceKernel":
        return cls(Family.FBM, H=float(H), K=1.0)

    @classmethod
    def bbm(cls, H: float, K: float) -> "CovarianceKernel":
        return cls(Family.BBM, H=float(H), K=float(K))

    @classmethod
    def ext_bbm(cls, H: float, K: float) -> "CovarianceKernel":
        return cls(Family.EXT_BBM, H=float(H), K=float(K))

    @classmethod
    def sfbm(cls, h: float) -> "CovarianceKernel":
        return cls(Family.SFBM, h=float(h))

    @property
    def increment_exponent(self) -> float:
        """Exponent p with E[(X_t - X_{t-s})^2] of order s^p (2HK, or h)."""
        if self.family is Family.SFBM:
            return self.h
        return 2.0 * self.H * self.K

    @property
    def regime(self) -> str:
        """``"critical"``, ``"supercritical"`` or ``"subcritical"``."""
        x = self.increment_exponent / 2.0
        if abs(x - 1.0 / 6.0) < CRITICAL_TOL:
            return "critical"
        return "supercritical" if x > 1.0 / 6.0 else "subcritical"

    def params(self) -> dict:
        """Non-null parameters as a plain dict (for reports and cache keys)."""
        out = {"family": self.family.value}
        for name in ("H", "K", "h"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    def cov(self, s, t):
        """Vectorized R(s, t); see :func:`eval_R`."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any(s < 0) or np.any(t < 0):
            raise ParameterDomainError("times must be non-negative")
        fam = self.family
        if fam is Family.FBM:
            p = 2.0 * self.H
            return 0.5 * (s**p + t**p - np.abs(t - s) ** p)
        if fam is Family.SFBM:
            h = self.h
            return s**h + t**h - 0.5 * ((s + t) ** h + np.abs(s - t) ** h)
        p = 2.0 * self.H
        K = self.K
        return 2.0**-K * ((s**p + t**p) ** K - np.abs(t - s) ** (p * K))


def eval_R(kernel: CovarianceKernel, s, t):
    """Covariance R(s, t) = E[X_s X_t] in closed form.

    Scalars in, float out; arrays broadcast. Negative times raise
    :class:`ParameterDomainError`.
    """
    out = kernel.cov(s, t)
    return float(out) if np.ndim(out) == 0 else out


def beta(kernel: CovarianceKernel, n: int, j, k):
    """Covariance of the j-th and k-th increments on the grid of step 1/n.

    beta_n(j,k) = R((j+1)/n,(k+1)/n) - R((j+1)/n,k/n) - R(j/n,(k+1)/n) + R(j/n,k/n).
    """
    if n < 1:
        raise ParameterDomainError(f"n must be >= 1, got {n}")
    j = np.asarray(j, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(j < 0) or np.any(k < 0):
        raise ParameterDomainError("increment indices must be non-negative")
    R = kernel.cov
    out = (
        R((j + 1) / n, (k + 1) / n)
        - R((j + 1) / n, k / n)
        - R(j / n, (k + 1) / n)
        + R(j / n, k / n)
    )
    return float(out) if np.ndim(out) == 0 else out


def beta_matrix(kernel: CovarianceKernel, n: int, m: int) -> np.ndarray:
    """The m x m matrix [beta_n(j,k)] for 0 <= j,k < m."""
    grid = np.arange(m + 1) / n
    R = kernel.cov(grid[:, None], grid[None, :])
    return R[1:, 1:] - R[1:, :-1] - R[:-1, 1:] + R[:-1, :-1]


class PsiPhi(NamedTuple):
    phi: float
    psi: float


def psi_phi_decomposition(kernel: CovarianceKernel, j, k) -> PsiPhi:
    """Position/distance split of the unit-step increment covariance.

    For (extended) bBm, ``phi`` is the position term

        [(j+1)^2H + (k+1)^2H]^K - [(j+1)^2H + k^2H]^K
            - [j^2H + (k+1)^2H]^K + [j^2H + k^2H]^K

    and ``psi`` the distance term |j-k+1|^2HK - 2|j-k|^2HK + |j-k-1|^2HK,
    so that beta_n(j,k) = 2^-K n^-2HK (phi + psi).

    For sfBm, ``phi`` holds omega(j,k) = -(j+k+2)^h + 2(j+k+1)^h - (j+k)^h and
    beta_n(j,k) = 1/2 n^-h (omega + psi). :func:`split_scale` gives the prefactor.
    """
    fam = kernel.family
    if fam not in (Family.BBM, Family.EXT_BBM, Family.SFBM):
        raise UnsupportedFamilyError(
            f"position/distance split is defined for bbm, ext-bbm and sfbm, not {fam.value}"
        )
    j = np.asarray(j, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(j < 0) or np.any(k < 0):
        raise ParameterDomainError("increment indices must be non-negative")
    p = kernel.increment_exponent
    d = j - k
    psi = np.abs(d + 1) ** p - 2.0 * np.abs(d) ** p + np.abs(d - 1) ** p
    if fam is Family.SFBM:
        a = j + k
        phi = -((a + 2) ** p) + 2.0 * (a + 1) ** p - a**p
    else:
        q = 2.0 * kernel.H
        K = kernel.K
        phi = (
            ((j + 1) ** q + (k + 1) ** q) ** K
            - ((j + 1) ** q + k**q) ** K
            - (j**q + (k + 1) ** q) ** K
            + (j**q + k**q) ** K
        )
    if np.ndim(phi) == 0:
        return PsiPhi(float(phi), float(psi))
    return PsiPhi(phi, psi)


def split_scale(kernel: CovarianceKernel, n: int) -> float:
    """Prefactor c_n with beta_n(j,k) = c_n (phi + psi)."""
    if kernel.family is Family.SFBM:
        return 0.5 * n ** (-kernel.h)
    if kernel.family is Family.FBM:
        raise UnsupportedFamilyError("fbm has no position/distance split")
    return 2.0 ** (-kernel.K) * n ** (-kernel.increment_exponent)


@dataclass(frozen=True)
class GridSpec:
    """Uniform partition j/n, j = 0..m, of [0, T] with m = floor(nT)."""

    n: int
    T: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterDomainError(f"n must be a positive integer, got {self.n}")
        if not self.T > 0:
            raise ParameterDomainError(f"T must be positive, got {self.T}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "T", float(self.T))
        if self.m < 1:
            raise ParameterDomainError(f"grid n={self.n}, T={self.T} has no increments")

    @property
    def m(self) -> int:
        return grid_index(self.n, self.T)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.m + 1) / self.n


def grid_index(n: int, t: float) -> int:
    """floor(n t), tolerant to round-off just below an integer (e.g. 3 * (1/3))."""
    x = n * t
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return int(math.floor(x))
