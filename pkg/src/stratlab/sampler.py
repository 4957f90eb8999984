"""
Exact Gaussian path simulation on a uniform grid.

The covariance of (X_{1/n}, ..., X_{m/n}) is factorized once by dense
Cholesky and reused; X_0 = 0 is prepended since R(0, .) vanishes for every
family. Normals come from Philox streams keyed by ``(seed, stream, index)``,
so path ``index`` of an ensemble does not depend on how many paths were drawn
before it or in which order.
"""

from __future__ import annotations

import functools
import hashlib
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import InvalidVarianceError, NotPositiveSemidefiniteError
from .kernels import CovarianceKernel, GridSpec

# Seed domains; X and B paths never share normals.
STREAM_X = 0
STREAM_B = 1

JITTER_LEVELS = (1e-12, 1e-10, 1e-8)

CACHE_ENV = "STRATLAB_CACHE_DIR"
_CACHE_MAGIC = b"STRLCF"
_CACHE_VERSION = 1


@dataclass(frozen=True, eq=False)
class CovarianceFactor:
    grid: GridSpec
    kernel: CovarianceKernel
    L: np.ndarray = field(repr=False)
    jitter_used: float = 0.0

    def covariance(self) -> np.ndarray:
        return covariance_matrix(self.kernel, self.grid)


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One realization X_{j/n}, j = 0..m; ``values[0]`` is exactly 0."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)
    seed: int
    kernel: CovarianceKernel | None = None


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Many paths on one grid, ``values`` of shape (paths, m + 1)."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)
    seed: int
    kernel: CovarianceKernel | None = None

    def __len__(self):
        return self.values.shape[0]

    def path(self, i: int) -> SamplePath:
        return SamplePath(self.grid, self.values[i], self.seed, self.kernel)

    def coarsen(self, n: int) -> "PathEnsemble":
        """Restrict to the sub-grid of step 1/n (n must divide the grid's n)."""
        if self.grid.n % n:
            raise ValueError(f"n={n} does not divide the grid resolution {self.grid.n}")
        step = self.grid.n // n
        coarse = GridSpec(n, self.grid.T)
        vals = self.values[:, : coarse.m * step + 1 : step]
        return PathEnsemble(coarse, vals, self.seed, self.kernel)


def covariance_matrix(kernel: CovarianceKernel, grid: GridSpec) -> np.ndarray:
    times = grid.times[1:]
    return kernel.cov(times[:, None], times[None, :])


def factorize(kernel: CovarianceKernel, grid: GridSpec, cache_dir=None) -> CovarianceFactor:
    """Lower Cholesky factor of the grid covariance, memoized per (kernel, grid).

    Diagonal jitter of 1e-12, 1e-10, 1e-8 times the mean diagonal is tried
    only if the plain matrix fails to factorize. With ``cache_dir`` (or the
    ``STRATLAB_CACHE_DIR`` environment variable) factors are also persisted
    to disk.
    """
    cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)
    if cache_dir:
        path = Path(cache_dir) / _cache_name(kernel, grid)
        if path.exists():
            factor = load_factor(path, kernel, grid)
            if factor is not None:
                return factor
        factor = _factorize_cached(kernel, grid)
        save_factor(factor, path)
        return factor
    return _factorize_cached(kernel, grid)


@functools.lru_cache(maxsize=32)
def _factorize_cached(kernel: CovarianceKernel, grid: GridSpec) -> CovarianceFactor:
    sigma = covariance_matrix(kernel, grid)
    scale = float(np.mean(np.diag(sigma)))
    for jitter in (0.0,) + JITTER_LEVELS:
        try:
            a = sigma + jitter * scale * np.eye(len(sigma)) if jitter else sigma
            L = linalg.cholesky(a, lower=True, check_finite=True)
        except linalg.LinAlgError:
            continue
        L.flags.writeable = False
        return CovarianceFactor(grid, kernel, L, jitter * scale)
    raise NotPositiveSemidefiniteError(
        f"covariance of {kernel.params()} on n={grid.n}, T={grid.T} is not "
        f"positive definite even with jitter {JITTER_LEVELS[-1]:g} x mean diagonal"
    )


def _cache_name(kernel: CovarianceKernel, grid: GridSpec) -> str:
    key = repr((sorted(kernel.params().items()), grid.n, grid.T))
    digest = hashlib.sha256(key.encode()).hexdigest()[:20]
    return f"factor-v{_CACHE_VERSION}-{digest}.bin"


def save_factor(factor: CovarianceFactor, path) -> None:
    """Write a factor as header + little-endian float64 row-major matrix."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    m = factor.L.shape[0]
    header = _CACHE_MAGIC + struct.pack("<IId", _CACHE_VERSION, m, factor.jitter_used)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(factor.L, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_factor(path, kernel: CovarianceKernel, grid: GridSpec) -> CovarianceFactor | None:
    """Read a factor written by :func:`save_factor`; None if stale or mismatched."""
    raw = Path(path).read_bytes()
    hlen = len(_CACHE_MAGIC) + struct.calcsize("<IId")
    if raw[: len(_CACHE_MAGIC)] != _CACHE_MAGIC:
        return None
    version, m, jitter = struct.unpack("<IId", raw[len(_CACHE_MAGIC) : hlen])
    if version != _CACHE_VERSION or m != grid.m or len(raw) != hlen + 8 * m * m:
        return None
    L = np.frombuffer(raw[hlen:], dtype="<f8").reshape(m, m).astype(float)
    L.flags.writeable = False
    return CovarianceFactor(grid, kernel, L, jitter)


def rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator for path ``index`` of seed domain ``stream``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def _normals(seed, stream, start, count, size):
    z = np.empty((count, size))
    for i in range(count):
        z[i] = rng(seed, stream, start + i).standard_normal(size)
    return z


def sample_paths(factor: CovarianceFactor, seed: int, n_paths: int, start: int = 0,
                 stream: int = STREAM_X) -> PathEnsemble:
    """Paths ``start .. start + n_paths - 1`` of the ensemble keyed by ``seed``."""
    m = factor.grid.m
    z = _normals(seed, stream, start, n_paths, m)
    values = np.zeros((n_paths, m + 1))
    values[:, 1:] = z @ factor.L.T
    return PathEnsemble(factor.grid, values, seed, factor.kernel)


def sample_path(factor: CovarianceFactor, seed: int, index: int = 0,
                stream: int = STREAM_X) -> SamplePath:
    """values[1..m] = L Z with Z standard normal drawn from ``rng(seed, stream, index)``."""
    z = rng(seed, stream, index).standard_normal(factor.grid.m)
    values = np.zeros(factor.grid.m + 1)
    values[1:] = factor.L @ z
    return SamplePath(factor.grid, values, seed, factor.kernel)


def _bm_increment_sd(variance_fn, grid: GridSpec) -> np.ndarray:
    v = np.array([float(variance_fn(t)) for t in grid.times])
    if abs(v[0]) > 1e-14:
        raise InvalidVarianceError(f"variance function must vanish at 0, got {v[0]}")
    dv = np.diff(v)
    bad = np.flatnonzero(dv < -1e-14 * max(1.0, float(np.max(np.abs(v)))))
    if bad.size:
        j = int(bad[0])
        raise InvalidVarianceError(
            f"variance function decreases on [{j / grid.n}, {(j + 1) / grid.n}]"
        )
    return np.sqrt(np.clip(dv, 0.0, None))


def sample_bm(variance_fn, grid: GridSpec, seed: int, index: int = 0,
              stream: int = STREAM_B) -> SamplePath:
    """Brownian motion with Var(B_t) = variance_fn(t), independent Gaussian increments."""
    sd = _bm_increment_sd(variance_fn, grid)
    z = rng(seed, stream, index).standard_normal(grid.m)
    values = np.concatenate([[0.0], np.cumsum(sd * z)])
    return SamplePath(grid, values, seed)


def sample_bm_paths(variance_fn, grid: GridSpec, seed: int, n_paths: int, start: int = 0,
                    stream: int = STREAM_B) -> PathEnsemble:
    sd = _bm_increment_sd(variance_fn, grid)
    z = _normals(seed, stream, start, n_paths, grid.m)
    values = np.zeros((n_paths, grid.m + 1))
    values[:, 1:] = np.cumsum(z * sd, axis=1)
    return PathEnsemble(grid, values, seed)
