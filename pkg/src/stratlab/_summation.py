"""Compensated summation helpers."""

import math

import numpy as np


def neumaier_sum(terms, axis=-1):
    """Sum ``terms`` along ``axis`` with Neumaier's compensated algorithm.

    Vectorized over every other axis, so an ensemble of paths stored as a
    ``(paths, steps)`` array is reduced path-by-path in a single loop over
    the steps. Returns a float for 1-D input.
    """
    a = np.moveaxis(np.asarray(terms, dtype=float), axis, 0)
    total = np.zeros(a.shape[1:])
    comp = np.zeros(a.shape[1:])
    for x in a:
        t = total + x
        big = np.abs(total) >= np.abs(x)
        comp += np.where(big, (total - t) + x, (x - t) + total)
        total = t
    out = total + comp
    return float(out) if out.ndim == 0 else out


def exact_sum(values):
    """Correctly rounded sum of a flat collection (``math.fsum``)."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())
