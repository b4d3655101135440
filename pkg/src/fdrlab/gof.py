"""Goodness-of-fit view of the step-up rule.

The BH count satisfies ``{R >= r} = {max_{k >= r} (H_m(t_k) - t_k) / t_k >= (1 - q) / q}``
with ``t_k = q k / m``, so scanning the scaled empirical-process statistic
over the threshold grid recovers ``R`` without touching order statistics.
This module does exactly that, using only empirical-CDF evaluations, and
serves as an independent check on :func:`fdrlab.procedures.bh_count`.
"""
from __future__ import annotations

import math

import numpy as np

from .distributions import rng_for
from .errors import ConfigurationError
from .procedures import PValueBatch
from . import kernels


class EmpiricalCdf:
    """Right-continuous empirical CDF ``H_m(t) = #{X_i <= t} / m``."""

    def __init__(self, values):
        self.sorted = np.sort(np.asarray(values, dtype=np.float64))
        self.m = self.sorted.size

    def counts(self, t):
        return np.searchsorted(self.sorted, t, side="right")

    def __call__(self, t):
        c = self.counts(t)
        if self.m == 0:
            return np.zeros_like(np.asarray(t, dtype=float))
        return c / self.m


def _grid(q, m):
    k = np.arange(1, m + 1, dtype=np.int64)
    # same rounding as the step-up thresholds
    return k, q * k.astype(np.float64) / float(m)


def _check_q(q):
    if not (0.0 < q <= 1.0):
        raise ConfigurationError(f"q must lie in (0, 1], got {q}")


def psi_grid(batch: PValueBatch, q: float, r: int) -> float:
    """``max_{k=r..m} (H_m(t_k) - t_k) / t_k`` over the grid ``t_k = q k / m``."""
    _check_q(q)
    m = batch.m
    if not (1 <= r <= m):
        raise ConfigurationError(f"start index r={r} must lie in [1, {m}]")
    H = EmpiricalCdf(batch.values)
    _, t = _grid(q, m)
    t = t[r - 1:]
    return float(np.max((H(t) - t) / t))


def renyi_sup(batch: PValueBatch, q: float, lower: float) -> float:
    """``sup_{lower <= t <= q} (H_m(t) - t) / t``, exact.

    Between jumps ``H_m`` is flat and ``c/t - 1`` falls, so the supremum sits
    at ``lower`` or at a sample point in ``(lower, q]``.
    """
    _check_q(q)
    # q * m / m may round one ulp above q; accept it as the endpoint
    if not (0.0 < lower <= q * (1.0 + 4.0 * np.finfo(float).eps)):
        raise ConfigurationError(f"lower must lie in (0, q], got {lower}")
    H = EmpiricalCdf(batch.values)
    pts = H.sorted[(H.sorted > lower) & (H.sorted <= q)]
    cand = np.concatenate([[lower, q], pts])
    if H.m == 0:
        return -1.0
    return float(np.max((H(cand) - cand) / cand))


def grid_exceedances(batch: PValueBatch, q: float) -> np.ndarray:
    """Boolean per grid index k: does ``(H_m(t_k) - t_k)/t_k`` reach ``(1 - q)/q``?

    At a grid point ``t_k / q = k / m``, so the comparison is made in the
    cleared form ``m H_m(t_k) >= k``, which is exact in integers.
    """
    _check_q(q)
    m = batch.m
    if m == 0:
        return np.zeros(0, dtype=bool)
    k, t = _grid(q, m)
    return EmpiricalCdf(batch.values).counts(t) >= k


def bh_via_gof(batch: PValueBatch, q: float) -> int:
    """Largest r whose tail statistic over ``{t_r, ..., t_m}`` reaches ``(1 - q)/q``."""
    if batch.m == 0:
        _check_q(q)
        return 0
    return int(bh_via_gof_rows(batch.values, q)[0])


def bh_via_gof_rows(values, q: float) -> np.ndarray:
    """:func:`bh_via_gof` for every row of a 2-D array of batches."""
    _check_q(q)
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    rows, m = values.shape
    k, t = _grid(q, m)
    # value v counts toward H_m(t_k) for every k past its first threshold >= v
    first = np.searchsorted(t, values, side="left")
    flat = (np.arange(rows)[:, None] * (m + 1) + first).ravel()
    counts = np.bincount(flat, minlength=rows * (m + 1)).reshape(rows, m + 1).cumsum(axis=1)[:, :m]
    hits = counts >= k
    # max over k >= r hits iff some hit index is >= r
    last = m - np.argmax(hits[:, ::-1], axis=1)
    return np.where(hits.any(axis=1), last, 0).astype(np.int64)


def no_rejection_probability(m: int, q: float, reps: int, seed: int = 0, chunk: int = 2000):
    """Monte Carlo estimate of ``P(R_m = 0)`` for i.i.d. uniform values.

    Returns ``(estimate, standard_error)``. The ballot identity gives
    ``1 - q`` for every ``m``.
    """
    if m < 1 or reps < 1:
        raise ConfigurationError("m and reps must be positive")
    if not (0.0 <= q <= 1.0):
        raise ConfigurationError(f"q must lie in [0, 1], got {q}")
    zeros = 0
    for c, start in enumerate(range(0, reps, chunk)):
        n = min(chunk, reps - start)
        u = rng_for(seed, c).random((n, m))
        zeros += int((kernels.step_up_counts(u, q, 0, m) == 0).sum())
    p = zeros / reps
    return p, math.sqrt(p * (1.0 - p) / reps)
