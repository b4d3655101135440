"""Pure numpy replicate kernels (fallback for ``_ckernels``).

Same signatures and bit-identical results as the compiled module.
"""
import numpy as np


def step_up_counts(values, q, shift, m_total, strict):
    values = np.asarray(values, dtype=np.float64)
    rows, n = values.shape
    if n == 0:
        return np.zeros(rows, dtype=np.int64)
    ordered = np.sort(values, axis=1)
    idx = np.arange(1, n + 1, dtype=np.int64) + shift
    thresholds = np.asarray(q, dtype=np.float64)[:, None] * idx.astype(np.float64) / float(m_total)
    hit = ordered < thresholds if strict else ordered <= thresholds
    # last True per row, 0 when none
    last = n - np.argmax(hit[:, ::-1], axis=1)
    return np.where(hit.any(axis=1), last, 0).astype(np.int64)


def gamma_hat_sorted(sorted_values, x):
    s = np.asarray(sorted_values, dtype=np.float64)
    rows, n = s.shape
    if n == 0:
        return np.ones(rows, dtype=np.float64)
    heights = 1.0 - np.arange(1, n + 1, dtype=np.float64) / float(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(s <= x, heights / (1.0 - s), np.inf)
    return np.minimum(ratio.min(axis=1), 1.0)


def count_leq(values, thresholds):
    values = np.asarray(values, dtype=np.float64)
    return (values <= np.asarray(thresholds, dtype=np.float64)[:, None]).sum(axis=1).astype(np.int64)


def ks_uniform_sorted(sorted_values):
    s = np.asarray(sorted_values, dtype=np.float64)
    rows, n = s.shape
    if n == 0:
        return np.zeros(rows, dtype=np.float64)
    i = np.arange(n, dtype=np.float64)
    above = (i + 1.0) / float(n) - s
    below = s - i / float(n)
    return np.maximum(np.maximum(above.max(axis=1), below.max(axis=1)), 0.0)
