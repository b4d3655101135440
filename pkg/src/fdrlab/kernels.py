"""Replicate kernels, compiled when available.

Set ``FDRLAB_PURE_PYTHON=1`` to force the numpy implementation.
``BACKEND`` reports which one was loaded.

All kernels take 2-D float64 arrays (one replicate per row):

``step_up_counts(values, q, shift, m_total, strict)``
    ``max{i : X_(i) <= q[row] * (i + shift) / m_total}`` per row, 0 if
    none (``<`` when ``strict``). Rows need not be sorted.
``gamma_hat_sorted(sorted_values, x)``
    ``min(1, min_{X_(i) <= x} (1 - i/n) / (1 - X_(i)))`` per row.
``count_leq(values, thresholds)``
    number of entries ``<= thresholds[row]`` per row.
``ks_uniform_sorted(sorted_values)``
    sup distance between each row's empirical CDF and the identity.
"""
import os

import numpy as np

from . import _pykernels

python_kernels = _pykernels
compiled_kernels = None

if not os.environ.get("FDRLAB_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_kernels
    except ImportError:
        compiled_kernels = None

_impl = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "cython" if compiled_kernels is not None else "python"


def _rows(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    return a


def step_up_counts(values, q, shift=0, m_total=None, strict=False):
    values = _rows(values)
    if m_total is None:
        m_total = values.shape[1] + shift
    q = np.ascontiguousarray(np.broadcast_to(np.asarray(q, dtype=np.float64), (values.shape[0],)))
    return _impl.step_up_counts(values, q, int(shift), int(m_total), bool(strict))


def gamma_hat_sorted(sorted_values, x):
    return _impl.gamma_hat_sorted(_rows(sorted_values), float(x))


def count_leq(values, thresholds):
    values = _rows(values)
    t = np.ascontiguousarray(np.broadcast_to(np.asarray(thresholds, dtype=np.float64), (values.shape[0],)))
    return _impl.count_leq(values, t)


def ks_uniform_sorted(sorted_values):
    return _impl.ks_uniform_sorted(_rows(sorted_values))
