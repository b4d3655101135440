"""Step-up rejection rules and the proportions used to score them.

``bh_count`` is the Benjamini-Hochberg rule: reject the ``r`` smallest
values where ``r = max{i : X_(i) <= q i / m}``. ``bhs`` runs it at the
data-driven level ``delta / gamma_hat(x)``.

Thresholds are always computed as ``q * i / m`` in double precision, in
that order, by every code path (see :mod:`fdrlab.kernels`).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import ConfigurationError, PreconditionError


@dataclass
class PValueBatch:
    """p-values in original order, with optional truth labels (True = null)."""

    values: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if np.isnan(self.values).any() or ((self.values < 0) | (self.values > 1)).any():
            raise ConfigurationError("p-values must lie in [0, 1]")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=bool).reshape(-1)
            if self.labels.size != self.values.size:
                raise ConfigurationError(
                    f"{self.labels.size} labels for {self.values.size} values"
                )

    @property
    def m(self) -> int:
        return int(self.values.size)

    @property
    def m0(self) -> Optional[int]:
        return None if self.labels is None else int(self.labels.sum())

    def order(self) -> np.ndarray:
        """Indices sorting by (value, original index)."""
        return np.argsort(self.values, kind="stable")

    def sorted_values(self) -> np.ndarray:
        return np.sort(self.values)

    @classmethod
    def from_csv(cls, source) -> "PValueBatch":
        """Read a CSV with header, column ``p`` and optional ``is_null`` (0/1).

        ``source`` is a path or an open text stream.
        """
        if hasattr(source, "read"):
            text = source.read()
        else:
            with open(source, newline="", encoding="utf-8") as fh:
                text = fh.read()
        if not text.strip():
            return cls(np.empty(0))
        reader = csv.DictReader(io.StringIO(text))
        fields = [f.strip() for f in (reader.fieldnames or [])]
        if "p" not in fields:
            raise ConfigurationError("input CSV needs a 'p' column")
        has_labels = "is_null" in fields
        values, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            row = {k.strip(): (v or "").strip() for k, v in row.items() if k is not None}
            try:
                values.append(float(row["p"]))
            except ValueError:
                raise ConfigurationError(f"line {lineno}: bad p-value {row['p']!r}") from None
            if has_labels:
                if row["is_null"] not in ("0", "1"):
                    raise ConfigurationError(f"line {lineno}: is_null must be 0 or 1")
                labels.append(row["is_null"] == "1")
        return cls(np.array(values, dtype=np.float64), np.array(labels, dtype=bool) if has_labels else None)


@dataclass
class RejectionOutcome:
    r: int
    threshold: float
    rejected: np.ndarray
    q_used: float
    q_applied: float
    m: int
    s: Optional[int] = None
    pi1: Optional[float] = None
    pi2: Optional[float] = None
    pi3: Optional[float] = None
    gamma_hat: Optional[float] = None

    def as_dict(self) -> dict:
        out = {"R": self.r, "threshold": self.threshold, "q_used": self.q_used}
        if self.gamma_hat is not None:
            out["gamma_hat"] = self.gamma_hat
            out["q_applied"] = self.q_applied
        if self.s is not None:
            out.update(S=self.s, pi1=self.pi1, pi2=self.pi2, pi3=self.pi3)
        return out


def _check_level(q, name="q"):
    if not (0.0 <= q <= 1.0):
        raise ConfigurationError(f"{name} must lie in [0, 1], got {q}")


def _outcome(batch: PValueBatch, r: int, q_applied: float, q_used: float, gamma_hat=None) -> RejectionOutcome:
    m = batch.m
    rejected = np.sort(batch.order()[:r])
    threshold = q_applied * r / m if r > 0 else 0.0
    out = RejectionOutcome(
        r=int(r),
        threshold=float(threshold),
        rejected=rejected,
        q_used=float(q_used),
        q_applied=float(q_applied),
        m=m,
        gamma_hat=gamma_hat,
    )
    if batch.labels is not None:
        out.s, out.pi1, out.pi2, out.pi3 = _proportions(out, batch)
    return out


def _step_up(batch: PValueBatch, q: float, strict: bool) -> int:
    if batch.m == 0:
        return 0
    return int(kernels.step_up_counts(batch.values, q, 0, batch.m, strict)[0])


def bh_count(batch: PValueBatch, q: float) -> RejectionOutcome:
    """Benjamini-Hochberg step-up rule at level ``q``."""
    _check_level(q)
    return _outcome(batch, _step_up(batch, q, strict=False), q, q)


def bh_count_strict(batch: PValueBatch, q: float) -> RejectionOutcome:
    """Step-up rule with ``X_(i) < q i / m`` in place of ``<=``."""
    _check_level(q)
    return _outcome(batch, _step_up(batch, q, strict=True), q, q)


def shifted_count(values, q: float, j: int, m: int) -> int:
    """``max{i : X_(i) <= q (i + j) / m}`` over the ``m - j`` given values, 0 if none.

    This is the step-up rule applied after ``j`` values were set aside, with
    the thresholds still indexed against the original size ``m``.
    """
    _check_level(q)
    values = values.values if isinstance(values, PValueBatch) else np.asarray(values, dtype=np.float64)
    if not (0 <= j <= m):
        raise ConfigurationError(f"shift j={j} must lie in [0, m={m}]")
    if values.size != m - j:
        raise ConfigurationError(f"expected {m - j} values for m={m}, j={j}; got {values.size}")
    if values.size == 0:
        return 0
    return int(kernels.step_up_counts(values, q, j, m, False)[0])


def gamma_hat(batch: PValueBatch, x: float) -> float:
    """Null-fraction estimate ``min_{0<=t<=x} (1 - H_m(t)) / (1 - t)``.

    On each flat stretch of the empirical CDF the ratio increases in t, so
    only t = 0 and the sample points up to ``x`` need checking.
    """
    if not (0.0 < x < 1.0):
        raise ConfigurationError(f"cutoff x must lie in (0, 1), got {x}")
    if batch.m == 0:
        return 1.0
    return float(kernels.gamma_hat_sorted(batch.sorted_values(), x)[0])


def bhs(batch: PValueBatch, delta: float, x: float) -> RejectionOutcome:
    """BH run at ``q = delta / gamma_hat(batch, x)``.

    ``q_used`` keeps the uncapped level (``inf`` when the estimate is 0,
    in which case everything is rejected); ``q_applied`` is capped at 1.
    """
    if not (0.0 < delta < 1.0):
        raise ConfigurationError(f"delta must lie in (0, 1), got {delta}")
    g = gamma_hat(batch, x)
    if g == 0.0:
        return _outcome(batch, batch.m, 1.0, math.inf, gamma_hat=g)
    q_m = delta / g
    q_applied = min(q_m, 1.0)
    return _outcome(batch, _step_up(batch, q_applied, strict=False), q_applied, q_m, gamma_hat=g)


def _proportions(outcome: RejectionOutcome, batch: PValueBatch):
    labels = batch.labels
    m = batch.m
    m0 = int(labels.sum())
    m1 = m - m0
    r = outcome.r
    s = int(labels[outcome.rejected].sum()) if r else 0
    pi1 = s / max(r, 1)
    pi2 = (r - s) / m1 if m1 > 0 else None
    # false nulls left among the nonrejections; 0 when everything is rejected
    pi3 = (m1 - (r - s)) / max(m - r, 1)
    return s, pi1, pi2, pi3


def proportions(outcome: RejectionOutcome, batch: PValueBatch):
    """Return ``(pi1, pi2, pi3)``; ``pi2`` is None when there are no alternatives."""
    if batch.labels is None:
        raise PreconditionError("proportions need null/alternative labels")
    _, pi1, pi2, pi3 = _proportions(outcome, batch)
    return pi1, pi2, pi3
