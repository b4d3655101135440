"""Large-m limits of the BH and BHS procedures for a given alternative G.

With ``f(t) = (G(t) - t) / t`` and ``c = (1 - q) / (q (1 - gamma))``:

* ``psi(model, q, x) = sup_{q x <= t <= q} f(t)`` (nonincreasing in x);
* the limiting rejection fraction ``rho(q, gamma)`` lies between the two
  generalized inverses of ``psi`` at level ``c`` and equals
  ``sup{t : f(t) > c} / q`` when they coincide;
* ``kappa(x) = min_{0 <= t <= x} (1 - G(t)) / (1 - t)`` bounds the bias of
  the null-fraction estimator and drives the BHS bounds.

Closed forms are used for the Degenerate, Power and TruncatedPower
families; everything else goes through grid search plus bisection or
golden-section refinement. ``rho_numeric`` always takes the generic path
so it can be checked against the closed forms.
"""
from __future__ import annotations

import csv
import math
from functools import lru_cache
from collections import namedtuple
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .distributions import (
    AlternativeModel,
    Degenerate,
    MixtureSpec,
    Power,
    Tabulated,
    TruncatedPower,
    mixture_density,
)
from .errors import ConfigurationError, UnsupportedOperation

GRID_POINTS = 4096
# relative slack when deciding whether psi sits exactly at a level
LEVEL_RTOL = 1e-12
UNIQUE_TOL = 1e-9


# --- scalar numerics -----------------------------------------------------


def bisect_boundary(pred, lo: float, hi: float):
    """Shrink ``[lo, hi]`` with ``pred(lo)`` true and ``pred(hi)`` false to adjacent floats."""
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return lo, hi
        if pred(mid):
            lo = mid
        else:
            hi = mid


def golden_max(f, a: float, b: float, iters: int = 200):
    """Golden-section search for a maximum of a unimodal ``f`` on ``[a, b]``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if b - a <= 1e-15 * max(1.0, abs(a)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return max(fc, fd)


def _search_grid(model: AlternativeModel, a: float, b: float, n: int = GRID_POINTS):
    """Geometric + uniform grid on ``[a, b]`` (a > 0) including the model's jump points."""
    pts = [np.linspace(a, b, n), np.geomspace(a, b, n)]
    bp = np.asarray(model.breakpoints(), dtype=float)
    pts.append(bp[(bp > a) & (bp < b)])
    return np.unique(np.concatenate(pts))


def _excess(model: AlternativeModel, t):
    t = np.asarray(t, dtype=float)
    return (np.asarray(model.cdf(t)) - t) / t


# --- psi and its inverses ------------------------------------------------


def psi(model: AlternativeModel, q: float, x: float) -> float:
    """``sup_{q x <= t <= q} (G(t) - t) / t``; may be ``inf`` at ``x = 0``."""
    if not (0.0 < q <= 1.0):
        raise ConfigurationError(f"q must lie in (0, 1], got {q}")
    if not (0.0 <= x <= 1.0):
        raise ConfigurationError(f"x must lie in [0, 1], got {x}")
    a = q * x
    if isinstance(model, Degenerate):
        x0 = model.x0
        if x0 > q:
            return -1.0
        if x0 >= a:
            return math.inf if x0 == 0.0 else 1.0 / x0 - 1.0
        return 1.0 / a - 1.0
    if isinstance(model, Power):
        return math.inf if a == 0.0 else a ** (model.alpha - 1.0) - 1.0
    if isinstance(model, TruncatedPower):
        x0, alpha = model.x0, model.alpha
        if a >= x0:
            return 1.0 / a - 1.0
        best = math.inf if a == 0.0 else a ** (alpha - 1.0) - 1.0
        if q >= x0:
            best = max(best, 1.0 / x0 - 1.0)
        return best
    return psi_numeric(model, q, x)


@lru_cache(maxsize=512)
def _psi_table(model: AlternativeModel, q: float):
    """Fixed search grid on ``(0, q]`` with excess values and suffix argmax indices."""
    grid = _search_grid(model, q * 1e-12, q)
    vals = _excess(model, grid)
    rev = vals[::-1]
    at_max = rev == np.maximum.accumulate(rev)
    last = np.maximum.accumulate(np.where(at_max, np.arange(rev.size), 0))
    suffix_argmax = (rev.size - 1 - last)[::-1]
    return grid, vals, suffix_argmax


@lru_cache(maxsize=4096)
def _refined_max(model: AlternativeModel, lo: float, hi: float) -> float:
    return golden_max(lambda t: float(_excess(model, t)), lo, hi)


def psi_numeric(model: AlternativeModel, q: float, x: float) -> float:
    """Generic sup: exact candidates for tabulated CDFs, grid + golden section otherwise."""
    a = q * x
    if a == 0.0:
        slope = model.slope_at_zero
        if math.isinf(slope):
            return math.inf
        a = min(q, 1e-12)
    if isinstance(model, Tabulated):
        # f is monotone on each linear piece
        bp = model.breakpoints()
        cand = np.concatenate([[a, q], bp[(bp > a) & (bp < q)]])
        return float(np.max(_excess(model, cand)))
    best = float(_excess(model, a))
    if a >= q:
        return best
    grid, vals, suffix_argmax = _psi_table(model, q)
    i = int(np.searchsorted(grid, a, side="left"))
    if i == grid.size:
        return best
    # the grid maximum over [a, q] and its neighbours bracket the sup
    j = int(suffix_argmax[i])
    if j == i and best >= vals[j]:
        # falling from a onward at grid resolution: the sup sits at a
        return best
    best = max(best, float(vals[j]))
    lo = float(grid[j - 1]) if j > i else a
    hi = float(grid[min(j + 1, grid.size - 1)])
    if hi > lo:
        best = max(best, _refined_max(model, lo, hi))
    return best


def psi_star(model: AlternativeModel, q: float, y: float):
    """Generalized inverses of ``psi`` at level ``1/y``.

    Returns ``(lower, upper)`` with ``lower = min{x : psi(x) <= 1/y}`` and
    ``upper = inf{x : psi(x) < 1/y}``, found by bisection on the
    nonincreasing ``psi``. They differ when ``psi`` is flat at ``1/y``.
    """
    if y <= 0:
        raise ConfigurationError(f"y must be positive, got {y}")
    level = 1.0 / y
    tol = LEVEL_RTOL * max(1.0, abs(level))

    def inverse(pred):
        if pred(0.0):
            return 0.0
        if not pred(1.0):
            return 1.0
        _, hi = bisect_boundary(lambda x: not pred(x), 0.0, 1.0)
        return hi

    lower = inverse(lambda x: psi(model, q, x) <= level + tol)
    upper = inverse(lambda x: psi(model, q, x) < level - tol)
    return lower, upper


# --- rho -----------------------------------------------------------------


def _excess_level(q, gamma):
    return (1.0 - q) / (q * (1.0 - gamma))


def borderline_x0(q: float, gamma: float) -> float:
    """Atom location at which the degenerate case sits on the knife edge."""
    return q * (1.0 - gamma) / (1.0 - q * gamma)


def is_borderline(model: AlternativeModel, q: float, gamma: float) -> bool:
    if isinstance(model, (Degenerate, TruncatedPower)):
        return abs(model.x0 - borderline_x0(q, gamma)) <= 1e-12
    return False


def rho_closed_form(model: AlternativeModel, q: float, gamma: float) -> Optional[float]:
    """``sup{t : (G(t) - t)/t > c} / q`` for families with explicit answers, else None.

    Returns None on the degenerate knife edge, where the limit is not unique.
    """
    if gamma >= 1.0:
        return 0.0
    if is_borderline(model, q, gamma):
        return None
    edge = borderline_x0(q, gamma)  # = 1 / (1 + c)
    if isinstance(model, Degenerate):
        return edge / q if model.x0 < edge else 0.0
    if isinstance(model, Power):
        return edge ** (1.0 / (1.0 - model.alpha)) / q
    if isinstance(model, TruncatedPower):
        if model.x0 < edge:
            return edge / q
        return min(edge ** (1.0 / (1.0 - model.alpha)), model.x0) / q
    return None


def rho_numeric(model: AlternativeModel, q: float, gamma: float) -> float:
    """``sup{t in (0, 1] : (G(t) - t)/t > c} / q`` by grid scan and bisection.

    The sup of an empty set is taken as 0.
    """
    if gamma >= 1.0:
        return 0.0
    c = _excess_level(q, gamma)
    grid = _search_grid(model, 1e-300, 1.0)
    above = _excess(model, grid) > c
    if not above.any():
        return 0.0
    i = int(np.flatnonzero(above)[-1])
    if i == grid.size - 1:
        return 1.0 / q
    lo, hi = bisect_boundary(lambda t: float(_excess(model, t)) > c, grid[i], grid[i + 1])
    return hi / q


ConcaveRoot = namedtuple("ConcaveRoot", "rho t_star applicable note")


def rho_concave(model: AlternativeModel, q: float, gamma: float) -> ConcaveRoot:
    """``t*/q`` where ``t*`` is the positive root of ``G(t) = beta t``, for concave G.

    ``beta = (1 - q gamma) / (q (1 - gamma))``. Not applicable (rho = 0) when
    ``G'(0+) <= beta``.
    """
    if not model.concave:
        raise UnsupportedOperation(f"{model.family} is not declared concave")
    beta = (1.0 - q * gamma) / (q * (1.0 - gamma))
    if model.slope_at_zero <= beta:
        return ConcaveRoot(0.0, 0.0, False, "G'(0+) <= beta")

    def h(t):
        return float(model.cdf(t)) - beta * t

    if h(1.0) >= 0.0:
        return ConcaveRoot(1.0 / q, 1.0, True, "root at the endpoint t = 1")
    lo = 0.5
    while h(lo) <= 0.0:
        lo *= 0.5
        if lo == 0.0:
            return ConcaveRoot(0.0, 0.0, False, "no positive root found")
    _, hi = bisect_boundary(lambda t: h(t) > 0.0, lo, 1.0)
    return ConcaveRoot(hi / q, hi, True, "")


def rho_power_mixture(p: float, alpha: float, beta_exp: float, q: float, gamma: float) -> float:
    """Solve ``p t^(alpha-1) + (1-p) t^(beta-1) - 1 = c`` for ``t = q rho``; returns rho."""
    if not (0.0 < p <= 1.0 and 0.0 < alpha < 1.0 and beta_exp > 1.0):
        raise ConfigurationError("need 0 < p <= 1, 0 < alpha < 1 < beta")
    if not (0.0 < q < 1.0 and 0.0 <= gamma < 1.0):
        raise ConfigurationError("need 0 < q < 1 and 0 <= gamma < 1")
    c = _excess_level(q, gamma)

    def lhs(t):
        return p * t ** (alpha - 1.0) + (1.0 - p) * t ** (beta_exp - 1.0) - 1.0

    lo = 0.5
    while lhs(lo) <= c:
        lo *= 0.5
    _, hi = bisect_boundary(lambda t: lhs(t) > c, lo, 1.0)
    return hi / q


def borderline_limits(q: float, gamma: float):
    """``(R/m, Pi_2, 1 - Pi_3)`` limits on the degenerate knife edge."""
    r_over_m = (1.0 - gamma) / (2.0 * (1.0 - q * gamma))
    pi3_complement = gamma * (2.0 - q - q * gamma) / (1.0 + gamma - 2.0 * q * gamma)
    return r_over_m, 0.5, pi3_complement


@dataclass
class AsymptoticSummary:
    model: str
    q: float
    gamma: float
    rho: Optional[float]
    rho_lower: float
    rho_upper: float
    unique: bool
    fdr_limit: Optional[float] = None
    s_over_m_limit: Optional[float] = None
    pi2_limit: Optional[float] = None
    pi3_complement_limit: Optional[float] = None
    borderline: bool = False
    borderline_limits: Optional[dict] = None
    no_alternatives: bool = False
    notes: list = field(default_factory=list)

    def as_dict(self):
        return asdict(self)


def rho(model: AlternativeModel, q: float, gamma: float) -> AsymptoticSummary:
    """Limiting rejection fraction and the proportions it implies."""
    if not (0.0 < q <= 1.0):
        raise ConfigurationError(f"q must lie in (0, 1], got {q}")
    if not (0.0 <= gamma <= 1.0):
        raise ConfigurationError(f"gamma must lie in [0, 1], got {gamma}")
    spec = model.to_spec()
    if gamma == 1.0:
        return AsymptoticSummary(
            spec, q, gamma, 0.0, 0.0, 0.0, True,
            no_alternatives=True, notes=["no alternatives: rho = 0, FDR limit undetermined"],
        )
    if q == 1.0:
        lower = upper = 1.0
    else:
        lower, upper = psi_star(model, q, q * (1.0 - gamma) / (1.0 - q))
    unique = (upper - lower) <= UNIQUE_TOL
    out = AsymptoticSummary(spec, q, gamma, None, lower, upper, unique)
    if is_borderline(model, q, gamma) and isinstance(model, Degenerate):
        out.unique = False
        out.borderline = True
        # exact bracket: the atom sits on the critical line
        out.rho_lower, out.rho_upper = 0.0, model.x0 / q
        r_m, pi2, pi3c = borderline_limits(q, gamma)
        out.borderline_limits = {"r_over_m": r_m, "pi2": pi2, "pi3_complement": pi3c}
        out.notes.append("borderline atom: R/m is only bracketed by [rho_lower, rho_upper]")
        return out
    if not unique:
        out.notes.append("psi is flat at the critical level; rho not determined")
        return out
    value = rho_closed_form(model, q, gamma)
    if value is None:
        value = rho_numeric(model, q, gamma)
    out.rho = value
    if value > 0.0:
        out.fdr_limit = q * gamma
        out.s_over_m_limit = value * q * gamma
        out.pi2_limit = value * (1.0 - q * gamma) / (1.0 - gamma)
        if value < 1.0:
            out.pi3_complement_limit = gamma * (1.0 - q * value) / (1.0 - value)
    else:
        out.notes.append("rho = 0: FDR limit undetermined")
    return out


def average_power_limit(model: AlternativeModel, q: float, gamma: float) -> float:
    """``rho(q, gamma) (1 - q gamma) / (1 - gamma)``, 0 when rho is 0 or undetermined."""
    s = rho(model, q, gamma)
    if not s.rho:
        return 0.0
    return s.rho * (1.0 - q * gamma) / (1.0 - gamma)


# --- kappa and the BHS bounds --------------------------------------------


def kappa(model: AlternativeModel, x: float) -> float:
    """``min_{0 <= t <= x} (1 - G(t)) / (1 - t)``."""
    if not (0.0 < x < 1.0):
        raise ConfigurationError(f"x must lie in (0, 1), got {x}")
    if isinstance(model, Degenerate):
        return 0.0 if x >= model.x0 else 1.0
    if isinstance(model, TruncatedPower):
        if x >= model.x0:
            return 0.0
        return (1.0 - x**model.alpha) / (1.0 - x)
    if model.nonincreasing_density:
        # ratio decreases in t
        return float((1.0 - model.cdf(x)) / (1.0 - x))
    return kappa_numeric(model, x)


def _tail_ratio(model, t):
    t = np.asarray(t, dtype=float)
    return (1.0 - np.asarray(model.cdf(t))) / (1.0 - t)


def kappa_numeric(model: AlternativeModel, x: float) -> float:
    """Generic kappa: exact candidates for tabulated CDFs, grid + golden section otherwise."""
    bp = np.asarray(model.breakpoints(), dtype=float)
    cand = np.concatenate([[0.0, x], bp[(bp > 0.0) & (bp <= x)]])
    best = float(np.min(_tail_ratio(model, cand)))
    if isinstance(model, Tabulated):
        return min(best, 1.0)
    grid = np.unique(np.concatenate([np.linspace(0.0, x, GRID_POINTS), cand]))
    vals = _tail_ratio(model, grid)
    i = int(np.argmin(vals))
    best = min(best, float(vals[i]))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    if hi > lo:
        best = min(best, -golden_max(lambda t: -float(_tail_ratio(model, t)), lo, hi))
    return min(best, 1.0)


@dataclass
class BhsBounds:
    kappa_x: float
    q_limit: float
    fdr_lo: float
    fdr_hi: float
    power_lo: Optional[float]
    power_hi: Optional[float]
    applicable: bool = True
    diagnostic: str = ""

    def as_dict(self):
        return asdict(self)


def bhs_q_limit(model: AlternativeModel, gamma: float, delta: float, x: float) -> float:
    return delta / (gamma + (1.0 - gamma) * kappa(model, x))


def bhs_bounds(model: AlternativeModel, gamma: float, delta: float, x: float) -> BhsBounds:
    """Large-m FDR and average-power brackets for BH run at ``delta / gamma_hat(x)``."""
    if not (0.0 < gamma < 1.0):
        raise ConfigurationError(f"gamma must lie in (0, 1), got {gamma}")
    if not (0.0 < delta < 1.0):
        raise ConfigurationError(f"delta must lie in (0, 1), got {delta}")
    k = kappa(model, x)
    denom = gamma + (1.0 - gamma) * k
    q_lim = delta / denom
    q_top = delta / gamma
    fdr_lo = delta * gamma / denom
    problems = []
    power_lo = power_hi = None
    if q_top > 1.0:
        problems.append(f"delta/gamma = {q_top:.6g} exceeds 1")
    else:
        lo_s = rho(model, q_lim, gamma)
        hi_s = rho(model, q_top, gamma)
        for name, s in (("q(x,delta)", lo_s), ("delta/gamma", hi_s)):
            if not s.unique:
                problems.append(f"rho not unique at {name} = {s.q:.6g}")
            elif not s.rho:
                problems.append(f"rho = 0 at {name} = {s.q:.6g}")
        if lo_s.rho is not None:
            power_lo = lo_s.rho * (1.0 - delta * gamma / denom) / (1.0 - gamma)
        if hi_s.rho is not None:
            power_hi = hi_s.rho * (1.0 - delta) / (1.0 - gamma)
    return BhsBounds(
        kappa_x=k,
        q_limit=q_lim,
        fdr_lo=fdr_lo,
        fdr_hi=delta,
        power_lo=power_lo,
        power_hi=power_hi,
        applicable=not problems,
        diagnostic="; ".join(problems),
    )


# --- figure tables -------------------------------------------------------

FIGURE_HEADERS = {
    "fig1": ("t", "uniform", "h"),
    "fig2": ("q", "power", "fdr"),
    "fig3": ("x", "power_lo", "power_hi"),
}

DEFAULT_GRIDS = {
    "fig1": (0.005, 1.0, 200),
    "fig2": (0.005, 0.995, 199),
    "fig3": (0.005, 0.995, 199),
}


def figure_data(kind: str, model: AlternativeModel, gamma: float, delta: float = 0.1, grid=None):
    """Rows behind the density, BH power/FDR and BHS power-bound plots.

    ``grid`` is ``(start, stop, num)`` or an explicit sequence. Returns
    ``(header, rows)``.
    """
    if kind not in FIGURE_HEADERS:
        raise ConfigurationError(f"unknown figure {kind!r}")
    if grid is None:
        grid = DEFAULT_GRIDS[kind]
    if isinstance(grid, tuple) and len(grid) == 3 and isinstance(grid[2], int):
        # round so grid points print as the decimals they stand for
        pts = np.round(np.linspace(*grid), 12)
    else:
        pts = np.asarray(grid, dtype=float)
    rows = []
    if kind == "fig1":
        spec = MixtureSpec(gamma, model, 1)
        h = mixture_density(spec, pts)
        rows = [(float(t), 1.0, float(v)) for t, v in zip(pts, h)]
    elif kind == "fig2":
        for q in pts:
            s = rho(model, float(q), gamma)
            r = s.rho or 0.0
            power = r * (1.0 - q * gamma) / (1.0 - gamma)
            rows.append((float(q), float(power), float(q * gamma) if r > 0 else 0.0))
    else:
        for x in pts:
            b = bhs_bounds(model, gamma, delta, float(x))
            rows.append((float(x), b.power_lo, b.power_hi))
    return FIGURE_HEADERS[kind], rows


def format_number(v) -> str:
    """Shortest round-trip decimal; empty for None."""
    if v is None:
        return ""
    return repr(float(v))


def write_figure_csv(stream, header, rows):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v) for v in row])
