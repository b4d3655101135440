"""Alternative p-value distributions, the null/alternative mixture, and samplers.

Alternatives are described by small frozen dataclasses (``Power``,
``Degenerate``, ...) that know their CDF, generalized inverse and, where
one exists, their density. Nulls are uniform on [0, 1], either
independent or tied together through a Gaussian copula.

Text forms such as ``power:alpha=0.1`` or ``ar1:phi=0.5`` are handled by
:func:`parse_model` and :func:`parse_dependence`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr

from .errors import ConfigurationError, UnsupportedOperation

__all__ = [
    "AlternativeModel",
    "Degenerate",
    "Power",
    "PowerMixture",
    "TruncatedPower",
    "Tabulated",
    "Independent",
    "Equicorrelated",
    "Ar1Copula",
    "DependenceModel",
    "MixtureSpec",
    "cdf",
    "quantile",
    "density",
    "mixture_cdf",
    "mixture_density",
    "sample_nulls",
    "sample_mixture",
    "null_block",
    "alternative_block",
    "mixture_block",
    "rng_for",
    "parse_model",
    "parse_dependence",
]


def _scalar_or_array(t, out):
    if np.ndim(t) == 0:
        return float(out)
    return out


def _check(cond, msg):
    if not cond:
        raise ConfigurationError(msg)


class AlternativeModel:
    """Base class for distribution functions concentrated on [0, 1]."""

    family = "abstract"
    # density exists and is nonincreasing on (0, 1)
    nonincreasing_density = False
    concave = False

    def cdf(self, t):
        raise NotImplementedError

    def quantile(self, u):
        return _bisect_inverse(self.cdf, u)

    def density(self, t):
        raise UnsupportedOperation(f"{self.family} has no density")

    def breakpoints(self):
        """Points where the CDF jumps or changes formula."""
        return np.empty(0)

    @property
    def slope_at_zero(self) -> float:
        """``lim_{t->0+} G(t)/t`` (``inf`` for an atom at 0 or an infinite density)."""
        return math.inf

    def to_spec(self) -> str:
        raise NotImplementedError

    def __str__(self):
        return self.to_spec()


@dataclass(frozen=True)
class Degenerate(AlternativeModel):
    """Unit mass at ``x0``."""

    x0: float
    family = "degenerate"

    def __post_init__(self):
        _check(0.0 <= self.x0 <= 1.0, f"degenerate x0 must lie in [0,1], got {self.x0}")

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar_or_array(t, np.where(t >= self.x0, 1.0, 0.0))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return _scalar_or_array(u, np.where(u > 0.0, self.x0, 0.0))

    def breakpoints(self):
        return np.array([self.x0])

    @property
    def slope_at_zero(self):
        return math.inf if self.x0 == 0.0 else 0.0

    def to_spec(self):
        return f"degenerate:x0={self.x0!r}"


@dataclass(frozen=True)
class Power(AlternativeModel):
    """G(t) = t**alpha with 0 < alpha < 1."""

    alpha: float
    family = "power"
    nonincreasing_density = True
    concave = True

    def __post_init__(self):
        _check(0.0 < self.alpha < 1.0, f"power alpha must lie in (0,1), got {self.alpha}")

    def cdf(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        return _scalar_or_array(t, t**self.alpha)

    def quantile(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return _scalar_or_array(u, u ** (1.0 / self.alpha))

    def density(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return _scalar_or_array(t, self.alpha * t ** (self.alpha - 1.0))

    def to_spec(self):
        return f"power:alpha={self.alpha!r}"


@dataclass(frozen=True)
class PowerMixture(AlternativeModel):
    """G(t) = p t**alpha + (1 - p) t**beta, 0 < alpha < 1 < beta."""

    p: float
    alpha: float
    beta: float
    family = "powermix"

    def __post_init__(self):
        _check(0.0 < self.p < 1.0, f"powermix p must lie in (0,1), got {self.p}")
        _check(0.0 < self.alpha < 1.0, f"powermix alpha must lie in (0,1), got {self.alpha}")
        _check(self.beta > 1.0, f"powermix beta must exceed 1, got {self.beta}")

    def cdf(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        return _scalar_or_array(t, self.p * t**self.alpha + (1.0 - self.p) * t**self.beta)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            g = self.p * self.alpha * t ** (self.alpha - 1.0) + (1.0 - self.p) * self.beta * t ** (self.beta - 1.0)
        return _scalar_or_array(t, g)

    def to_spec(self):
        return f"powermix:p={self.p!r},alpha={self.alpha!r},beta={self.beta!r}"


@dataclass(frozen=True)
class TruncatedPower(AlternativeModel):
    """G(t) = t**alpha below ``x0`` and 1 from ``x0`` on (an atom at x0)."""

    alpha: float
    x0: float
    family = "truncpower"

    def __post_init__(self):
        _check(0.0 < self.alpha < 1.0, f"truncpower alpha must lie in (0,1), got {self.alpha}")
        _check(0.0 < self.x0 < 1.0, f"truncpower x0 must lie in (0,1), got {self.x0}")

    def cdf(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        return _scalar_or_array(t, np.where(t >= self.x0, 1.0, t**self.alpha))

    def quantile(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return _scalar_or_array(u, np.where(u < self.x0**self.alpha, u ** (1.0 / self.alpha), self.x0))

    def density(self, t):
        # absolutely continuous part only; the atom at x0 has no density
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            g = np.where(t < self.x0, self.alpha * t ** (self.alpha - 1.0), 0.0)
        return _scalar_or_array(t, g)

    def breakpoints(self):
        return np.array([self.x0])

    def to_spec(self):
        return f"truncpower:alpha={self.alpha!r},x0={self.x0!r}"


@dataclass(frozen=True)
class Tabulated(AlternativeModel):
    """CDF tabulated on the equispaced grid ``linspace(0, 1, len(grid))``.

    Linear interpolation between nodes. ``grid[0] > 0`` puts an atom at 0.
    """

    grid: tuple = field()
    family = "tabulated"

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        _check(g.ndim == 1 and g.size >= 2, "tabulated grid needs at least two nodes")
        _check(bool(np.all((g >= 0.0) & (g <= 1.0))), "tabulated grid values must lie in [0,1]")
        _check(bool(np.all(np.diff(g) >= 0.0)), "tabulated grid must be nondecreasing")
        _check(g[-1] == 1.0, "tabulated grid must end at 1")
        object.__setattr__(self, "grid", tuple(float(v) for v in g))

    @property
    def nodes(self):
        return np.linspace(0.0, 1.0, len(self.grid))

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t < 0.0, 0.0, np.interp(t, self.nodes, self.grid))
        return _scalar_or_array(t, out)

    def quantile(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        g = np.asarray(self.grid)
        x = self.nodes
        j = np.searchsorted(g, u, side="left")
        j = np.clip(j, 0, g.size - 1)
        lo = np.maximum(j - 1, 0)
        span = g[j] - g[lo]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(span > 0, (u - g[lo]) / span, 1.0)
        out = np.where(j == 0, 0.0, x[lo] + frac * (x[j] - x[lo]))
        return _scalar_or_array(u, out)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        n = len(self.grid) - 1
        slopes = np.diff(np.asarray(self.grid)) * n
        k = np.clip(np.floor(t * n).astype(int), 0, n - 1)
        return _scalar_or_array(t, slopes[k])

    def breakpoints(self):
        return self.nodes

    @property
    def slope_at_zero(self):
        if self.grid[0] > 0.0:
            return math.inf
        return (self.grid[1] - self.grid[0]) * (len(self.grid) - 1)

    def to_spec(self):
        return "tabulated:grid=" + "/".join(repr(v) for v in self.grid)


def _bisect_inverse(cdf_fn, u):
    """Generalized inverse min{t : G(t) >= u} by vectorized bisection to full precision."""
    u = np.asarray(u, dtype=float)
    flat = np.clip(np.atleast_1d(u).astype(float), 0.0, 1.0)
    lo = np.zeros_like(flat)
    hi = np.ones_like(flat)
    active = flat > 0.0
    hi[~active] = 0.0
    for _ in range(1100):
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        done = (mid <= lo) | (mid >= hi)
        active &= ~done
        go = np.asarray(cdf_fn(mid)) >= flat
        hi = np.where(active & go, mid, hi)
        lo = np.where(active & ~go, mid, lo)
    return _scalar_or_array(u, hi.reshape(u.shape))


def cdf(model: AlternativeModel, t):
    return model.cdf(t)


def quantile(model: AlternativeModel, u):
    return model.quantile(u)


def density(model: AlternativeModel, t):
    return model.density(t)


# --- null dependence -----------------------------------------------------


@dataclass(frozen=True)
class Independent:
    kind = "independent"

    def to_spec(self):
        return "independent"


@dataclass(frozen=True)
class Equicorrelated:
    """Gaussian copula with one shared latent factor; conditionally i.i.d."""

    rho_c: float
    kind = "equicorrelated"

    def __post_init__(self):
        _check(0.0 <= self.rho_c < 1.0, f"equicorrelated rho must lie in [0,1), got {self.rho_c}")

    def to_spec(self):
        return f"equicorrelated:rho={self.rho_c!r}"


@dataclass(frozen=True)
class Ar1Copula:
    """Stationary Gaussian AR(1) pushed through the normal CDF."""

    phi: float
    kind = "ar1"

    def __post_init__(self):
        _check(-1.0 < self.phi < 1.0, f"ar1 phi must lie in (-1,1), got {self.phi}")

    def to_spec(self):
        return f"ar1:phi={self.phi!r}"


DependenceModel = Union[Independent, Equicorrelated, Ar1Copula]


@dataclass(frozen=True)
class MixtureSpec:
    """``m`` values of which ``round(gamma * m)`` are uniform nulls."""

    gamma: float
    alt: AlternativeModel
    m: int
    null_dependence: DependenceModel = Independent()

    def __post_init__(self):
        _check(0.0 <= self.gamma <= 1.0, f"gamma must lie in [0,1], got {self.gamma}")
        _check(int(self.m) == self.m and self.m >= 1, f"m must be a positive integer, got {self.m}")

    @property
    def m0(self) -> int:
        # round half up; Python's round() is banker's rounding
        return int(math.floor(self.gamma * self.m + 0.5))

    @property
    def m1(self) -> int:
        return self.m - self.m0

    @property
    def gamma_effective(self) -> float:
        return self.m0 / self.m


def mixture_cdf(spec: MixtureSpec, t):
    t = np.asarray(t, dtype=float)
    out = spec.gamma * np.clip(t, 0.0, 1.0) + (1.0 - spec.gamma) * np.asarray(spec.alt.cdf(t))
    return _scalar_or_array(t, out)


def mixture_density(spec: MixtureSpec, t):
    if isinstance(spec.alt, Degenerate):
        raise UnsupportedOperation("degenerate alternative has no density")
    t = np.asarray(t, dtype=float)
    out = spec.gamma + (1.0 - spec.gamma) * np.asarray(spec.alt.density(t))
    return _scalar_or_array(t, out)


# --- sampling ------------------------------------------------------------


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the stream identified by ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def null_block(rng: np.random.Generator, reps: int, n: int, dep: DependenceModel = Independent()):
    """``(reps, n)`` array of uniform-marginal nulls, one replicate per row."""
    if n == 0:
        return np.empty((reps, 0))
    if isinstance(dep, Independent):
        return rng.random((reps, n))
    if isinstance(dep, Equicorrelated):
        shared = rng.standard_normal((reps, 1))
        own = rng.standard_normal((reps, n))
        z = math.sqrt(dep.rho_c) * shared + math.sqrt(1.0 - dep.rho_c) * own
        return ndtr(z)
    if isinstance(dep, Ar1Copula):
        e = rng.standard_normal((reps, n))
        s = math.sqrt(1.0 - dep.phi**2)
        # z_0 = e_0 (stationary start), z_t = phi z_{t-1} + s e_t
        zi = ((1.0 - s) * e[:, 0])[:, None]
        z, _ = lfilter([s], [1.0, -dep.phi], e, axis=1, zi=zi)
        return ndtr(z)
    raise ConfigurationError(f"unknown dependence model {dep!r}")


def alternative_block(rng: np.random.Generator, reps: int, n: int, model: AlternativeModel):
    if n == 0:
        return np.empty((reps, 0))
    if isinstance(model, Degenerate):
        return np.full((reps, n), model.x0)
    return np.asarray(model.quantile(rng.random((reps, n))), dtype=float).reshape(reps, n)


def mixture_block(spec: MixtureSpec, rng: np.random.Generator, reps: int):
    """Return ``(nulls, alternatives)`` blocks of shapes ``(reps, m0)`` and ``(reps, m1)``."""
    nulls = null_block(rng, reps, spec.m0, spec.null_dependence)
    alts = alternative_block(rng, reps, spec.m1, spec.alt)
    return nulls, alts


def sample_nulls(n: int, dep: DependenceModel = Independent(), seed: int = 0) -> np.ndarray:
    _check(n >= 0, f"n must be nonnegative, got {n}")
    return null_block(rng_for(seed), 1, int(n), dep)[0]


def sample_mixture(spec: MixtureSpec, seed: int = 0):
    """One labelled batch: nulls first, then alternatives."""
    from .procedures import PValueBatch

    nulls, alts = mixture_block(spec, rng_for(seed), 1)
    values = np.concatenate([nulls[0], alts[0]])
    labels = np.concatenate([np.ones(spec.m0, dtype=bool), np.zeros(spec.m1, dtype=bool)])
    return PValueBatch(values, labels)


# --- text forms ----------------------------------------------------------


def _parse_params(text):
    family, _, rest = text.strip().lower().partition(":")
    params = {}
    if rest.strip():
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise ConfigurationError(f"malformed parameter {item!r} in {text!r}")
            params[key.strip()] = val.strip()
    return family.strip(), params


def _floats(params, names, text):
    missing = [n for n in names if n not in params]
    extra = [k for k in params if k not in names]
    if missing or extra:
        raise ConfigurationError(f"{text!r}: expected parameters {names}, got {sorted(params)}")
    try:
        return [float(params[n]) for n in names]
    except ValueError as exc:
        raise ConfigurationError(f"{text!r}: {exc}") from None


def parse_model(text: str) -> AlternativeModel:
    """Parse ``power:alpha=0.1``, ``degenerate:x0=0.3``, ``powermix:p=..,alpha=..,beta=..``,
    ``truncpower:alpha=..,x0=..`` or ``tabulated:grid=0/0.4/1`` (case-insensitive)."""
    family, params = _parse_params(text)
    if family == "power":
        return Power(*_floats(params, ["alpha"], text))
    if family == "degenerate":
        return Degenerate(*_floats(params, ["x0"], text))
    if family in ("powermix", "powermixture"):
        return PowerMixture(*_floats(params, ["p", "alpha", "beta"], text))
    if family in ("truncpower", "truncatedpower"):
        return TruncatedPower(*_floats(params, ["alpha", "x0"], text))
    if family == "tabulated":
        if set(params) != {"grid"}:
            raise ConfigurationError(f"{text!r}: tabulated needs exactly grid=...")
        try:
            grid = tuple(float(v) for v in params["grid"].split("/"))
        except ValueError as exc:
            raise ConfigurationError(f"{text!r}: {exc}") from None
        return Tabulated(grid)
    raise ConfigurationError(f"unknown alternative family {family!r}")


def parse_dependence(text: str) -> DependenceModel:
    family, params = _parse_params(text)
    if family in ("independent", "iid"):
        _floats(params, [], text)
        return Independent()
    if family in ("equicorrelated", "equi"):
        return Equicorrelated(*_floats(params, ["rho"], text))
    if family in ("ar1", "ar1copula"):
        return Ar1Copula(*_floats(params, ["phi"], text))
    raise ConfigurationError(f"unknown dependence model {family!r}")
