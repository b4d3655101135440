"""Seeded Monte Carlo experiments for the BH and BHS procedures.

Replicates are generated in fixed-size chunks; chunk ``c`` draws from
the stream ``(seed, c)``. Results therefore depend only on the seed,
never on how many worker threads processed the chunks.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import stirling2

from . import kernels
from .distributions import (
    AlternativeModel,
    DependenceModel,
    Independent,
    MixtureSpec,
    mixture_block,
    null_block,
    parse_dependence,
    parse_model,
    rng_for,
)
from .errors import ConfigurationError
from .theory import bhs_bounds, rho as rho_summary

CHUNK = 500
SE_BAND = 3.0


@dataclass(frozen=True)
class Procedure:
    """``bh`` / ``bh-strict`` at level ``q``, or ``bhs`` with ``delta`` and cutoff ``x``."""

    name: str
    q: Optional[float] = None
    delta: Optional[float] = None
    x: Optional[float] = None

    def __post_init__(self):
        if self.name in ("bh", "bh-strict"):
            if self.q is None or not (0.0 <= self.q <= 1.0):
                raise ConfigurationError(f"{self.name} needs q in [0, 1]")
        elif self.name == "bhs":
            if self.delta is None or not (0.0 < self.delta < 1.0):
                raise ConfigurationError("bhs needs delta in (0, 1)")
            if self.x is None or not (0.0 < self.x < 1.0):
                raise ConfigurationError("bhs needs x in (0, 1)")
        else:
            raise ConfigurationError(f"unknown procedure {self.name!r}")

    def to_dict(self):
        if self.name == "bhs":
            return {"name": self.name, "delta": self.delta, "x": self.x}
        return {"name": self.name, "q": self.q}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        return cls(d.pop("name"), **{k: float(v) for k, v in d.items()})


def BH(q):
    return Procedure("bh", q=q)


def BHStrict(q):
    return Procedure("bh-strict", q=q)


def BHS(delta, x):
    return Procedure("bhs", delta=delta, x=x)


@dataclass
class SimConfig:
    mixture: MixtureSpec
    procedure: Procedure
    reps: int
    seed: int = 42
    k_max: int = 2

    def __post_init__(self):
        if int(self.reps) != self.reps or self.reps < 1:
            raise ConfigurationError(f"reps must be a positive integer, got {self.reps}")
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ConfigurationError(f"k_max must be a positive integer, got {self.k_max}")

    def to_dict(self):
        spec = self.mixture
        return {
            "gamma": spec.gamma,
            "m": spec.m,
            "alt": spec.alt.to_spec(),
            "dependence": spec.null_dependence.to_spec(),
            "procedure": self.procedure.to_dict(),
            "reps": self.reps,
            "seed": self.seed,
            "k_max": self.k_max,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            spec = MixtureSpec(
                gamma=float(d["gamma"]),
                alt=parse_model(d.get("alt", "power:alpha=0.1")),
                m=int(d["m"]),
                null_dependence=parse_dependence(d.get("dependence", "independent")),
            )
            return cls(
                mixture=spec,
                procedure=Procedure.from_dict(d["procedure"]),
                reps=int(d["reps"]),
                seed=int(d.get("seed", 42)),
                k_max=int(d.get("k_max", 2)),
            )
        except KeyError as exc:
            raise ConfigurationError(f"config is missing {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"bad config: {exc}") from None


# --- replicate generation ------------------------------------------------


def _block(spec: MixtureSpec, procedure: Procedure, rng, n: int, shifts=()):
    nulls, alts = mixture_block(spec, rng, n)
    m = spec.m
    values = np.concatenate([nulls, alts], axis=1)
    out = {}
    if procedure.name == "bhs":
        ordered = np.sort(values, axis=1)
        ghat = kernels.gamma_hat_sorted(ordered, procedure.x)
        with np.errstate(divide="ignore"):
            q_m = procedure.delta / ghat
        q_applied = np.minimum(q_m, 1.0)
        r = kernels.step_up_counts(ordered, q_applied, 0, m)
        # a zero estimate rejects everything
        r = np.where(ghat == 0.0, m, r)
        thr = np.where(ghat == 0.0, 1.0, q_applied * r / m)
        out["gamma_hat"] = ghat
        out["q_m"] = q_m
    else:
        q_applied = np.full(n, procedure.q)
        r = kernels.step_up_counts(values, q_applied, 0, m, procedure.name == "bh-strict")
        thr = q_applied * r / m
    s = kernels.count_leq(nulls, thr) if spec.m0 else np.zeros(n, dtype=np.int64)
    s = np.where(r > 0, s, 0)
    out["R"] = r
    out["S"] = s
    for j in shifts:
        rest = np.concatenate([nulls[:, j:], alts], axis=1)
        out[f"R{j}"] = kernels.step_up_counts(rest, q_applied, j, m, procedure.name == "bh-strict")
    return out


def replicate_arrays(config: SimConfig, shifts=(), threads: int = 1) -> dict:
    """Per-replicate ``R``, ``S`` (and ``R{j}`` for each shift j, ``q_m`` for BHS)."""
    spec = config.mixture
    for j in shifts:
        if not (1 <= j <= spec.m0):
            raise ConfigurationError(f"shift {j} needs 1 <= j <= m0 = {spec.m0}")
    starts = list(range(0, config.reps, CHUNK))

    def work(c):
        n = min(CHUNK, config.reps - starts[c])
        return _block(spec, config.procedure, rng_for(config.seed, c), n, shifts)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(starts))))
    else:
        parts = [work(c) for c in range(len(starts))]
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


# --- summaries -----------------------------------------------------------


def _mean(x) -> float:
    x = np.asarray(x, dtype=float)
    return math.fsum(x) / x.size


def _se(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return 0.0
    mu = _mean(x)
    return math.sqrt(math.fsum((x - mu) ** 2) / (x.size - 1) / x.size)


def _stat(name, x, k_max):
    x = np.asarray(x, dtype=float)
    moments = [_mean(x**k) for k in range(1, k_max + 1)]
    return {
        "name": name,
        "mean": moments[0],
        "se": _se(x),
        "moments": moments,
        "moment_se": [_se(x**k) for k in range(1, k_max + 1)],
        "n": int(x.size),
    }


def ratio_of_means(a, b):
    """``mean(a) / mean(b)`` with its delta-method standard error."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ma, mb = _mean(a), _mean(b)
    if mb == 0.0:
        return math.nan, math.nan
    r = ma / mb
    n = a.size
    if n < 2:
        return r, 0.0
    da, db = a - ma, b - mb
    var_a = math.fsum(da * da) / (n - 1)
    var_b = math.fsum(db * db) / (n - 1)
    cov = math.fsum(da * db) / (n - 1)
    var = (var_a - 2.0 * r * cov + r * r * var_b) / (mb * mb * n)
    return r, math.sqrt(max(var, 0.0))


def proportion_arrays(spec: MixtureSpec, arrays: dict) -> dict:
    m, m1 = spec.m, spec.m1
    r = arrays["R"].astype(float)
    s = arrays["S"].astype(float)
    out = {
        "pi1": s / np.maximum(r, 1.0),
        "pi3": (m1 - (r - s)) / np.maximum(m - r, 1.0),
        "r_over_m": r / m,
        "s_over_m": s / m,
        "p_no_rejection": (r == 0).astype(float),
    }
    if m1 > 0:
        out["pi2"] = (r - s) / m1
    return out


@dataclass
class SimReport:
    config: dict
    statistics: list
    reps: int
    seed: int
    wall_time: Optional[float] = None
    backend: str = field(default=kernels.BACKEND)

    def __getitem__(self, name) -> dict:
        for st in self.statistics:
            if st["name"] == name:
                return st
        raise KeyError(name)

    def to_dict(self):
        return {
            "config": self.config,
            "statistics": self.statistics,
            "reps": self.reps,
            "seed": self.seed,
            "wall_time": self.wall_time,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def run(config: SimConfig, threads: int = 1, timing: bool = True) -> SimReport:
    """Replicate sample -> procedure -> proportions and aggregate."""
    t0 = time.perf_counter()
    arrays = replicate_arrays(config, threads=threads)
    props = proportion_arrays(config.mixture, arrays)
    stats = [_stat(name, props[name], config.k_max) for name in ("pi1", "pi2", "pi3", "r_over_m", "s_over_m", "p_no_rejection") if name in props]
    mfdr, mfdr_se = ratio_of_means(arrays["S"], np.maximum(arrays["R"], 1))
    stats.append({"name": "mfdr", "mean": mfdr, "se": mfdr_se, "moments": [mfdr], "moment_se": [mfdr_se], "n": config.reps})
    if "q_m" in arrays:
        stats.append(_stat("q_m", arrays["q_m"], config.k_max))
        stats.append(_stat("gamma_hat", arrays["gamma_hat"], config.k_max))
    wall = time.perf_counter() - t0 if timing else None
    return SimReport(config.to_dict(), stats, config.reps, config.seed, wall)


# --- checks --------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    values: dict
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in self.values.items())
        tail = f" ({self.note})" if self.note else ""
        return f"[{status}] {self.name}: {shown}{tail}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _bh_config(gamma, alt, m, q, reps, seed, dep=Independent(), k_max=2):
    return SimConfig(MixtureSpec(gamma, alt, m, dep), BH(q), reps, seed, k_max)


def thm21_bound_check(config: SimConfig, k: int, threads: int = 1) -> CheckResult:
    """Moment bound on the false discovery proportion via shifted procedures.

    ``lhs = E[Pi1^k]``; ``rhs = sum_j c_j E[(j + R^(j))^(j-k)]`` with
    ``c_j = prod_{i<j} q (m0 - i) / m``, both estimated from the same
    replicates. Expanding ``S^k`` in falling factorials weights term j by
    the Stirling number ``S(k, j)``; the weights are all 1 for ``k <= 2``
    but not beyond, so the check is made against the weighted sum
    (``rhs_weighted``) and the unweighted one is reported alongside.
    Equality is expected for independent exactly-uniform nulls.
    """
    spec = config.mixture
    if config.procedure.name != "bh":
        raise ConfigurationError("the moment bound concerns the BH procedure")
    if not (1 <= k <= spec.m0):
        raise ConfigurationError(f"need 1 <= k <= m0 = {spec.m0}")
    q = config.procedure.q
    arrays = replicate_arrays(config, shifts=range(1, k + 1), threads=threads)
    r = arrays["R"].astype(float)
    lhs_i = (arrays["S"] / np.maximum(r, 1.0)) ** k
    rhs_i = np.zeros_like(lhs_i)
    weighted_i = np.zeros_like(lhs_i)
    coef = 1.0
    for j in range(1, k + 1):
        coef *= q * (spec.m0 - j + 1) / spec.m
        term = coef * (j + arrays[f"R{j}"].astype(float)) ** (j - k)
        rhs_i += term
        weighted_i += stirling2(k, j, exact=True) * term
    diff = weighted_i - lhs_i
    slack, se = _mean(diff), _se(diff)
    independent = isinstance(spec.null_dependence, Independent)
    ok = slack >= -SE_BAND * se
    if independent:
        ok = ok and abs(slack) <= SE_BAND * se
    note = "" if independent else "dependent nulls: premise not met, informational"
    values = {
        "lhs": _mean(lhs_i),
        "rhs": _mean(rhs_i),
        "rhs_weighted": _mean(weighted_i),
        "slack": slack,
        "se": se,
    }
    return CheckResult(f"thm21 k={k}", bool(ok), values, note)


def identity_A1_check(gamma, alt: AlternativeModel, m: int, q: float, reps: int, seed: int = 42, threads: int = 1) -> CheckResult:
    """``E[S] / (1 + E[R^(1)]) = q m0 / m`` for independent uniform nulls."""
    config = _bh_config(gamma, alt, m, q, reps, seed)
    spec = config.mixture
    target = q * spec.m0 / m
    if spec.m0 == 0:
        return CheckResult("A1 identity", True, {"ratio": 0.0, "target": 0.0, "se": 0.0}, "no nulls")
    arrays = replicate_arrays(config, shifts=(1,), threads=threads)
    ratio, se = ratio_of_means(arrays["S"], 1.0 + arrays["R1"])
    ok = abs(ratio - target) <= SE_BAND * se
    return CheckResult(
        f"A1 identity gamma={gamma} m={m} q={q}",
        bool(ok),
        {"ratio": ratio, "target": target, "se": se},
    )


def prop23_check(config: SimConfig, k: int, l: int, threads: int = 1, arrays=None) -> CheckResult:
    """``E[Pi3^l] <= (1 - gamma)^l + E[Pi1^k] / gamma^k`` (paired 3-SE band)."""
    spec = config.mixture
    gamma = spec.gamma_effective
    if gamma <= 0.0:
        raise ConfigurationError("needs gamma > 0")
    if arrays is None:
        arrays = replicate_arrays(config, threads=threads)
    props = proportion_arrays(spec, arrays)
    lhs_i = props["pi3"] ** l
    bound_i = (1.0 - gamma) ** l + props["pi1"] ** k / gamma**k
    lhs, rhs = _mean(lhs_i), _mean(bound_i)
    se = _se(lhs_i - bound_i)
    ok = lhs <= rhs + SE_BAND * se
    return CheckResult(
        f"prop23 k={k} l={l}",
        bool(ok),
        {"lhs": lhs, "rhs": rhs, "se": se, "lhs_se": _se(lhs_i), "asymptote": (1.0 - gamma) ** l},
    )


def convergence_sweep(model: AlternativeModel, gamma: float, q: float, m_grid, reps: int, seed: int = 42, threads: int = 1):
    """``E[R/m]`` and ``E[(R/m)^2]`` along increasing ``m`` against the limit.

    Returns ``(rows, target, decreasing)``. The target is ``rho`` when
    unique and the knife-edge mean otherwise.
    """
    m_grid = list(m_grid)
    if any(b <= a for a, b in zip(m_grid, m_grid[1:])):
        raise ConfigurationError("m_grid must be increasing")
    summary = rho_summary(model, q, gamma)
    if summary.rho is not None:
        target = summary.rho
    elif summary.borderline_limits:
        target = summary.borderline_limits["r_over_m"]
    else:
        target = math.nan
    rows = []
    for i, m in enumerate(m_grid):
        config = _bh_config(gamma, model, m, q, reps, seed + i)
        arrays = replicate_arrays(config, threads=threads)
        frac = arrays["R"] / m
        mean = _mean(frac)
        rows.append(
            {
                "m": m,
                "mean_r_over_m": mean,
                "se": _se(frac),
                "mean_sq": _mean(frac**2),
                "target": target,
                "abs_err": abs(mean - target),
            }
        )
    errs = [row["abs_err"] for row in rows]
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    return rows, target, decreasing


def bhs_check(model: AlternativeModel, gamma: float, delta: float, x: float, m: int, reps: int, seed: int = 42,
              threads: int = 1, q_tol: float = 0.01, eps: float = 0.02) -> CheckResult:
    """Monte Carlo FDR, power and level of the BHS procedure against its large-m brackets."""
    bounds = bhs_bounds(model, gamma, delta, x)
    config = SimConfig(MixtureSpec(gamma, model, m), BHS(delta, x), reps, seed)
    arrays = replicate_arrays(config, threads=threads)
    props = proportion_arrays(config.mixture, arrays)
    pi1, pi1_se = _mean(props["pi1"]), _se(props["pi1"])
    pi2, pi2_se = _mean(props["pi2"]), _se(props["pi2"])
    qm = _mean(arrays["q_m"])
    over = _mean(arrays["gamma_hat"] >= gamma - eps)
    values = {
        "pi1": pi1, "pi1_se": pi1_se, "fdr_lo": bounds.fdr_lo, "fdr_hi": bounds.fdr_hi,
        "pi2": pi2, "pi2_se": pi2_se, "power_lo": bounds.power_lo, "power_hi": bounds.power_hi,
        "q_m": qm, "q_limit": bounds.q_limit, "frac_gamma_hat_ge": over,
    }
    if not bounds.applicable:
        return CheckResult(f"bhs x={x}", False, values, f"premise not met: {bounds.diagnostic}")
    ok_fdr = bounds.fdr_lo - SE_BAND * pi1_se <= pi1 <= bounds.fdr_hi + SE_BAND * pi1_se
    ok_pow = bounds.power_lo - SE_BAND * pi2_se <= pi2 <= bounds.power_hi + SE_BAND * pi2_se
    ok_q = abs(qm - bounds.q_limit) <= q_tol
    return CheckResult(f"bhs x={x}", bool(ok_fdr and ok_pow and ok_q), values)


def glivenko_check(dep: DependenceModel, n_grid, reps: int, seed: int = 42, chunk: int = 10):
    """Mean sup-distance between the empirical CDF of ``n`` dependent nulls and the identity.

    Returns ``(rows, decreasing)``.
    """
    n_grid = list(n_grid)
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigurationError("n_grid must be increasing")
    rows = []
    for i, n in enumerate(n_grid):
        dists = []
        for c, start in enumerate(range(0, reps, chunk)):
            block = null_block(rng_for(seed, i, c), min(chunk, reps - start), n, dep)
            block.sort(axis=1)
            dists.append(kernels.ks_uniform_sorted(block))
        d = np.concatenate(dists)
        rows.append({"n": n, "mean_sup": _mean(d), "se": _se(d)})
    means = [row["mean_sup"] for row in rows]
    return rows, all(b < a for a, b in zip(means, means[1:]))


def ballot_check(m: int, q: float, reps: int, seed: int = 42) -> CheckResult:
    """``P(R = 0) = 1 - q`` for i.i.d. uniform values."""
    from .gof import no_rejection_probability

    p, se = no_rejection_probability(m, q, reps, seed)
    ok = abs(p - (1.0 - q)) <= SE_BAND * se
    return CheckResult(f"ballot m={m} q={q}", bool(ok), {"p_no_rejection": p, "target": 1.0 - q, "se": se})


def verification_suite(quick: bool = False, seed: int = 42, threads: int = 1):
    """Yield the full set of Monte Carlo contract checks, one ``CheckResult`` each."""
    from .distributions import Ar1Copula, Power

    scale = 10 if quick else 1
    alt = Power(0.1)
    yield ballot_check(1000, 0.2, 5000 // scale, seed)
    uniform = SimConfig(MixtureSpec(1.0, alt, 20), BH(0.3), 100_000 // scale, seed)
    for k in (1, 2, 3):
        yield thm21_bound_check(uniform, k, threads)
    for gamma in (0.5, 1.0):
        yield identity_A1_check(gamma, alt, 100, 0.2, 100_000 // scale, seed, threads)
    for gamma, q in ((0.5, 0.2), (0.9, 0.111)):
        config = SimConfig(MixtureSpec(gamma, alt, 5000), BH(q), 2000 // scale, seed)
        arrays = replicate_arrays(config, threads=threads)
        for l in (1, 2):
            res = prop23_check(config, 2, l, arrays=arrays)
            res.name += f" gamma={gamma} q={q}"
            yield res
    for x in (0.3, 0.5, 0.9):
        yield bhs_check(alt, 0.5, 0.1, x, 10_000, 1000 // scale, seed, threads)
    rows, decreasing = glivenko_check(Ar1Copula(0.5), (1000, 10_000, 100_000), 100 // scale, seed)
    values = {f"sup_n{row['n']}": row["mean_sup"] for row in rows}
    yield CheckResult("glivenko ar1 phi=0.5", decreasing, values, "mean sup distance must fall with n")
