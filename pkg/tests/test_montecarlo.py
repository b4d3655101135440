"""Monte Carlo harness: reproducibility, summaries and the check suite."""
import json
import math

import numpy as np
import pytest

from fdrlab.distributions import Ar1Copula, Degenerate, Equicorrelated, Independent, MixtureSpec, Power, TruncatedPower
from fdrlab.errors import ConfigurationError
from fdrlab.montecarlo import (
    BH,
    BHS,
    BHStrict,
    SimConfig,
    bhs_check,
    convergence_sweep,
    glivenko_check,
    identity_A1_check,
    prop23_check,
    ratio_of_means,
    replicate_arrays,
    run,
    thm21_bound_check,
)
from fdrlab.procedures import PValueBatch, bh_count, bhs
from fdrlab.theory import average_power_limit


def config(gamma, alt, m, proc, reps, seed=42, dep=Independent(), k_max=2):
    return SimConfig(MixtureSpec(gamma, alt, m, dep), proc, reps, seed, k_max)


class TestConfig:
    def test_zero_reps(self):
        with pytest.raises(ConfigurationError):
            config(0.5, Power(0.1), 10, BH(0.2), 0)

    def test_bad_procedure(self):
        with pytest.raises(ConfigurationError):
            BH(1.5)
        with pytest.raises(ConfigurationError):
            BHS(0.1, 1.0)

    def test_dict_round_trip(self):
        c = config(0.5, Power(0.1), 10, BHS(0.1, 0.5), 7, dep=Ar1Copula(0.5))
        assert SimConfig.from_dict(c.to_dict()) == c

    def test_missing_key(self):
        with pytest.raises(ConfigurationError, match="procedure"):
            SimConfig.from_dict({"gamma": 0.5, "m": 10, "reps": 3})


class TestReplicates:
    def test_matches_single_batch_rules(self):
        # per-replicate R and S agree with the reference procedures on the same draws
        from fdrlab.distributions import mixture_block, rng_for

        c = config(0.5, Power(0.1), 40, BH(0.2), 30, seed=3)
        arrays = replicate_arrays(c)
        nulls, alts = mixture_block(c.mixture, rng_for(3, 0), 30)
        labels = np.r_[np.ones(20, bool), np.zeros(20, bool)]
        for i in range(30):
            out = bh_count(PValueBatch(np.r_[nulls[i], alts[i]], labels), 0.2)
            assert (arrays["R"][i], arrays["S"][i]) == (out.r, out.s)

    def test_bhs_matches_reference(self):
        from fdrlab.distributions import mixture_block, rng_for

        c = config(0.5, Power(0.1), 40, BHS(0.1, 0.5), 30, seed=4)
        arrays = replicate_arrays(c)
        nulls, alts = mixture_block(c.mixture, rng_for(4, 0), 30)
        labels = np.r_[np.ones(20, bool), np.zeros(20, bool)]
        for i in range(30):
            out = bhs(PValueBatch(np.r_[nulls[i], alts[i]], labels), 0.1, 0.5)
            assert (arrays["R"][i], arrays["S"][i], arrays["q_m"][i]) == (out.r, out.s, out.q_used)

    def test_thread_count_irrelevant(self):
        c = config(0.5, Power(0.1), 100, BH(0.2), 1700)
        a = run(c, threads=1, timing=False).to_json()
        b = run(c, threads=3, timing=False).to_json()
        assert a == b

    def test_seed_changes_output(self):
        a = run(config(0.5, Power(0.1), 100, BH(0.2), 600, seed=1), timing=False)
        b = run(config(0.5, Power(0.1), 100, BH(0.2), 600, seed=2), timing=False)
        assert a["pi1"]["mean"] != b["pi1"]["mean"]


class TestRun:
    def test_uniform_nulls(self):
        report = run(config(1.0, Power(0.1), 1000, BH(0.2), 5000))
        pi1 = report["pi1"]
        assert abs(pi1["mean"] - 0.2) <= 3 * pi1["se"]
        p0 = report["p_no_rejection"]
        assert abs(p0["mean"] - 0.8) <= 3 * p0["se"]

    def test_no_nulls(self):
        report = run(config(0.0, Power(0.1), 50, BH(0.2), 300))
        assert report["pi1"]["moments"] == [0.0, 0.0]
        assert report["pi1"]["se"] == 0.0

    def test_power(self):
        report = run(config(0.5, Power(0.1), 5000, BH(0.2), 300))
        assert abs(report["pi2"]["mean"] - 0.784) <= 0.02

    def test_report_json(self):
        report = run(config(0.5, Power(0.1), 20, BHStrict(0.2), 50, k_max=3), timing=False)
        data = json.loads(report.to_json())
        assert data["wall_time"] is None and data["reps"] == 50
        names = [s["name"] for s in data["statistics"]]
        assert names == ["pi1", "pi2", "pi3", "r_over_m", "s_over_m", "p_no_rejection", "mfdr"]
        assert len(data["statistics"][0]["moments"]) == 3

    def test_bhs_statistics(self):
        report = run(config(0.5, Power(0.1), 200, BHS(0.1, 0.5), 100))
        assert report["q_m"]["mean"] > 0.1


class TestRatioOfMeans:
    def test_constant_ratio(self):
        r, se = ratio_of_means([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
        assert r == 2.0 and se == pytest.approx(0.0, abs=1e-15)

    def test_matches_bootstrap(self):
        rng = np.random.default_rng(0)
        b = rng.random(4000) + 1.0
        a = 0.5 * b + rng.normal(0, 0.1, 4000)
        _, se = ratio_of_means(a, b)
        boots = []
        for _ in range(400):
            i = rng.integers(0, 4000, 4000)
            boots.append(a[i].mean() / b[i].mean())
        assert se == pytest.approx(np.std(boots), rel=0.15)


class TestMomentBound:
    def test_first_moment_rhs_exact(self):
        c = config(0.5, Power(0.1), 40, BH(0.2), 2000)
        res = thm21_bound_check(c, 1)
        assert res.values["rhs"] == pytest.approx(0.2 * 20 / 40, abs=1e-15)
        assert res.passed

    def test_second_moment_uniform(self):
        assert thm21_bound_check(config(1.0, Power(0.1), 20, BH(0.3), 100_000), 2).passed

    def test_second_moment_degenerate_alternatives(self):
        assert thm21_bound_check(config(0.5, Degenerate(0.01), 40, BH(0.2), 50_000), 2).passed

    def test_third_moment_needs_weights(self):
        res = thm21_bound_check(config(1.0, Power(0.1), 20, BH(0.3), 50_000), 3)
        assert res.passed
        # the unweighted sum falls far short of the moment
        assert res.values["lhs"] - res.values["rhs"] > 20 * res.values["se"]

    def test_requires_bh(self):
        with pytest.raises(ConfigurationError):
            thm21_bound_check(config(1.0, Power(0.1), 20, BHS(0.1, 0.5), 10), 1)

    def test_order_bounded_by_nulls(self):
        with pytest.raises(ConfigurationError):
            thm21_bound_check(config(0.1, Power(0.1), 20, BH(0.3), 10), 3)


class TestIdentityA1:
    def test_pure_null(self):
        assert identity_A1_check(1.0, Power(0.1), 50, 0.3, 100_000).passed

    def test_zero_level(self):
        res = identity_A1_check(0.5, Power(0.1), 20, 0.0, 500)
        assert res.values["ratio"] == 0.0 == res.values["target"]
        assert res.passed

    def test_degenerate_alternatives(self):
        res = identity_A1_check(0.5, Degenerate(0.01), 100, 0.2, 50_000)
        assert res.passed and res.values["target"] == pytest.approx(0.1)


class TestProp23:
    def test_pure_null(self):
        res = prop23_check(config(1.0, Power(0.1), 50, BH(0.2), 1000), 2, 1)
        assert res.values["lhs"] == 0.0 and res.passed

    def test_mixture(self):
        assert prop23_check(config(0.5, Power(0.1), 2000, BH(0.2), 500), 2, 1).passed

    def test_asymptote(self):
        res = prop23_check(config(0.5, Power(0.1), 5000, BH(0.2), 300), 2, 2)
        assert res.values["lhs"] <= 0.25 + 3 * res.values["lhs_se"]


class TestConvergence:
    def test_degenerate(self):
        rows, target, _ = convergence_sweep(Degenerate(0.1), 0.5, 0.5, [100, 1000, 10_000, 100_000], 40)
        assert target == pytest.approx(2 / 3)
        assert rows[-1]["abs_err"] < 0.005

    def test_pure_null(self):
        rows, target, _ = convergence_sweep(Power(0.1), 1.0, 0.2, [100, 10_000], 200)
        assert target == 0.0
        assert rows[-1]["mean_r_over_m"] < rows[0]["mean_r_over_m"]
        assert rows[-1]["mean_r_over_m"] < 0.01

    def test_bad_grid(self):
        with pytest.raises(ConfigurationError):
            convergence_sweep(Power(0.1), 0.5, 0.2, [100, 100], 10)


class TestBhsCheck:
    def test_power_family(self):
        res = bhs_check(Power(0.1), 0.5, 0.1, 0.5, 10_000, 300)
        assert res.passed
        assert res.values["frac_gamma_hat_ge"] == 1.0

    def test_ideal_case(self):
        res = bhs_check(TruncatedPower(0.1, 0.6), 0.5, 0.1, 0.8, 10_000, 300)
        target = average_power_limit(TruncatedPower(0.1, 0.6), 0.2, 0.5)
        assert res.values["power_lo"] == res.values["power_hi"] == pytest.approx(target)
        assert abs(res.values["pi2"] - target) <= 0.02


class TestGlivenko:
    def test_independent_root_n(self):
        rows, decreasing = glivenko_check(Independent(), [100, 10_000], 200)
        assert decreasing
        for row in rows:
            # E sup|F_n - F| sqrt(n) is about 0.87 for the uniform
            assert 0.7 < row["mean_sup"] * math.sqrt(row["n"]) < 1.0

    def test_ar1_decreasing(self):
        assert glivenko_check(Ar1Copula(0.5), [1000, 10_000, 100_000], 30)[1]

    def test_equicorrelated_persists(self):
        rows, _ = glivenko_check(Equicorrelated(0.3), [1000, 100_000], 30)
        assert rows[-1]["mean_sup"] > 0.1
