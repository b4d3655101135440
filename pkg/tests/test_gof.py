"""Empirical-process view of the step-up rule and the ballot probability."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fdrlab.errors import ConfigurationError
from fdrlab.gof import (
    EmpiricalCdf,
    bh_via_gof,
    bh_via_gof_rows,
    no_rejection_probability,
    psi_grid,
    renyi_sup,
)
from fdrlab.procedures import PValueBatch, bh_count


class TestEmpiricalCdf:
    def test_right_continuous(self):
        H = EmpiricalCdf([0.2, 0.2, 0.5])
        assert H(0.2) == pytest.approx(2 / 3)
        assert H(np.nextafter(0.2, 0)) == 0.0
        assert H(1.0) == 1.0


class TestPsiGrid:
    def test_single_value(self):
        assert psi_grid(PValueBatch([0.1]), 0.5, 1) == 1.0

    def test_all_ones(self):
        assert psi_grid(PValueBatch([1.0, 1.0, 1.0]), 0.5, 1) == -1.0

    def test_four_values(self):
        assert psi_grid(PValueBatch([0.01, 0.2, 0.3, 0.9]), 0.5, 1) == pytest.approx(1.0)

    def test_bad_start(self):
        with pytest.raises(ConfigurationError):
            psi_grid(PValueBatch([0.1]), 0.5, 2)


class TestRenyiSup:
    def test_no_mass(self):
        assert renyi_sup(PValueBatch([1.0, 1.0]), 0.5, 0.1) == -1.0

    def test_single_jump(self):
        assert renyi_sup(PValueBatch([0.3]), 0.5, 0.1) == pytest.approx(0.7 / 0.3)

    @given(values=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30), q=st.floats(0.01, 1.0), r=st.integers(1, 30))
    @settings(max_examples=200, deadline=None)
    def test_grid_below_sup(self, values, q, r):
        b = PValueBatch(values)
        r = min(r, b.m)
        assert psi_grid(b, q, r) <= renyi_sup(b, q, q * r / b.m) + 1e-12

    def test_dense_grid_oracle(self):
        rng = np.random.default_rng(4)
        b = PValueBatch(rng.random(25) ** 2)
        t = np.linspace(0.05, 0.4, 200_001)
        dense = np.max((EmpiricalCdf(b.values)(t) - t) / t)
        exact = renyi_sup(b, 0.4, 0.05)
        assert exact >= dense
        assert exact == pytest.approx(dense, abs=1e-3)


class TestBhViaGof:
    def test_four_values(self):
        assert bh_via_gof(PValueBatch([0.01, 0.2, 0.3, 0.9]), 0.5) == 3

    def test_all_ones(self):
        assert bh_via_gof(PValueBatch([1.0] * 4), 0.5) == 0

    @given(
        values=st.lists(st.one_of(st.floats(0.0, 1.0), st.sampled_from([0.0, 0.0625, 0.125, 0.25, 0.5, 1.0])), min_size=1, max_size=8),
        j=st.integers(1, 64),
    )
    @settings(max_examples=500, deadline=None)
    def test_equals_bh(self, values, j):
        b = PValueBatch(values)
        assert bh_via_gof(b, j / 64) == bh_count(b, j / 64).r

    def test_rows_large(self):
        rng = np.random.default_rng(8)
        v = rng.random((50, 300)) ** 4
        expect = [bh_count(PValueBatch(r), 0.15).r for r in v]
        assert bh_via_gof_rows(v, 0.15).tolist() == expect


def ballot_m2(q):
    """P(R = 0) for two uniforms: X_(1) > q/2 and X_(2) > q, by numeric integration."""
    inner = integrate.dblquad(lambda y, x: 1.0, q / 2, 1.0, lambda x: max(x, q), lambda x: 1.0, epsabs=1e-12)[0]
    return 2.0 * inner


class TestNoRejectionProbability:
    @pytest.mark.parametrize("q", [0.1, 0.3, 0.5, 0.8])
    def test_two_point_integration(self, q):
        # the ballot identity at m=2, checked by quadrature
        assert ballot_m2(q) == pytest.approx(1.0 - q, abs=1e-9)

    def test_small_q(self):
        p, _ = no_rejection_probability(50, 1e-9, 500, seed=1)
        assert p == 1.0

    def test_m10_q_half(self):
        p, se = no_rejection_probability(10, 0.5, 20_000, seed=42)
        assert abs(p - 0.5) <= 3 * se

    def test_m2_matches_integration(self):
        p, se = no_rejection_probability(2, 0.3, 40_000, seed=3)
        assert abs(p - ballot_m2(0.3)) <= 3 * se

    def test_bad_args(self):
        with pytest.raises(ConfigurationError):
            no_rejection_probability(0, 0.3, 10)
