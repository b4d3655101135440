"""Compiled and numpy kernels must agree bit for bit."""
import numpy as np
import pytest

from fdrlab import kernels

compiled = kernels.compiled_kernels
python = kernels.python_kernels
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def _tie_heavy(rng, rows, n, q):
    # values placed exactly on, just below and just above the thresholds
    t = q * np.arange(1, n + 1, dtype=float) / n
    pool = np.concatenate([t, np.nextafter(t, 0), np.nextafter(t, 1), [0.0, 1.0]])
    return np.ascontiguousarray(rng.choice(pool, size=(rows, n)))


class TestBackendSelection:
    def test_reports_backend(self):
        assert kernels.BACKEND in ("cython", "python")
        assert (kernels.BACKEND == "cython") == (compiled is not None)


@needs_compiled
class TestEquivalence:
    @pytest.mark.parametrize("n", [1, 2, 7, 64, 1000])
    @pytest.mark.parametrize("strict", [False, True])
    def test_step_up_random(self, n, strict):
        rng = np.random.default_rng(n)
        v = rng.random((300, n)) ** 3
        q = rng.random(300)
        for shift in (0, 2):
            m = n + shift
            a = compiled.step_up_counts(v, q, shift, m, strict)
            b = python.step_up_counts(v, q, shift, m, strict)
            assert np.array_equal(a, b)

    @pytest.mark.parametrize("n", [3, 10, 100])
    def test_step_up_ties(self, n):
        rng = np.random.default_rng(7)
        for q in (0.05, 0.2, 1 / 3, 0.5, 1.0):
            v = _tie_heavy(rng, 200, n, q)
            qs = np.full(200, q)
            for strict in (False, True):
                assert np.array_equal(compiled.step_up_counts(v, qs, 0, n, strict), python.step_up_counts(v, qs, 0, n, strict))

    @pytest.mark.parametrize("strict", [False, True])
    def test_step_up_extreme_levels(self, strict):
        # zero, subnormal and unit levels push the bucket guess to NaN or overflow
        rng = np.random.default_rng(11)
        v = rng.random((6, 5)) ** 8
        v[:, 0] = 0.0
        v[1, 1] = 5e-324
        q = np.array([0.0, 5e-324, 2.2250738585e-313, 1e-300, 1.0, 0.5])
        for shift in (0, 3):
            m = 5 + shift
            a = compiled.step_up_counts(v, q, shift, m, strict)
            b = python.step_up_counts(v, q, shift, m, strict)
            assert np.array_equal(a, b)

    def test_gamma_hat(self):
        rng = np.random.default_rng(1)
        v = np.sort(np.round(rng.random((500, 40)), 2), axis=1)
        for x in (0.05, 0.3, 0.5, 0.99):
            assert np.array_equal(compiled.gamma_hat_sorted(v, x), python.gamma_hat_sorted(v, x))

    def test_count_leq(self):
        rng = np.random.default_rng(2)
        v = np.round(rng.random((400, 50)), 2)
        t = np.round(rng.random(400), 2)
        assert np.array_equal(compiled.count_leq(v, t), python.count_leq(v, t))

    def test_ks(self):
        rng = np.random.default_rng(3)
        v = np.sort(rng.random((100, 500)), axis=1)
        assert np.array_equal(compiled.ks_uniform_sorted(v), python.ks_uniform_sorted(v))


class TestWrappers:
    def test_one_dimensional(self):
        assert kernels.step_up_counts([0.01, 0.2, 0.3, 0.9], 0.5).tolist() == [3]

    def test_read_only_input(self):
        v = np.random.default_rng(0).random((4, 10))
        v.setflags(write=False)
        assert kernels.step_up_counts(v, 0.3).shape == (4,)

    def test_ks_known(self):
        # single point at 0.5: sup |F_n - t| = 0.5
        assert kernels.ks_uniform_sorted(np.array([0.5]))[0] == 0.5

    def test_gamma_hat_empty_window(self):
        assert kernels.gamma_hat_sorted(np.array([0.6, 0.7]), 0.5)[0] == 1.0
