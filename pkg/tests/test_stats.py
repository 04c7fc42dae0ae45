"""Rank correlation, Chebyshev smoothing, performance ratios."""

import numpy as np
import pytest

from pplab.errors import ConfigError, DegenerateDataError
from pplab.nn import make_rng
from pplab.stats import polyfit_smooth, relative_performance, spearman, std_error_mean


def rank_formula_oracle(xs, ys):
    """1 - 6 sum(d^2) / (n (n^2-1)) for tie-free data, with exact integer sums."""
    xs, ys = np.asarray(xs), np.asarray(ys)
    rx = np.empty(len(xs), dtype=np.int64)
    ry = np.empty(len(ys), dtype=np.int64)
    rx[np.argsort(xs)] = np.arange(1, len(xs) + 1)
    ry[np.argsort(ys)] = np.arange(1, len(ys) + 1)
    n = len(xs)
    d2 = int(np.sum((rx - ry) ** 2))
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


def average_rank_oracle(xs, ys):
    """Plain-python average ranks + Pearson, independent of scipy."""

    def ranks(v):
        order = sorted(range(len(v)), key=lambda i: v[i])
        r = [0.0] * len(v)
        i = 0
        while i < len(v):
            j = i
            while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
                j += 1
            avg = (i + j) / 2.0 + 1.0
            for k in range(i, j + 1):
                r[order[k]] = avg
            i = j + 1
        return np.array(r)

    rx, ry = ranks(list(xs)), ranks(list(ys))
    rx -= rx.mean()
    ry -= ry.mean()
    return float(rx @ ry / np.sqrt((rx @ rx) * (ry @ ry)))


class TestSpearman:
    def test_monotone(self):
        assert spearman([1, 2, 3], [10, 20, 30]).rho == 1.0

    def test_antitone(self):
        assert spearman([1, 2, 3], [3, 2, 1]).rho == -1.0

    def test_hand_value(self):
        # ranks (1,2,3,4) vs (1,3,2,4): sum d^2 = 2 -> 1 - 12/60 = 0.8
        np.testing.assert_allclose(spearman([1, 2, 3, 4], [1, 3, 2, 4]).rho, 0.8, rtol=1e-14)

    def test_oracle_equivalence_tie_free(self):
        rng = make_rng(42)
        worst = 0.0
        for _ in range(1000):
            n = int(rng.integers(3, 40))
            xs = rng.standard_normal(n)
            ys = rng.standard_normal(n)
            got = spearman(xs, ys).rho
            want = rank_formula_oracle(xs, ys)
            worst = max(worst, abs(got - want))
        assert worst <= 1e-13

    def test_oracle_equivalence_with_ties(self):
        rng = make_rng(43)
        worst = 0.0
        for _ in range(300):
            n = int(rng.integers(4, 30))
            xs = rng.integers(0, 5, n).astype(float)
            ys = rng.integers(0, 5, n).astype(float)
            if np.all(xs == xs[0]) or np.all(ys == ys[0]):
                continue
            got = spearman(xs, ys).rho
            want = average_rank_oracle(xs, ys)
            worst = max(worst, abs(got - want))
        assert worst <= 1e-12

    def test_rank_invariance_under_monotone_transforms(self):
        rng = make_rng(7)
        xs = rng.standard_normal(50)
        ys = rng.standard_normal(50)
        base = spearman(xs, ys).rho
        np.testing.assert_allclose(spearman(np.exp(xs), ys).rho, base, rtol=1e-12)
        np.testing.assert_allclose(spearman(xs, ys**3).rho, base, rtol=1e-12)

    def test_self_correlation(self):
        xs = make_rng(8).standard_normal(20)
        assert spearman(xs, xs).rho == 1.0

    def test_constant_input_raises(self):
        with pytest.raises(DegenerateDataError):
            spearman([1.0, 1.0, 1.0], [1, 2, 3])

    def test_short_input_raises(self):
        with pytest.raises(ValueError):
            spearman([1, 2], [3, 4])

    def test_tie_count(self):
        r = spearman([1, 1, 2, 3], [4, 5, 6, 7])
        assert r.tie_count == 1 and r.n == 4


class TestPolyfit:
    def test_recovers_low_degree_polynomial(self):
        xs = np.linspace(-2, 5, 60)
        ys = 3.0 - 2.0 * xs + 0.5 * xs**2
        fit = polyfit_smooth(xs, ys, degree=20)
        assert np.max(np.abs(fit(xs) - ys)) <= 1e-8

    def test_constant_data(self):
        xs = np.linspace(0, 1, 40)
        fit = polyfit_smooth(xs, np.full(40, 2.5), degree=20)
        np.testing.assert_allclose(fit(xs), 2.5, atol=1e-9)

    def test_sin_quadrature_grade(self):
        xs = np.linspace(0, np.pi, 200)
        fit = polyfit_smooth(xs, np.sin(xs), degree=20)
        assert np.max(np.abs(fit(xs) - np.sin(xs))) <= 1e-6

    def test_too_few_points(self):
        with pytest.raises(ConfigError):
            polyfit_smooth(np.arange(10), np.arange(10), degree=20)


class TestRelativePerformance:
    def test_identical_pairs(self):
        assert relative_performance((1.0, 2.0), (1.0, 2.0)) == 1.0

    def test_arithmetic(self):
        assert relative_performance((1.0, 2.0), (2.0, 2.0)) == 0.5

    def test_reciprocal_identity(self):
        a, b = (0.7, 1.3), (0.2, 3.1)
        np.testing.assert_allclose(
            relative_performance(a, b) * relative_performance(b, a), 1.0, rtol=1e-12
        )

    def test_zero_rate_rejected(self):
        with pytest.raises(ValueError):
            relative_performance((1.0, 0.0), (1.0, 1.0))

    def test_zero_denominator_rejected(self):
        with pytest.raises(ValueError):
            relative_performance((1.0, 1.0), (0.0, 1.0))


class TestStdError:
    def test_zero_variance(self):
        assert std_error_mean(0.0, 5) == 0.0

    def test_arithmetic(self):
        assert std_error_mean(4.0, 4) == 1.0

    def test_quadruple_batch_halves(self):
        np.testing.assert_allclose(std_error_mean(2.7, 64), std_error_mean(2.7, 16) / 2.0)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            std_error_mean(-1.0, 4)
        with pytest.raises(ValueError):
            std_error_mean(1.0, 0)
