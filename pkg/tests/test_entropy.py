"""Factorized entropy model: rates, gradients, CDF invariants."""

import numpy as np
import pytest

from pplab.entropy import MASS_FLOOR, FactorizedDensity, rate_bits, rate_grad
from pplab.errors import ShapeError
from pplab.nn import make_rng


def _random_model(ndim=2, seed=3, scale=0.5):
    m = FactorizedDensity.uniform(ndim)
    m.logits = scale * make_rng(seed).standard_normal((ndim, m.nbins))
    return m


class TestRateBits:
    def test_uniform_cdf_costs_log2_60_per_dim(self):
        # each unit interval holds 1/60 of the mass for K=30
        m = FactorizedDensity.uniform(2)
        bits = rate_bits(m, np.array([0.3, -4.2]))
        np.testing.assert_allclose(bits, 2 * np.log2(60.0), rtol=1e-12)

    def test_degenerate_cdf_costs_zero_bits(self):
        # all mass inside the two bins tiling (y-1/2, y+1/2) for y=0
        m = FactorizedDensity.uniform(1)
        m.logits = np.full((1, m.nbins), -200.0)
        m.logits[0, 60] = 0.0  # bin [0, 0.5)
        m.logits[0, 59] = 0.0  # bin [-0.5, 0)
        bits = rate_bits(m, np.array([0.0]))
        # masses at the flanks leak ~exp(-200); zero to float precision
        assert 0.0 <= bits <= 1e-6

    def test_rate_additive_across_dims(self):
        m = _random_model(3)
        y = np.array([0.7, -1.3, 4.0])
        total = rate_bits(m, y)
        parts = 0.0
        for i in range(3):
            mi = FactorizedDensity(m.logits[i : i + 1].copy(), m.halfwidth)
            parts += rate_bits(mi, y[i : i + 1])
        np.testing.assert_allclose(total, parts, rtol=1e-12)

    def test_clamps_and_warns_outside_grid(self):
        m = FactorizedDensity.uniform(1)
        with pytest.warns(RuntimeWarning):
            bits = rate_bits(m, np.array([45.0]))
        # clamped unit interval has mass floored at MASS_FLOOR
        assert bits <= -np.log2(MASS_FLOOR) + 1e-9

    def test_batched_shape(self):
        m = _random_model(2)
        out = rate_bits(m, make_rng(0).standard_normal((11, 2)))
        assert out.shape == (11,)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            rate_bits(FactorizedDensity.uniform(2), np.zeros(3))


class TestRateGrad:
    def test_symmetric_bin_center_zero_grad(self):
        # symmetric CDF and y centered in a symmetric bin: slopes cancel
        m = FactorizedDensity.uniform(2)
        _, gy = rate_grad(m, np.array([0.25, -0.25]))
        np.testing.assert_allclose(gy, np.zeros(2), atol=1e-15)

    @pytest.mark.parametrize("trial", range(20))
    def test_matches_finite_differences(self, trial):
        rng = make_rng(500 + trial)
        m = _random_model(2, seed=trial, scale=0.8)
        y = rng.uniform(-8, 8, size=(3, 2))
        gl, gy = rate_grad(m, y)
        h = 1e-6
        for s in range(3):
            for d in range(2):
                yp, ym = y.copy(), y.copy()
                yp[s, d] += h
                ym[s, d] -= h
                fd = (rate_bits(m, yp).sum() - rate_bits(m, ym).sum()) / (2 * h)
                assert abs(fd - gy[s, d]) <= 1e-4 * max(abs(fd), 1e-3)
        for d, b in [(0, 55), (1, 70), (0, 61)]:
            mp, mm = m.copy(), m.copy()
            mp.logits[d, b] += h
            mm.logits[d, b] -= h
            fd = (rate_bits(mp, y).sum() - rate_bits(mm, y).sum()) / (2 * h)
            assert abs(fd - gl[d, b]) <= 1e-4 * max(abs(fd), 1e-3)

    def test_logit_grads_sum_to_zero(self):
        m = _random_model(2, seed=8)
        gl, _ = rate_grad(m, make_rng(1).uniform(-5, 5, (16, 2)))
        np.testing.assert_allclose(gl.sum(axis=1), np.zeros(2), atol=1e-12)

    def test_weighted_grads_scale(self):
        m = _random_model(1, seed=9)
        y = np.array([[0.4], [2.2]])
        gl1, gy1 = rate_grad(m, y, weights=np.array([2.0, 0.0]))
        gl2, gy2 = rate_grad(m, y[:1])
        np.testing.assert_allclose(gl1, 2.0 * gl2, rtol=1e-12)
        np.testing.assert_allclose(gy1[0], 2.0 * gy2[0], rtol=1e-12)
        np.testing.assert_allclose(gy1[1], 0.0)


class TestCdfInvariants:
    @pytest.mark.parametrize("seed", range(5))
    def test_cdf_monotone_for_any_logits(self, seed):
        m = _random_model(1, seed=seed, scale=3.0)
        ts = np.linspace(-30, 30, 2001)[:, None]
        vals = np.array([m.cdf(t) for t in ts]).ravel()
        assert np.all(np.diff(vals) >= -1e-15)
        np.testing.assert_allclose(vals[0], 0.0, atol=1e-15)
        np.testing.assert_allclose(vals[-1], 1.0, rtol=1e-12)

    def test_integer_bin_masses_sum_to_one(self):
        # integer bins k in [-K, K] tile the grid, so the masses telescope
        m = _random_model(2, seed=12, scale=1.5)
        ks = np.arange(-30, 31, dtype=np.float64)
        total = np.zeros(2)
        for k in ks:
            y = np.full(2, k)
            lo = np.maximum(y - 0.5, -30.0)
            hi = np.minimum(y + 0.5, 30.0)
            total += m.cdf(hi) - m.cdf(lo)
        np.testing.assert_allclose(total, np.ones(2), atol=1e-6)

    def test_json_round_trip(self):
        m = _random_model(2, seed=4)
        d = m.to_json_dict()
        assert set(d) == {"knots_halfwidth", "logits"}
        m2 = FactorizedDensity.from_json_dict(d)
        np.testing.assert_array_equal(m.logits, m2.logits)
        assert m2.halfwidth == m.halfwidth
