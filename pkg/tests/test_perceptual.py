"""Patches, pyramids, and perceptual distances."""

import numpy as np
import pytest

from pplab.errors import ConfigError, ShapeError
from pplab.nn import make_rng
from pplab.perceptual import (
    LaplacianPyramid,
    Patch,
    add_gaussian_noise,
    build_pyramid,
    collapse_pyramid,
    contrast_interp,
    msssim,
    msssim_batch,
    msssim_batch_with_grad,
    nlpd,
    nlpd_batch,
    nlpd_batch_with_grad,
    psnr,
    read_pgm,
    read_rawf32,
    rmse,
    tile_patches,
    write_pgm,
    write_rawf32,
)
from pplab.perceptual.pyramid import pyramid_vjp


def natural_patch(corpus_dir, size=16, index=0) -> Patch:
    pgms = sorted(corpus_dir.glob("*.pgm"))
    img = read_pgm(pgms[0]).pixels
    tiles = tile_patches(img, size=size)
    return tiles[index]


class TestPatch:
    def test_clamps_on_construction(self):
        p = Patch(np.array([[-0.5, 0.5], [2.0, 1.0]]))
        np.testing.assert_array_equal(p.pixels, [[0.0, 0.5], [1.0, 1.0]])

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Patch(np.array([[np.nan, 0.0]]))

    def test_rejects_wrong_rank(self):
        with pytest.raises(ShapeError):
            Patch(np.zeros(4))


class TestRmsePsnr:
    def test_identical_patches(self):
        p = Patch(make_rng(0).random((8, 8)))
        assert rmse(p, p) == 0.0
        assert psnr(p, p) == float("inf")

    def test_black_vs_white(self):
        a = Patch(np.zeros((4, 4)))
        b = Patch(np.ones((4, 4)))
        assert rmse(a, b) == 1.0
        assert psnr(a, b) == 0.0

    def test_symmetric(self):
        rng = make_rng(1)
        a, b = Patch(rng.random((6, 6))), Patch(rng.random((6, 6)))
        assert rmse(a, b) == rmse(b, a)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            rmse(Patch(np.zeros((4, 4))), Patch(np.zeros((4, 5))))


class TestNoiseAndContrast:
    def test_zero_sigma_identity(self):
        p = Patch(make_rng(2).random((8, 8)))
        q = add_gaussian_noise(p, 0.0, make_rng(3))
        np.testing.assert_array_equal(p.pixels, q.pixels)

    def test_noise_std_matches_sigma(self):
        p = Patch(np.full((64, 64), 0.5))
        q = add_gaussian_noise(p, 10.0, make_rng(4))
        measured = (q.pixels - p.pixels).std()
        assert abs(measured - 10.0 / 255.0) <= 0.1 * (10.0 / 255.0)

    def test_noise_deterministic(self):
        p = Patch(make_rng(5).random((8, 8)))
        a = add_gaussian_noise(p, 5.0, make_rng(6))
        b = add_gaussian_noise(p, 5.0, make_rng(6))
        np.testing.assert_array_equal(a.pixels, b.pixels)

    def test_contrast_alpha_one_identity(self):
        p = Patch(make_rng(7).random((8, 8)))
        np.testing.assert_array_equal(contrast_interp(p, 1.0).pixels, p.pixels)

    def test_contrast_alpha_zero_solid_mean(self):
        p = Patch(make_rng(8).random((8, 8)))
        q = contrast_interp(p, 0.0)
        np.testing.assert_allclose(q.pixels, p.pixels.mean(), rtol=1e-12)

    def test_contrast_doubling_two_level(self):
        p = Patch(np.array([[0.4, 0.6], [0.6, 0.4]]))
        q = contrast_interp(p, 2.0)
        np.testing.assert_allclose(sorted(np.unique(q.pixels)), [0.3, 0.7], rtol=1e-12)

    def test_contrast_range_checked(self):
        p = Patch(np.zeros((2, 2)))
        with pytest.raises(ConfigError):
            contrast_interp(p, 2.5)


class TestPyramid:
    @pytest.mark.parametrize("size", [16, 32, 64])
    def test_perfect_reconstruction(self, size):
        x = make_rng(size).random((3, size, size))
        pyr = build_pyramid(x)
        err = np.abs(collapse_pyramid(pyr) - x).max()
        assert err <= 1e-6

    def test_default_level_counts(self):
        assert build_pyramid(np.zeros((16, 16))).n_levels == 3
        assert build_pyramid(np.zeros((64, 64))).n_levels == 5

    def test_vjp_is_exact_adjoint(self):
        # <g, L(x)> == <L^T(g), x> for the linear pyramid map
        rng = make_rng(10)
        x = rng.random((1, 16, 16))
        pyr = build_pyramid(x, 3)
        g_bands = [rng.standard_normal(b.shape) for b in pyr.bands]
        g_res = rng.standard_normal(pyr.residual.shape)
        lhs = sum(float((g * b).sum()) for g, b in zip(g_bands, pyr.bands))
        lhs += float((g_res * pyr.residual).sum())
        gx = pyramid_vjp(g_bands, g_res)
        rhs = float((gx * x).sum())
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10)

    def test_odd_size_rejected(self):
        with pytest.raises(ShapeError):
            build_pyramid(np.zeros((18, 18)), levels=3)


class TestMsssim:
    def test_identity(self, corpus_dir):
        p = natural_patch(corpus_dir)
        assert msssim(p, p) == 1.0

    def test_symmetric(self, corpus_dir):
        a = natural_patch(corpus_dir, index=1)
        b = add_gaussian_noise(a, 20.0, make_rng(11))
        np.testing.assert_allclose(msssim(a, b), msssim(b, a), rtol=1e-12)

    def test_monotone_noise_degradation(self, corpus_dir):
        a = natural_patch(corpus_dir, index=2)
        low = msssim(a, add_gaussian_noise(a, 0.01 * 255, make_rng(12)))
        high = msssim(a, add_gaussian_noise(a, 0.1 * 255, make_rng(12)))
        assert high < low

    def test_too_small_rejected(self):
        with pytest.raises(ShapeError):
            msssim(Patch(np.zeros((8, 8))), Patch(np.zeros((8, 8))))

    @pytest.mark.parametrize("size", [16, 32])
    def test_gradient_matches_finite_differences(self, size, corpus_dir):
        rng = make_rng(13)
        a = natural_patch(corpus_dir, size=size).pixels[None]
        b = np.clip(a + 0.05 * rng.standard_normal(a.shape), 0, 1)
        _, grad = msssim_batch_with_grad(a, b)
        h = 1e-6
        for i, j in [(0, 0), (size // 2, size // 3), (size - 1, size - 1)]:
            bp, bm = b.copy(), b.copy()
            bp[0, i, j] += h
            bm[0, i, j] -= h
            fd = (msssim_batch(a, bp)[0] - msssim_batch(a, bm)[0]) / (2 * h)
            assert abs(fd - grad[0, i, j]) <= 1e-4 * max(abs(fd), 1e-4)

    def test_range(self, corpus_dir):
        a = natural_patch(corpus_dir, index=3)
        b = Patch(make_rng(14).random((16, 16)))
        v = msssim(a, b)
        assert -1.0 <= v <= 1.0


class TestNlpd:
    def test_identity(self, corpus_dir):
        p = natural_patch(corpus_dir)
        assert nlpd(p, p) == 0.0

    def test_symmetric_nonnegative(self, corpus_dir):
        a = natural_patch(corpus_dir, index=4)
        b = add_gaussian_noise(a, 15.0, make_rng(15))
        d1, d2 = nlpd(a, b), nlpd(b, a)
        assert d1 >= 0
        np.testing.assert_allclose(d1, d2, rtol=1e-12)

    def test_monotone_in_noise_amplitude(self, corpus_dir):
        a = natural_patch(corpus_dir, index=5)
        noise = make_rng(16).standard_normal((16, 16))
        vals = [
            nlpd(a, Patch(np.clip(a.pixels + eps * noise, 0, 1)))
            for eps in (0.01, 0.05, 0.1)
        ]
        assert vals[0] < vals[1] < vals[2]

    def test_gradient_matches_finite_differences(self, corpus_dir):
        rng = make_rng(17)
        a = natural_patch(corpus_dir, index=6).pixels[None]
        b = np.clip(a + 0.05 * rng.standard_normal(a.shape), 0, 1)
        _, grad = nlpd_batch_with_grad(a, b)
        h = 1e-6
        for i, j in [(0, 0), (7, 11), (15, 15)]:
            bp, bm = b.copy(), b.copy()
            bp[0, i, j] += h
            bm[0, i, j] -= h
            fd = (nlpd_batch(a, bp)[0] - nlpd_batch(a, bm)[0]) / (2 * h)
            assert abs(fd - grad[0, i, j]) <= 1e-4 * max(abs(fd), 1e-4)

    def test_min_size_enforced(self):
        with pytest.raises(ShapeError):
            nlpd(Patch(np.zeros((8, 8))), Patch(np.zeros((8, 8))))


class TestDistancesZeroIffIdentical:
    def test_on_fixture_corpus(self, corpus_dir):
        tiles = [natural_patch(corpus_dir, index=i) for i in range(0, 40, 5)]
        for i, a in enumerate(tiles):
            for j, b in enumerate(tiles):
                m = msssim(a, b)
                d = nlpd(a, b)
                if np.array_equal(a.pixels, b.pixels):
                    assert m == 1.0 and d == 0.0
                else:
                    assert m < 1.0 - 1e-9 and d > 1e-9


class TestFileFormats:
    def test_pgm_round_trip(self, tmp_path):
        p = Patch(make_rng(18).random((24, 17)))
        path = tmp_path / "t.pgm"
        write_pgm(path, p)
        q = read_pgm(path)
        # 8-bit quantization on write
        assert q.pixels.shape == (24, 17)
        assert np.abs(q.pixels - p.pixels).max() <= 0.5 / 255.0 + 1e-12

    def test_pgm_comment_header(self, tmp_path):
        path = tmp_path / "c.pgm"
        data = bytes(range(6))
        path.write_bytes(b"P5\n# a comment\n3 2\n255\n" + data)
        p = read_pgm(path)
        assert p.pixels.shape == (2, 3)
        np.testing.assert_allclose(p.pixels[0, 1], 1.0 / 255.0)

    def test_rawf32_round_trip(self, tmp_path):
        p = Patch(make_rng(19).random((9, 13)))
        path = tmp_path / "t.raw"
        write_rawf32(path, p)
        q = read_rawf32(path)
        assert q.pixels.shape == (9, 13)
        np.testing.assert_allclose(q.pixels, p.pixels, atol=1e-7)

    def test_tile_overlap_counts(self, corpus_dir):
        img = read_pgm(sorted(corpus_dir.glob("*.pgm"))[0]).pixels
        tiles = tile_patches(img, size=16)
        expected = ((img.shape[0] - 16) // 8 + 1) * ((img.shape[1] - 16) // 8 + 1)
        assert len(tiles) == expected
