"""Multi-scale structural similarity with an exact hand-written gradient.

Per-scale contrast/structure terms and a final-scale luminance term are
combined with the canonical five exponents, renormalized when fewer scales
fit the patch.  Local statistics use a Gaussian window over valid
positions; scales are linked by 2x2 average pooling.  Small patches shrink
the window from 11 to 8 pixels.  Negative factor means are clamped to
zero before exponentiation (the product is then zero).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import ShapeError
from .patch import Patch

K1 = 0.01
K2 = 0.03
C1 = K1 * K1
C2 = K2 * K2
WINDOW_SIGMA = 1.5
CANONICAL_EXPONENTS = np.array([0.0448, 0.2856, 0.3001, 0.2363, 0.1333])


def scales_for(height: int, width: int) -> int:
    """Largest scale count (max 5) with at least 8 pixels at the coarsest scale."""
    side = min(height, width)
    if side < 16:
        raise ShapeError("need at least 16 pixels per side for two scales")
    return min(5, int(np.log2(side / 8.0)) + 1)


def _window_size(height: int, width: int, scales: int) -> int:
    return 11 if min(height, width) // (1 << (scales - 1)) >= 11 else 8


@lru_cache(maxsize=None)
def _gauss_valid_op(n: int, w: int) -> np.ndarray:
    """(n-w+1, n) matrix of a valid-mode normalized Gaussian window."""
    offsets = np.arange(w) - (w - 1) / 2.0
    g = np.exp(-0.5 * (offsets / WINDOW_SIGMA) ** 2)
    g /= g.sum()
    mat = np.zeros((n - w + 1, n))
    for a in range(n - w + 1):
        mat[a, a : a + w] = g
    return mat


@lru_cache(maxsize=None)
def _avgpool_op(n: int) -> np.ndarray:
    mat = np.zeros((n // 2, n))
    idx = np.arange(n // 2)
    mat[idx, 2 * idx] = 0.5
    mat[idx, 2 * idx + 1] = 0.5
    return mat


def _win(x, gr, gc):
    return gr @ x @ gc.T


def _scale_stats(a, b, gr, gc):
    mu_a = _win(a, gr, gc)
    mu_b = _win(b, gr, gc)
    var_a = _win(a * a, gr, gc) - mu_a * mu_a
    var_b = _win(b * b, gr, gc) - mu_b * mu_b
    cov = _win(a * b, gr, gc) - mu_a * mu_b
    return mu_a, mu_b, var_a, var_b, cov


def _forward(a: np.ndarray, b: np.ndarray, scales: int, window: int):
    """Per-scale factor means and the caches needed for the backward pass."""
    levels = []  # (a_s, b_s, gr, gc, stats)
    cs_means = []
    cur_a, cur_b = a, b
    for s in range(scales):
        h, w = cur_a.shape[-2:]
        gr = _gauss_valid_op(h, window)
        gc = _gauss_valid_op(w, window)
        stats = _scale_stats(cur_a, cur_b, gr, gc)
        _, _, var_a, var_b, cov = stats
        cs_map = (2.0 * cov + C2) / (var_a + var_b + C2)
        cs_means.append(cs_map.mean(axis=(-2, -1)))
        levels.append((cur_a, cur_b, gr, gc, stats))
        if s < scales - 1:
            pr = _avgpool_op(h)
            pc = _avgpool_op(w)
            cur_a = pr @ cur_a @ pc.T
            cur_b = pr @ cur_b @ pc.T
    mu_a, mu_b, _, _, _ = levels[-1][4]
    lum_map = (2.0 * mu_a * mu_b + C1) / (mu_a * mu_a + mu_b * mu_b + C1)
    lum_mean = lum_map.mean(axis=(-2, -1))
    return cs_means, lum_mean, levels


def _combine(cs_means, lum_mean, exponents):
    """Product of clamped factors raised to their exponents."""
    factors = np.stack(cs_means + [lum_mean], axis=0)  # (scales+1, batch)
    clamped = np.maximum(factors, 0.0)
    exps = np.concatenate([exponents, [exponents[-1]]])
    return np.prod(clamped ** exps[:, None], axis=0), factors, exps


def msssim_batch(a: np.ndarray, b: np.ndarray, scales: int | None = None) -> np.ndarray:
    """MS-SSIM for batched (batch, h, w) arrays; returns (batch,)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shapes differ: {a.shape} vs {b.shape}")
    h, w = a.shape[-2:]
    if scales is None:
        scales = scales_for(h, w)
    window = _window_size(h, w, scales)
    exponents = CANONICAL_EXPONENTS[:scales] / CANONICAL_EXPONENTS[:scales].sum()
    cs_means, lum_mean, _ = _forward(a, b, scales, window)
    value, _, _ = _combine(cs_means, lum_mean, exponents)
    return value


def msssim_batch_with_grad(a: np.ndarray, b: np.ndarray, scales: int | None = None):
    """MS-SSIM and its exact gradient with respect to ``b``.

    Samples with a clamped (non-positive) factor get value 0 and a zero
    gradient.  Returns (value (batch,), grad (batch, h, w)).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shapes differ: {a.shape} vs {b.shape}")
    h, w = a.shape[-2:]
    if scales is None:
        scales = scales_for(h, w)
    window = _window_size(h, w, scales)
    exponents = CANONICAL_EXPONENTS[:scales] / CANONICAL_EXPONENTS[:scales].sum()

    cs_means, lum_mean, levels = _forward(a, b, scales, window)
    value, factors, exps = _combine(cs_means, lum_mean, exponents)

    # d value / d factor_k = value * w_k / factor_k (zero where clamped)
    alive = np.all(factors > 0.0, axis=0)
    safe = np.where(factors > 0.0, factors, 1.0)
    g_factors = np.where(alive[None, :], value[None, :] * exps[:, None] / safe, 0.0)

    grad_b_scale = None  # gradient w.r.t. the scale-s image of b, built coarse->fine
    for s in range(scales - 1, -1, -1):
        cur_a, cur_b, gr, gc, stats = levels[s]
        mu_a, mu_b, var_a, var_b, cov = stats
        npix = mu_a.shape[-2] * mu_a.shape[-1]

        # contrast/structure term at this scale
        den = var_a + var_b + C2
        g_cs_map = (g_factors[s] / npix)[:, None, None]
        g_cov = g_cs_map * 2.0 / den
        g_varb = -g_cs_map * (2.0 * cov + C2) / (den * den)
        g_mu_b = -g_cov * mu_a - 2.0 * g_varb * mu_b
        g_b = cur_a * _win(g_cov, gr.T, gc.T) + 2.0 * cur_b * _win(g_varb, gr.T, gc.T)

        if s == scales - 1:
            # luminance term lives at the coarsest scale
            lden = mu_a * mu_a + mu_b * mu_b + C1
            g_lum_map = (g_factors[scales] / npix)[:, None, None]
            g_mu_b = g_mu_b + g_lum_map * (
                2.0 * mu_a / lden - (2.0 * mu_a * mu_b + C1) * 2.0 * mu_b / (lden * lden)
            )
        g_b = g_b + _win(g_mu_b, gr.T, gc.T)

        if grad_b_scale is not None:
            # fold in the gradient arriving from the coarser scale's pooling
            pr = _avgpool_op(cur_b.shape[-2])
            pc = _avgpool_op(cur_b.shape[-1])
            g_b = g_b + pr.T @ grad_b_scale @ pc
        grad_b_scale = g_b

    return value, grad_b_scale


def msssim(a: Patch, b: Patch, scales: int | None = None) -> float:
    """Multi-scale SSIM between two patches (1.0 for identical inputs)."""
    if a.pixels.shape != b.pixels.shape:
        raise ShapeError("patch dimensions differ")
    return float(msssim_batch(a.pixels[None], b.pixels[None], scales)[0])
