"""Normalized Laplacian pyramid distance with an exact hand-written gradient.

Each pyramid level (bands and the low-pass residual) is divisively
normalized by a local amplitude estimate: z / (c + A*|z|), where A is a
3x3 averaging filter and c a per-level constant.  The distance is the mean
over levels of the root-mean-square difference of normalized levels.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import ShapeError
from .patch import Patch
from .pyramid import apply_sep, build_pyramid, levels_for, pyramid_vjp

# Per-level divisive-normalization constant; config-exposed for experiments.
DEFAULT_BAND_CONST = 0.17
BOX3 = np.array([1.0, 1.0, 1.0]) / 3.0


@lru_cache(maxsize=None)
def _box_op(n: int) -> np.ndarray:
    from .pyramid import conv_matrix

    return conv_matrix(BOX3, n)


def _normalize(z: np.ndarray, c: float):
    """Divisive normalization; returns (normalized, amplitude) per level."""
    n = z.shape[-2:]
    vr, vc = _box_op(n[0]), _box_op(n[1])
    s = c + apply_sep(vr, vc, np.abs(z))
    return z / s, s


def _levels(x: np.ndarray, levels: int):
    pyr = build_pyramid(x, levels)
    return pyr.bands + [pyr.residual]


def nlpd_batch(a: np.ndarray, b: np.ndarray, levels: int | None = None, c: float = DEFAULT_BAND_CONST) -> np.ndarray:
    """Distance for batched (batch, h, w) arrays; returns (batch,)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shapes differ: {a.shape} vs {b.shape}")
    if levels is None:
        levels = levels_for(*a.shape[-2:])
    za = _levels(a, levels)
    zb = _levels(b, levels)
    total = 0.0
    for la, lb in zip(za, zb):
        na, _ = _normalize(la, c)
        nb, _ = _normalize(lb, c)
        diff = na - nb
        total = total + np.sqrt(np.mean(diff * diff, axis=(-2, -1)))
    return total / len(za)


def nlpd_batch_with_grad(a: np.ndarray, b: np.ndarray, levels: int | None = None, c: float = DEFAULT_BAND_CONST):
    """Distance and its exact gradient with respect to ``b``.

    Returns (dist (batch,), grad (batch, h, w)).  Where a level difference
    is exactly zero its RMS is not differentiable; that level contributes a
    zero (sub)gradient.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shapes differ: {a.shape} vs {b.shape}")
    if levels is None:
        levels = levels_for(*a.shape[-2:])
    za = _levels(a, levels)
    zb = _levels(b, levels)
    n_levels = len(za)

    dist = np.zeros(a.shape[0])
    g_levels = []
    for la, lb in zip(za, zb):
        na, _ = _normalize(la, c)
        nb, sb = _normalize(lb, c)
        diff = na - nb
        npix = diff.shape[-2] * diff.shape[-1]
        r = np.sqrt(np.mean(diff * diff, axis=(-2, -1)))
        dist += r / n_levels

        # d dist / d diff = diff / (npix * r * n_levels); zero where r == 0
        safe_r = np.where(r > 0.0, r, 1.0)
        g_diff = diff * (np.where(r > 0.0, 1.0, 0.0) / (npix * safe_r * n_levels))[:, None, None]
        g_nb = -g_diff
        # nb = lb / sb with sb = c + V|lb|V^T
        g_lb = g_nb / sb
        g_sb = -g_nb * lb / (sb * sb)
        vr, vc = _box_op(lb.shape[-2]), _box_op(lb.shape[-1])
        g_abs = apply_sep(vr.T, vc.T, g_sb)
        g_lb = g_lb + np.sign(lb) * g_abs
        g_levels.append(g_lb)

    grad = pyramid_vjp(g_levels[:-1], g_levels[-1])
    return dist, grad


def nlpd(a: Patch, b: Patch, levels: int | None = None, c: float = DEFAULT_BAND_CONST) -> float:
    """Normalized Laplacian pyramid distance between two patches."""
    if a.pixels.shape != b.pixels.shape:
        raise ShapeError("patch dimensions differ")
    if min(a.height, a.width) < 16:
        raise ShapeError("patches must be at least 16 pixels on a side")
    return float(nlpd_batch(a.pixels[None], b.pixels[None], levels, c)[0])
