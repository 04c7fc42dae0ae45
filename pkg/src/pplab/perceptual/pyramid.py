"""Laplacian pyramid built from small dense per-axis operators.

Patches are small, so every linear step (binomial blur with reflect
padding, factor-2 decimation, zero-insertion upsampling) is represented as
an explicit matrix applied to rows and columns.  That keeps the code short
and makes adjoints exact: the gradient of any pyramid output w.r.t. the
input is just the transposed matrix chain.

All array-level functions are batched over a leading axis: (batch, h, w).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import ShapeError

BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _reflect_index(i: int, n: int) -> int:
    if n == 1:
        return 0
    period = 2 * n - 2
    m = i % period
    return min(m, period - m)


def conv_matrix(kernel: np.ndarray, n: int) -> np.ndarray:
    """Dense matrix of a same-size 1-d convolution with reflect padding."""
    r = len(kernel) // 2
    mat = np.zeros((n, n))
    for a in range(n):
        for k, coeff in enumerate(kernel):
            mat[a, _reflect_index(a + k - r, n)] += coeff
    return mat


@lru_cache(maxsize=None)
def _axis_ops(n: int):
    """(blur, down, up) matrices for one axis of size n (n even)."""
    blur = conv_matrix(BINOMIAL5, n)
    down = blur[::2, :].copy()
    zins = np.zeros((n, n // 2))
    zins[2 * np.arange(n // 2), np.arange(n // 2)] = 1.0
    up = (2.0 * blur) @ zins
    return blur, down, up


def apply_sep(rows_op: np.ndarray, cols_op: np.ndarray, x: np.ndarray) -> np.ndarray:
    """rows_op @ x @ cols_op.T for a batched (b, h, w) array."""
    return rows_op @ x @ cols_op.T


def levels_for(height: int, width: int) -> int:
    """Default band count: 3 for 16-pixel patches, 5 from 64 up."""
    side = min(height, width)
    if side < 4:
        raise ShapeError("patch too small for a pyramid")
    return min(5, int(np.log2(side)) - 1)


@dataclass
class LaplacianPyramid:
    """Band-pass levels (fine to coarse) plus the final low-pass residual."""

    bands: list[np.ndarray]
    residual: np.ndarray

    @property
    def n_levels(self) -> int:
        return len(self.bands)


def _check_size(h: int, w: int, levels: int):
    if h % (1 << levels) or w % (1 << levels):
        raise ShapeError(
            f"dimensions {h}x{w} must be divisible by 2^{levels} for {levels} levels"
        )


def build_pyramid(x: np.ndarray, levels: int | None = None) -> LaplacianPyramid:
    """Decompose (h, w) or (batch, h, w) into difference-of-blur bands."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    xb = x[None] if single else x
    h, w = xb.shape[1:]
    if levels is None:
        levels = levels_for(h, w)
    _check_size(h, w, levels)
    bands = []
    current = xb
    for _ in range(levels):
        hh, ww = current.shape[1:]
        _, dh, uh = _axis_ops(hh)
        _, dw, uw = _axis_ops(ww)
        low = apply_sep(dh, dw, current)
        bands.append(current - apply_sep(uh, uw, low))
        current = low
    if single:
        return LaplacianPyramid([b[0] for b in bands], current[0])
    return LaplacianPyramid(bands, current)


def collapse_pyramid(pyr: LaplacianPyramid) -> np.ndarray:
    """Exact inverse of build_pyramid."""
    current = pyr.residual
    for band in reversed(pyr.bands):
        hh, ww = band.shape[-2:]
        _, _, uh = _axis_ops(hh)
        _, _, uw = _axis_ops(ww)
        current = band + apply_sep(uh, uw, current)
    return current


def pyramid_vjp(g_bands: list[np.ndarray], g_residual: np.ndarray) -> np.ndarray:
    """Gradient of the (linear) pyramid map, contracted with band cotangents.

    Inputs are batched (batch, h, w) arrays matching build_pyramid's output
    shapes for a batched input.
    """
    grad = g_residual
    for g_band in reversed(g_bands):
        hh, ww = g_band.shape[-2:]
        _, dh, uh = _axis_ops(hh)
        _, dw, uw = _axis_ops(ww)
        # adjoint of: low = D x; band = x - U low; next = low
        g_low = grad - apply_sep(uh.T, uw.T, g_band)
        grad = g_band + apply_sep(dh.T, dw.T, g_low)
    return grad
