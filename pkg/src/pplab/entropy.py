"""Trainable factorized density over noisy latents, for the rate term.

Each latent dimension gets a piecewise-linear CDF on a fixed uniform knot
grid over [-K, K].  Knot increments come from a softmax over unconstrained
logits, so the CDF is monotone with CDF(-K)=0 and CDF(K)=1 for any logit
values.  The probability mass of a unit-width interval around y supplies
-log2 p and its exact gradients with respect to both y and the logits.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

MASS_FLOOR = 1e-9
LN2 = float(np.log(2.0))


@dataclass
class FactorizedDensity:
    """Per-dimension piecewise-linear CDF with softmax-parameterized increments.

    ``logits`` has shape (ndim, nbins); the grid has nbins+1 knots spanning
    [-halfwidth, halfwidth].
    """

    logits: np.ndarray
    halfwidth: float = 30.0

    @classmethod
    def uniform(cls, ndim: int, halfwidth: float = 30.0, nbins: int = 120) -> "FactorizedDensity":
        return cls(np.zeros((ndim, nbins), dtype=np.float64), halfwidth)

    @property
    def ndim(self) -> int:
        return self.logits.shape[0]

    @property
    def nbins(self) -> int:
        return self.logits.shape[1]

    @property
    def bin_width(self) -> float:
        return 2.0 * self.halfwidth / self.nbins

    def bin_probs(self) -> np.ndarray:
        z = self.logits - self.logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def copy(self) -> "FactorizedDensity":
        return FactorizedDensity(self.logits.copy(), self.halfwidth)

    def to_json_dict(self) -> dict:
        return {
            "knots_halfwidth": self.halfwidth,
            "logits": self.logits.astype(np.float64).tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FactorizedDensity":
        return cls(np.asarray(d["logits"], dtype=np.float64), float(d["knots_halfwidth"]))

    # -- CDF machinery ------------------------------------------------------

    def _locate(self, t: np.ndarray):
        """Clip query points to [-K, K] and return (bin index, fraction)."""
        k = self.halfwidth
        tc = np.clip(t, -k, k)
        u = (tc + k) / self.bin_width
        j = np.minimum(u.astype(np.int64), self.nbins - 1)
        return j, u - j

    def cdf(self, t: np.ndarray) -> np.ndarray:
        """Piecewise-linear CDF per dimension; t has shape (..., ndim)."""
        t = np.asarray(t, dtype=np.float64)
        probs = self.bin_probs()
        cum = np.concatenate([np.zeros((self.ndim, 1)), np.cumsum(probs, axis=1)], axis=1)
        j, frac = self._locate(t)
        dims = np.arange(self.ndim)
        return cum[dims, j] + frac * probs[dims, j]

    def mass(self, y: np.ndarray) -> np.ndarray:
        """Box-convolved probability CDF(y+1/2) - CDF(y-1/2), floored."""
        return np.maximum(self.cdf(y + 0.5) - self.cdf(y - 0.5), MASS_FLOOR)


def _check_latents(m: FactorizedDensity, y: np.ndarray):
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1
    yb = y[None, :] if single else y
    if yb.ndim != 2 or yb.shape[1] != m.ndim:
        raise ShapeError(f"latents of shape {y.shape} do not match {m.ndim} dimensions")
    return yb, single


def rate_bits(m: FactorizedDensity, y_noisy: np.ndarray) -> np.ndarray | float:
    """-log2 of the unit-interval mass, summed over latent dimensions.

    Accepts an (ndim,) vector or a (batch, ndim) array; clips components
    outside (-K, K) with a warning.
    """
    yb, single = _check_latents(m, y_noisy)
    if np.any(np.abs(yb) >= m.halfwidth):
        warnings.warn("latent components outside (-K, K) were clamped", RuntimeWarning)
    bits = -np.log2(m.mass(yb)).sum(axis=1)
    return float(bits[0]) if single else bits


def rate_grad(m: FactorizedDensity, y_noisy: np.ndarray, weights: np.ndarray | None = None):
    """Exact gradients of the (optionally per-sample weighted) total rate.

    Returns ``(grad_logits, grad_y)`` for ``sum_s w_s * bits_s``:
    grad_logits has the logits' shape, grad_y matches ``y_noisy`` and holds
    ``w_s * d bits_s / d y_s``.
    """
    yb, single = _check_latents(m, y_noisy)
    n, ndim = yb.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    probs = m.bin_probs()
    cum = np.concatenate([np.zeros((ndim, 1)), np.cumsum(probs, axis=1)], axis=1)

    t1 = yb - 0.5
    t2 = yb + 0.5
    j1, f1 = m._locate(t1)
    j2, f2 = m._locate(t2)
    dims = np.arange(ndim)
    cdf1 = cum[dims, j1] + f1 * probs[dims, j1]
    cdf2 = cum[dims, j2] + f2 * probs[dims, j2]
    raw_mass = cdf2 - cdf1
    floored = raw_mass < MASS_FLOOR
    mass = np.maximum(raw_mass, MASS_FLOOR)

    # d bits / d mass, zero where the floor clamp is active
    dbits = np.where(floored, 0.0, -1.0 / (mass * LN2)) * w[:, None]

    # gradient w.r.t. y: linear CDF slope is probs/bin_width, zero at the clip
    k, hbin = m.halfwidth, m.bin_width
    slope2 = np.where(np.abs(t2) < k, probs[dims, j2] / hbin, 0.0)
    slope1 = np.where(np.abs(t1) < k, probs[dims, j1] / hbin, 0.0)
    grad_y = dbits * (slope2 - slope1)

    # gradient w.r.t. bin probabilities, then back through the softmax
    grad_probs = np.zeros_like(probs)
    for d in range(ndim):
        coeff = dbits[:, d]
        diff = np.zeros(m.nbins + 1)
        np.add.at(diff, j1[:, d], coeff)
        np.add.at(diff, j2[:, d], -coeff)
        g = np.cumsum(diff[:-1])  # sum of coeff over samples with j1 <= b < j2
        np.add.at(g, j2[:, d], coeff * f2[:, d])
        np.add.at(g, j1[:, d], -coeff * f1[:, d])
        grad_probs[d] = g
    inner = (grad_probs * probs).sum(axis=1, keepdims=True)
    grad_logits = probs * (grad_probs - inner)

    return grad_logits, (grad_y[0] if single else grad_y)
