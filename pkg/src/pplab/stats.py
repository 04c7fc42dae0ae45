"""Rank correlation, polynomial smoothing, and performance-ratio arithmetic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.stats import rankdata

from .errors import ConfigError, DegenerateDataError


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    n: int
    tie_count: int


def spearman(xs, ys) -> CorrelationResult:
    """Spearman rank correlation: Pearson correlation of average ranks.

    Ties receive the mean of the ranks they span.  ``tie_count`` is the
    number of surplus duplicates across both inputs.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or len(x) != len(y):
        raise ValueError("inputs must be equal-length 1-d sequences")
    if len(x) < 3:
        raise ValueError("need at least 3 samples")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateDataError("correlation undefined for constant input")
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    rho = float(np.corrcoef(rx, ry)[0, 1])
    ties = (len(x) - len(np.unique(x))) + (len(y) - len(np.unique(y)))
    return CorrelationResult(rho, len(x), ties)


def polyfit_smooth(xs, ys, degree: int = 20):
    """Least-squares Chebyshev fit of the given degree; returns an evaluator.

    The basis is built on the data's own domain, which keeps the normal
    equations well conditioned at high degree.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if len(x) < degree + 1:
        raise ConfigError(f"need at least degree+1={degree + 1} points, got {len(x)}")
    if np.ptp(x) == 0:
        raise ConfigError("x values must span a nonzero range")
    return Chebyshev.fit(x, y, degree)


def relative_performance(p_num: tuple[float, float], p_den: tuple[float, float]) -> float:
    """Ratio of distortion-per-rate performances (D1/R1) / (D2/R2)."""
    d1, r1 = p_num
    d2, r2 = p_den
    if r1 <= 0 or r2 <= 0:
        raise ValueError("rates must be positive")
    if d2 == 0:
        raise ValueError("denominator performance is zero")
    return (d1 / r1) / (d2 / r2)


def std_error_mean(sigma2: float, m: int) -> float:
    """Standard error of a batch-mean gradient estimate: sqrt(sigma2 / m)."""
    if sigma2 < 0:
        raise ValueError("variance must be non-negative")
    if m < 1:
        raise ValueError("batch size must be >= 1")
    return float(np.sqrt(sigma2) / np.sqrt(m))
