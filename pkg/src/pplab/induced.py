"""Distances induced by a trained autoencoder and their local sensitivities.

Three distances are computed from a compression model f = decode o
quantize o encode: the self-reconstruction distance ||x - f(x)||, the
reconstruction distance ||f(x1) - f(x2)||, and the inner distance
||e(x1) - e(x2)|| on the continuous (pre-quantization) latent.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .compress import CompressModel, encode, eval_rate_distortion, reconstruct
from .densities import Equalizer
from .errors import ConfigError, DegenerateDataError
from .stats import spearman

KINDS = ("self_reconstruction", "reconstruction", "inner")


def _points(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[None, :] if x.ndim == 1 else x


def d_self(m: CompressModel, x) -> np.ndarray | float:
    """||x - f(x)|| with hard quantization inside f."""
    pts = _points(x)
    d = np.linalg.norm(pts - reconstruct(m, pts), axis=1)
    return float(d[0]) if np.asarray(x).ndim == 1 else d


def d_recon(m: CompressModel, x1, x2) -> np.ndarray | float:
    """||f(x1) - f(x2)|| with hard quantization inside f."""
    p1, p2 = _points(x1), _points(x2)
    d = np.linalg.norm(reconstruct(m, p1) - reconstruct(m, p2), axis=1)
    return float(d[0]) if np.asarray(x1).ndim == 1 else d


def d_inner(m: CompressModel, x1, x2) -> np.ndarray | float:
    """||e(x1) - e(x2)|| on the continuous latent."""
    p1, p2 = _points(x1), _points(x2)
    d = np.linalg.norm(encode(m, p1) - encode(m, p2), axis=1)
    return float(d[0]) if np.asarray(x1).ndim == 1 else d


def _distance_fn(kind: str, backend):
    if kind == "self_reconstruction":
        # D_s is a one-point distance; its pairwise form is the local variation
        return lambda a, b: np.abs(d_self(backend, b) - d_self(backend, a))
    if kind == "reconstruction":
        return lambda a, b: d_recon(backend, a, b)
    if kind == "inner":
        return lambda a, b: d_inner(backend, a, b)
    if kind == "equalized":
        return lambda a, b: backend.distance(a, b)
    raise ConfigError(f"unknown sensitivity kind {kind!r}")


def sensitivity_ratio(
    kind: str,
    backend,
    x,
    delta: float = 1e-3,
    n_dirs: int = 16,
    rng: np.random.Generator | None = None,
    directions: np.ndarray | None = None,
) -> np.ndarray | float:
    """Mean over unit directions u of D(x, x + delta*u) / delta.

    ``backend`` is a CompressModel for the induced kinds or an Equalizer
    for kind="equalized".  Directions default to ``n_dirs`` random unit
    vectors per point; pass ``directions`` (n_dirs, dim) for a fixed set
    (e.g. axis-aligned probes).
    """
    if delta <= 0:
        raise ConfigError("delta must be positive")
    pts = _points(x)
    n, dim = pts.shape
    if directions is None:
        if rng is None:
            raise ValueError("need an rng when directions are not given")
        dirs = rng.standard_normal((n_dirs, dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    else:
        dirs = np.asarray(directions, dtype=np.float64)
    dist = _distance_fn(kind, backend)
    acc = np.zeros(n)
    for u in dirs:
        acc += np.asarray(dist(pts, pts + delta * u))
    ratios = acc / (len(dirs) * delta)
    return float(ratios[0]) if np.asarray(x).ndim == 1 else ratios


def equalized_jacobian_sensitivity(eq: Equalizer, x, delta: float = 1e-3) -> np.ndarray:
    """Finite-difference Jacobian magnitude of the equalizer response.

    The response is factorized, so the Jacobian determinant is the product
    of per-axis slopes |S_i(x_i + delta) - S_i(x_i)| / delta; for small
    delta this reproduces pdf(x)**gamma, which is the constructed form of
    the perceptual sensitivity-probability relation.
    """
    pts = _points(x)
    n, dim = pts.shape
    base = eq.transform(pts)
    out = np.ones(n)
    for axis in range(dim):
        shifted = pts.copy()
        shifted[:, axis] += delta
        out *= np.abs(eq.transform(shifted)[:, axis] - base[:, axis]) / delta
    return out


# ---------------------------------------------------------------------------
# sweep report
# ---------------------------------------------------------------------------


@dataclass
class SweepRow:
    lam: float
    rate_bpp: float | None
    rho_ds: float | None
    rho_dr_sens: float | None
    rho_din_sens: float | None
    n_points: int
    seed: int
    diagnostic: str = ""


@dataclass
class SweepReport:
    rows: list[SweepRow] = field(default_factory=list)
    delta: float = 1e-3
    n_dirs: int = 16

    CSV_HEADER = ["lambda", "rate_bpp", "rho_Ds", "rho_Dr_sens", "rho_Din_sens", "n_points", "seed"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_HEADER)
        for r in self.rows:
            writer.writerow(
                [
                    repr(float(r.lam)),
                    "" if r.rate_bpp is None else repr(float(r.rate_bpp)),
                    "" if r.rho_ds is None else repr(float(r.rho_ds)),
                    "" if r.rho_dr_sens is None else repr(float(r.rho_dr_sens)),
                    "" if r.rho_din_sens is None else repr(float(r.rho_din_sens)),
                    r.n_points,
                    r.seed,
                ]
            )
        return buf.getvalue()


def _safe_spearman(values: np.ndarray, px: np.ndarray):
    try:
        return spearman(values, px).rho, ""
    except DegenerateDataError as exc:
        return None, str(exc)


def correlation_sweep(
    models: list[CompressModel],
    density,
    test_points: np.ndarray,
    rng: np.random.Generator,
    delta: float = 1e-3,
    n_dirs: int = 16,
) -> SweepReport:
    """Per-model rate and Spearman correlations of the induced distances with pdf.

    ``test_points`` should be sampled from the model's training density;
    the same probe directions are reused across models so correlations are
    comparable.
    """
    pts = np.asarray(test_points, dtype=np.float64)
    if len(pts) < 500:
        raise ConfigError("need at least 500 test points for stable correlations")
    px = density.pdf(pts)
    report = SweepReport(delta=delta, n_dirs=n_dirs)
    dirs = rng.standard_normal((n_dirs, pts.shape[1]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    for m in models:
        bpp, _ = eval_rate_distortion(m, pts, "sse")
        ds = d_self(m, pts)
        dr = sensitivity_ratio("reconstruction", m, pts, delta, directions=dirs)
        din = sensitivity_ratio("inner", m, pts, delta, directions=dirs)
        rho_ds, diag1 = _safe_spearman(ds, px)
        rho_dr, diag2 = _safe_spearman(dr, px)
        rho_din, diag3 = _safe_spearman(din, px)
        report.rows.append(
            SweepRow(
                lam=float(m.meta.get("lambda", float("nan"))),
                rate_bpp=bpp,
                rho_ds=rho_ds,
                rho_dr_sens=rho_dr,
                rho_din_sens=rho_din,
                n_points=len(pts),
                seed=int(m.meta.get("seed", -1)),
                diagnostic="; ".join(s for s in (diag1, diag2, diag3) if s),
            )
        )
    return report
