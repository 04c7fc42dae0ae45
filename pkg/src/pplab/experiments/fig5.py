"""Relative performance of probability-weighted vs plain models along a probe line."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..compress import decode, encode, hard_quantize
from ..entropy import rate_bits
from ..stats import polyfit_smooth
from .config import density_from_json
from .plots import render_relperf
from .report import write_csv, write_metadata
from .run2d import model_from_result, run_jobs

DEFAULTS = {
    "lambdas": [16, 64, 256, 1024],
    "steps": 100_000,
    "batch": 4096,
    "seed": 0,
    "lr": 0.001,
    "density": {"kind": "student_t_2d", "mu": [0, 0], "scale": [0.5, 0.2], "nu": 2},
    "probe_max": 35.0,
    "probe_points": 200,
    "smooth_degree": 20,
    "dtype": "float32",
}


def probe_performance(model, xs: np.ndarray) -> np.ndarray:
    """Per-point performance D/R along the probe line (x, 0)."""
    pts = np.stack([xs, np.zeros_like(xs)], axis=1)
    y = encode(model, pts)
    yq = hard_quantize(model.quantizer, y)
    xhat = decode(model, yq)
    dist = ((pts - xhat) ** 2).sum(axis=1)
    bpp = rate_bits(model.entropy, yq) / model.signal_dim
    if np.any(bpp <= 0):
        raise ValueError("zero rate on probe points; model entropy is degenerate")
    return dist / bpp


def run(cfg: dict, out: Path, jobs: int = 1) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)

    payloads = []
    for lam in cfg["lambdas"]:
        for variant in ("plain", "prob_weighted"):
            payloads.append(
                {
                    "lam": lam,
                    "data": cfg["density"],
                    "loss_variant": variant,
                    "steps": cfg["steps"],
                    "batch": cfg["batch"],
                    "seed": cfg["seed"],
                    "lr": cfg["lr"],
                    "dtype": cfg["dtype"],
                }
            )
    results = run_jobs(payloads, jobs)

    xs = np.linspace(0.0, cfg["probe_max"], cfg["probe_points"])
    rows = []
    per_lambda_smooth = []
    smooth_sum = np.zeros_like(xs)
    n_ok = 0
    failures = []
    for i, lam in enumerate(cfg["lambdas"]):
        res_plain, res_weighted = results[2 * i], results[2 * i + 1]
        if "error" in res_plain or "error" in res_weighted:
            for res in (res_plain, res_weighted):
                if "error" in res:
                    failures.append({"lambda": lam, **res["error"]})
            continue
        m_plain = model_from_result(res_plain)
        m_weighted = model_from_result(res_weighted)
        with open(out / f"model_{i:02d}_plain.json", "w") as fh:
            json.dump(res_plain["model"], fh)
        with open(out / f"model_{i:02d}_weighted.json", "w") as fh:
            json.dump(res_weighted["model"], fh)
        p_plain = probe_performance(m_plain, xs)
        p_weighted = probe_performance(m_weighted, xs)
        ratio = p_weighted / p_plain
        smooth = polyfit_smooth(xs, ratio, cfg["smooth_degree"])(xs)
        per_lambda_smooth.append((lam, smooth))
        smooth_sum += smooth
        n_ok += 1
        rows.extend(
            (lam, x, r, s) for x, r, s in zip(xs, ratio, smooth)
        )

    mean_smooth = smooth_sum / max(n_ok, 1)
    csv_path = write_csv(out / "relperf.csv", ["lambda", "x", "ratio_raw", "ratio_smooth"], rows)
    write_metadata(csv_path, "fig5-relperf", cfg, extra={"failures": failures})
    mean_path = write_csv(out / "relperf_mean.csv", ["x", "mean_ratio_smooth"], zip(xs, mean_smooth))
    write_metadata(mean_path, "fig5-relperf", cfg, extra={"n_lambdas": n_ok})
    render_relperf(xs, per_lambda_smooth, mean_smooth, out / "fig5_relperf.png")
    return {"xs": xs, "mean_smooth": mean_smooth, "per_lambda": per_lambda_smooth, "failures": failures}
