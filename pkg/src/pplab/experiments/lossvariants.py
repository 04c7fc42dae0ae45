"""Quantization-geometry export for the three probability-weighted loss variants."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..compress import CompressModel, decode, encode, round_half_away
from .plots import render_geometry
from .report import write_csv, write_metadata
from .run2d import model_from_result, run_jobs

DEFAULTS = {
    "lambda_by_variant": {"plain": 64, "prob_weighted": 64, "inv_prob_weighted": 64},
    "steps": 100_000,
    "batch": 4096,
    "seed": 0,
    "lr": 0.001,
    "density": {"kind": "student_t_2d", "mu": [0, 0], "scale": [0.5, 0.2], "nu": 2},
    "grid_extent": 40.0,
    "grid_size": 400,
    "dtype": "float32",
}

VARIANT_LABELS = {"plain": "L1", "prob_weighted": "L2", "inv_prob_weighted": "L3"}


def export_geometry(model: CompressModel, extent: float, grid_size: int) -> list[tuple]:
    """Occupied integer latent cells over a probe grid, with code vectors.

    Returns rows (cell_i, cell_j, code_x, code_y, count): every grid point
    maps to exactly one cell; each cell decodes to one code vector.
    """
    axis = np.linspace(-extent, extent, grid_size)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    cells = round_half_away(encode(model, pts)).astype(np.int64)
    uniq, counts = np.unique(cells, axis=0, return_counts=True)
    codes = decode(model, uniq.astype(np.float64))
    order = np.lexsort((uniq[:, 1], uniq[:, 0]))
    return [
        (int(uniq[k, 0]), int(uniq[k, 1]), float(codes[k, 0]), float(codes[k, 1]), int(counts[k]))
        for k in order
    ]


def run(cfg: dict, out: Path, jobs: int = 1) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    variants = list(cfg["lambda_by_variant"].keys())
    payloads = [
        {
            "lam": cfg["lambda_by_variant"][variant],
            "data": cfg["density"],
            "loss_variant": variant,
            "steps": cfg["steps"],
            "batch": cfg["batch"],
            "seed": cfg["seed"],
            "lr": cfg["lr"],
            "dtype": cfg["dtype"],
        }
        for variant in variants
    ]
    results = run_jobs(payloads, jobs)

    exports = {}
    failures = []
    named = []
    for variant, res in zip(variants, results):
        if "error" in res:
            failures.append({"variant": variant, **res["error"]})
            continue
        model = model_from_result(res)
        with open(out / f"model_{VARIANT_LABELS[variant]}.json", "w") as fh:
            json.dump(res["model"], fh)
        rows = export_geometry(model, cfg["grid_extent"], cfg["grid_size"])
        exports[variant] = rows
        csv_path = write_csv(
            out / f"geometry_{VARIANT_LABELS[variant]}.csv",
            ["cell_i", "cell_j", "code_x", "code_y", "count"],
            rows,
        )
        write_metadata(csv_path, "lossvariants-2d", cfg, extra={"variant": variant})
        named.append((VARIANT_LABELS[variant], rows))
    if named:
        render_geometry(named, out / "lossvariants_geometry.png")
    return {"exports": exports, "failures": failures}
