"""Rate sweep measuring correlations between induced distances and pdf."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..induced import correlation_sweep
from ..nn import make_rng
from .config import density_to_json, density_from_json
from .plots import render_sweep
from .report import write_csv, write_metadata
from .run2d import model_from_result, run_jobs

DEFAULTS = {
    "lambdas": [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096],
    "steps": 100_000,
    "batch": 4096,
    "seed": 0,
    "lr": 0.001,
    "density": {"kind": "student_t_2d", "mu": [0, 0], "scale": [0.5, 0.2], "nu": 2},
    "n_points": 2000,
    "delta": 1e-3,
    "n_dirs": 16,
    "dtype": "float32",
}


def run(cfg: dict, out: Path, jobs: int = 1) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    density = density_from_json(cfg["density"])

    payloads = [
        {
            "lam": lam,
            "data": cfg["density"],
            "steps": cfg["steps"],
            "batch": cfg["batch"],
            "seed": cfg["seed"],
            "lr": cfg["lr"],
            "dtype": cfg["dtype"],
        }
        for lam in cfg["lambdas"]
    ]
    results = run_jobs(payloads, jobs)

    models = []
    failures = []
    for i, res in enumerate(results):
        if "error" in res:
            failures.append({"lambda": cfg["lambdas"][i], **res["error"]})
            continue
        model = model_from_result(res)
        models.append(model)
        with open(out / f"model_{i:02d}.json", "w") as fh:
            json.dump(res["model"], fh)
        write_csv(
            out / f"curve_{i:02d}.csv",
            ["step", "rate_bpp", "distortion"],
            zip(res["curve"]["steps"], res["curve"]["rate_bpp"], res["curve"]["distortion"]),
        )

    eval_rng = make_rng(cfg["seed"] + 1_000_003)
    test_points = density.sample(cfg["n_points"], eval_rng)
    report = correlation_sweep(
        models, density, test_points, eval_rng, delta=cfg["delta"], n_dirs=cfg["n_dirs"]
    )
    csv_path = out / "sweep.csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write(report.to_csv())
    write_metadata(
        csv_path,
        "fig3-sweep",
        cfg,
        extra={
            "failures": failures,
            "diagnostics": [r.diagnostic for r in report.rows if r.diagnostic],
        },
    )
    render_sweep(report.rows, out / "fig3_sweep.png")
    return {"report": report, "failures": failures}
