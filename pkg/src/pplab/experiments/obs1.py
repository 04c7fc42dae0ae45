"""Constructed-equalizer verification of the sensitivity-probability relation."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..densities import equalizer_for
from ..errors import DegenerateDataError
from ..induced import equalized_jacobian_sensitivity, sensitivity_ratio
from ..nn import make_rng
from ..stats import spearman
from .config import density_from_json
from .plots import render_obs1
from .report import write_csv, write_metadata

DEFAULTS = {
    "density": {"kind": "student_t_2d", "mu": [0, 0], "scale": [0.5, 0.2], "nu": 2},
    "n_points": 2000,
    "delta": 1e-3,
    "gammas": [1.0, 1.0 / 3.0],
    "n_dirs": 16,
    "seed": 0,
}


def run(cfg: dict, out: Path, jobs: int = 1) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    density = density_from_json(cfg["density"])
    rng = make_rng(cfg["seed"])
    pts = density.sample(cfg["n_points"], rng)
    pdf_vals = density.pdf(pts)

    columns = {"x0": pts[:, 0], "x1": pts[:, 1], "pdf": pdf_vals}
    correlations = {}
    plot_det = plot_dir = None
    for gamma in cfg["gammas"]:
        eq = equalizer_for(density, gamma)
        det = equalized_jacobian_sensitivity(eq, pts, cfg["delta"])
        dirs = sensitivity_ratio(
            "equalized", eq, pts, delta=cfg["delta"], n_dirs=cfg["n_dirs"], rng=rng
        )
        tag = f"gamma_{gamma:.4g}".replace(".", "_")
        columns[f"sens_jacobian_{tag}"] = det
        columns[f"sens_directional_{tag}"] = dirs
        try:
            correlations[f"spearman_jacobian_{tag}"] = spearman(det, pdf_vals).rho
            correlations[f"spearman_directional_{tag}"] = spearman(dirs, pdf_vals).rho
        except DegenerateDataError as exc:
            correlations[f"spearman_{tag}"] = None
            correlations[f"diagnostic_{tag}"] = str(exc)
        if plot_det is None:
            plot_det, plot_dir = det, dirs

    header = list(columns.keys())
    rows = zip(*columns.values())
    csv_path = write_csv(out / "obs1.csv", header, rows)
    write_metadata(csv_path, "obs1-equalizer", cfg, extra={"correlations": correlations})
    render_obs1(pdf_vals, plot_det, plot_dir, out / "obs1_equalizer.png")
    return {"correlations": correlations, "columns": columns}
