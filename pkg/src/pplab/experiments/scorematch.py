"""Score magnitude vs inverse probability vs empirical self-distance in 1D."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..compress import TrainConfig, train
from ..densities import Gaussian1D, StudentT1D, Uniform1D
from ..induced import d_self
from .config import density_from_json
from .plots import render_scorematch
from .report import write_csv, write_metadata

DEFAULTS = {
    "density": {"kind": "gaussian", "mu": 0.0, "sigma": 1.0},
    "grid_sigmas": 3.0,
    "grid_points": 201,
    "lam": 200,
    "steps": 20_000,
    "batch": 1024,
    "seed": 0,
    "lr": 0.001,
    "hidden": [50, 50],
    "dtype": "float64",
}


class _Density1DAs2D:
    """Adapter: 1-d density sampling as (n, 1) arrays for the trainer."""

    def __init__(self, base):
        self.base = base

    def sample(self, n, rng):
        return self.base.sample(n, rng)[:, None]

    def log_pdf(self, x):
        return self.base.log_pdf(np.asarray(x)[:, 0])


def _grid(density, sigmas: float, points: int) -> np.ndarray:
    if isinstance(density, (Gaussian1D, StudentT1D)):
        # mirror a half-grid so +-offsets around the mode are exactly tied
        half = np.linspace(0.0, sigmas * density.sigma, (points + 1) // 2)
        return density.mu + np.concatenate([-half[:0:-1], half])
    if isinstance(density, Uniform1D):
        return np.linspace(density.a, density.b, points)
    raise ValueError("scorematch-1d needs a 1-d density")


def run(cfg: dict, out: Path, jobs: int = 1) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    density = density_from_json(cfg["density"])
    xs = _grid(density, cfg["grid_sigmas"], cfg["grid_points"])
    score_mag = np.abs(density.score(xs))
    inv_pdf = 1.0 / density.pdf(xs)

    tc = TrainConfig(
        lam=float(cfg["lam"]),
        data=_Density1DAs2D(density),
        encoder_dims=[1, *cfg["hidden"], 1],
        steps=int(cfg["steps"]),
        batch=int(cfg["batch"]),
        lr=float(cfg["lr"]),
        seed=int(cfg["seed"]),
        dtype=cfg["dtype"],
    )
    model, _ = train(tc)
    with open(out / "model_1d.json", "w") as fh:
        json.dump(model.to_json_dict(), fh)
    ds = d_self(model, xs[:, None])

    csv_path = write_csv(
        out / "scorematch.csv",
        ["x", "score_magnitude", "inv_pdf", "d_self"],
        zip(xs, score_mag, inv_pdf, ds),
    )
    write_metadata(csv_path, "scorematch-1d", cfg)
    render_scorematch(xs, score_mag, inv_pdf, ds, out / "scorematch_1d.png")
    return {"xs": xs, "score_magnitude": score_mag, "inv_pdf": inv_pdf, "d_self": ds}
