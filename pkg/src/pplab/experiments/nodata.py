"""Training-without-data experiments.

2D: rate-distortion training on uniform-box samples with the whole loss
weighted by the Student-t likelihood, against an unweighted uniform
baseline; exports quantization geometry for both.

Patch: entropy-limited (soft-center) models trained purely on uniform
noise under MSE / NLPD / MS-SSIM losses, evaluated on a held-out corpus of
natural patches at each entropy bound.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..compress import CompressModel, decode, encode, hard_quantize
from ..errors import ConfigError
from ..perceptual.msssim import msssim_batch
from ..perceptual.nlpd import nlpd_batch
from .lossvariants import export_geometry
from .patchdata import load_corpus
from .plots import render_geometry, render_patch_table
from .report import write_csv, write_metadata
from .run2d import model_from_result, run_jobs

DEFAULTS_2D = {
    "lam": 64,
    "steps": 100_000,
    "batch": 4096,
    "seed": 0,
    "lr": 0.001,
    "box": {"kind": "uniform_box_2d", "lo": [-40, -40], "hi": [40, 40]},
    "weight_density": {"kind": "student_t_2d", "mu": [0, 0], "scale": [0.5, 0.2], "nu": 2},
    "grid_extent": 40.0,
    "grid_size": 400,
    "dtype": "float32",
}

DEFAULTS_PATCH = {
    "corpus": None,
    "patch_size": 16,
    "latent_dim": 64,
    "hidden": [256, 256],
    "center_sets": [[-1, 1], [-2, -1, 0, 1, 2]],
    "losses": ["mse", "nlpd", "msssim"],
    "steps": 15_000,
    "batch": 32,
    "seed": 0,
    "lr": 0.001,
    "max_eval_patches": 600,
    "dtype": "float64",
}


def run_2d(cfg: dict, out: Path, jobs: int = 1) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    common = {
        "lam": cfg["lam"],
        "data": cfg["box"],
        "steps": cfg["steps"],
        "batch": cfg["batch"],
        "seed": cfg["seed"],
        "lr": cfg["lr"],
        "dtype": cfg["dtype"],
    }
    payloads = [
        {**common, "loss_variant": "no_data_weighted", "weight_density": cfg["weight_density"]},
        {**common, "loss_variant": "plain"},
    ]
    results = run_jobs(payloads, jobs)
    names = ["weighted", "uniform"]
    exports = {}
    for name, res in zip(names, results):
        if "error" in res:
            raise RuntimeError(f"nodata-2d {name} run diverged: {res['error']}")
        model = model_from_result(res)
        with open(out / f"model_{name}.json", "w") as fh:
            json.dump(res["model"], fh)
        rows = export_geometry(model, cfg["grid_extent"], cfg["grid_size"])
        exports[name] = rows
        csv_path = write_csv(
            out / f"geometry_{name}.csv",
            ["cell_i", "cell_j", "code_x", "code_y", "count"],
            rows,
        )
        write_metadata(csv_path, "nodata-2d", cfg, extra={"run": name})
    render_geometry(list(exports.items()), out / "nodata_2d_geometry.png")
    return {"exports": exports}


def _eval_metrics(model: CompressModel, patches: np.ndarray) -> dict:
    """PSNR / MS-SSIM / NLPD of clamped reconstructions over (n, h, w) patches."""
    n, h, w = patches.shape
    flat = patches.reshape(n, -1)
    recon = decode(model, hard_quantize(model.quantizer, encode(model, flat)))
    recon = np.clip(recon, 0.0, 1.0).reshape(n, h, w)
    mse = ((patches - recon) ** 2).mean(axis=(1, 2))
    mse = np.maximum(mse, 1e-12)
    psnr = float(np.mean(10.0 * np.log10(1.0 / mse)))
    return {
        "psnr": psnr,
        "msssim": float(np.mean(msssim_batch(patches, recon))),
        "nlpd": float(np.mean(nlpd_batch(patches, recon))),
    }


def run_patch(cfg: dict, out: Path, jobs: int = 1) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if not cfg.get("corpus"):
        raise ConfigError("nodata-patch needs a corpus directory of PGM images")
    size = cfg["patch_size"]
    eval_patches = load_corpus(cfg["corpus"], size=size)[: cfg["max_eval_patches"]]

    signal_dim = size * size
    payloads = []
    combos = []
    for centers in cfg["center_sets"]:
        for loss in cfg["losses"]:
            combos.append((centers, loss))
            payloads.append(
                {
                    "lam": 1.0,  # entropy-limited: distortion-only objective
                    "data": {"kind": "uniform_patches", "height": size, "width": size},
                    "encoder_dims": [signal_dim, *cfg["hidden"], cfg["latent_dim"]],
                    "loss_variant": "plain",
                    "distortion": loss,
                    "patch_shape": [size, size],
                    "quantizer": {"centers": centers, "s": 1.0},
                    "steps": cfg["steps"],
                    "batch": cfg["batch"],
                    "seed": cfg["seed"],
                    "lr": cfg["lr"],
                    "dtype": cfg["dtype"],
                }
            )
    results = run_jobs(payloads, jobs)

    rows = []
    for (centers, loss), res in zip(combos, results):
        if "error" in res:
            raise RuntimeError(f"nodata-patch run ({centers}, {loss}) diverged: {res['error']}")
        model = model_from_result(res)
        bound_bpp = cfg["latent_dim"] * math.log2(len(centers)) / signal_dim
        with open(out / f"model_{len(centers)}centers_{loss}.json", "w") as fh:
            json.dump(res["model"], fh)
        metrics = _eval_metrics(model, eval_patches)
        rows.append((bound_bpp, loss, metrics["psnr"], metrics["msssim"], metrics["nlpd"]))

    csv_path = write_csv(out / "table.csv", ["bpp_bound", "loss", "psnr", "msssim", "nlpd"], rows)
    write_metadata(csv_path, "nodata-patch", cfg, extra={"n_eval_patches": int(len(eval_patches))})
    render_patch_table(rows, out / "nodata_patch.png")
    return {"rows": rows}
