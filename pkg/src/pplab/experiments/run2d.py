"""Shared training-job plumbing for the 2D experiments.

Jobs are JSON-able payload dicts so sweeps can run in worker processes;
results come back as model/curve dicts.  A diverged run is recorded as an
error entry instead of aborting the sweep.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

from ..compress import CompressModel, SoftCenters, TrainConfig, train, train_no_data
from ..errors import TrainingDiverged
from .config import density_from_json
from .patchdata import UniformPatches


def build_train_config(payload: dict) -> TrainConfig:
    data_spec = payload["data"]
    if data_spec.get("kind") == "uniform_patches":
        h, w = data_spec["height"], data_spec["width"]
        data = UniformPatches(h, w)
    else:
        data = density_from_json(data_spec)
    weight = payload.get("weight_density")
    quant = payload.get("quantizer")
    kwargs = dict(
        lam=float(payload["lam"]),
        data=data,
        encoder_dims=list(payload.get("encoder_dims", [2, 100, 100, 2])),
        loss_variant=payload.get("loss_variant", "plain"),
        distortion=payload.get("distortion", "sse"),
        steps=int(payload["steps"]),
        batch=int(payload["batch"]),
        lr=float(payload.get("lr", 0.001)),
        seed=int(payload["seed"]),
        weight_density=density_from_json(weight) if weight else None,
        dtype=payload.get("dtype", "float32"),
        checkpoint_every=int(payload.get("checkpoint_every", 1000)),
    )
    if payload.get("patch_shape"):
        kwargs["patch_shape"] = tuple(payload["patch_shape"])
    if quant:
        kwargs["quantizer"] = SoftCenters(tuple(quant["centers"]), float(quant.get("s", 1.0)))
    return TrainConfig(**kwargs)


def train_job(payload: dict) -> dict:
    """Top-level worker: train one model, return JSON-able result."""
    cfg = build_train_config(payload)
    try:
        if cfg.loss_variant == "no_data_weighted":
            model, curve = train_no_data(cfg)
        else:
            model, curve = train(cfg)
    except TrainingDiverged as exc:
        return {"error": {"step": exc.step, "message": str(exc)}, "payload": payload}
    return {
        "model": model.to_json_dict(),
        "curve": {
            "steps": curve.steps,
            "rate_bpp": curve.rate_bpp,
            "distortion": curve.distortion,
            "loss": curve.loss,
        },
        "payload": payload,
    }


def run_jobs(payloads: list[dict], jobs: int = 1) -> list[dict]:
    """Run training jobs, preserving payload order in the results."""
    if jobs <= 1 or len(payloads) <= 1:
        return [train_job(p) for p in payloads]
    # one BLAS thread per worker; the sweep parallelism replaces it
    os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
    os.environ.setdefault("OMP_NUM_THREADS", "1")
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(train_job, payloads))


def model_from_result(result: dict) -> CompressModel | None:
    if "error" in result:
        return None
    return CompressModel.from_json_dict(result["model"])
