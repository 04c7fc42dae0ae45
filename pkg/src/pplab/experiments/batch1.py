"""Batch-size-1 training: NLPD vs MSE generalization-error ratio over steps.

Two dimensionality-reduction autoencoders (no quantizer) start from the
same initialization and see the same patch order; one minimizes NLPD, the
other MSE.  After every step both are evaluated on the held-out test set
in MSE, and the NLPD/MSE ratio is reported per seed with mean/std.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..nn import AdamState, adam_step, backward_pass, forward_pass, init_mlp, mlp_forward
from ..perceptual.nlpd import nlpd_batch_with_grad
from .patchdata import OrderedCorpusSampler, load_corpus, order_hash, split_corpus
from .plots import render_ratio_curve
from .report import write_csv, write_metadata

DEFAULTS = {
    "corpus": None,
    "patch_size": 16,
    "latent_dim": 16,
    "hidden": [128],
    "steps": 300,
    "seeds": [0, 1, 2, 3, 4],
    "lr": 0.0005,
    "test_every": 4,
}


def _train_batch1(patches, order_sampler, loss_kind, test_flat, steps, dims, seed, lr, patch_shape):
    """Single batch-1 run; returns per-step test MSE."""
    rng = np.random.Generator(np.random.PCG64(seed))
    enc = init_mlp(dims, rng)
    dec = init_mlp(list(reversed(dims)), rng)
    st_enc = AdamState.for_params(enc, lr)
    st_dec = AdamState.for_params(dec, lr)
    h, w = patch_shape
    test_mse = np.empty(steps)
    for step in range(steps):
        x = order_sampler.patches[order_sampler.order[step]].reshape(1, -1)
        y, enc_cache = forward_pass(enc, x)
        xhat, dec_cache = forward_pass(dec, y)
        if loss_kind == "mse":
            g_xhat = 2.0 * (xhat - x) / x.shape[1]
        else:
            _, grad = nlpd_batch_with_grad(x.reshape(1, h, w), xhat.reshape(1, h, w))
            g_xhat = grad.reshape(1, -1)
        dec_grads, g_y = backward_pass(dec, dec_cache, g_xhat)
        enc_grads, _ = backward_pass(enc, enc_cache, g_y)
        enc, st_enc = adam_step(enc, enc_grads, st_enc)
        dec, st_dec = adam_step(dec, dec_grads, st_dec)
        recon = mlp_forward(dec, mlp_forward(enc, test_flat))
        test_mse[step] = float(((recon - test_flat) ** 2).mean())
    return test_mse


def run(cfg: dict, out: Path, jobs: int = 1) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if not cfg.get("corpus"):
        raise ConfigError("batch1-ratio needs a corpus directory of PGM images")
    size = cfg["patch_size"]
    patches = load_corpus(cfg["corpus"], size=size)
    train_patches, test_patches = split_corpus(patches, cfg["test_every"])
    test_flat = test_patches.reshape(len(test_patches), -1)
    dims = [size * size, *cfg["hidden"], cfg["latent_dim"]]

    steps = cfg["steps"]
    ratios = []
    hashes = []
    for seed in cfg["seeds"]:
        sampler = OrderedCorpusSampler.for_seed(train_patches, steps, 1, seed)
        h = order_hash(sampler.order[:steps])
        mse_nlpd = _train_batch1(
            patches, sampler, "nlpd", test_flat, steps, dims, seed, cfg["lr"], (size, size)
        )
        sampler2 = OrderedCorpusSampler.for_seed(train_patches, steps, 1, seed)
        h2 = order_hash(sampler2.order[:steps])
        mse_mse = _train_batch1(
            patches, sampler2, "mse", test_flat, steps, dims, seed, cfg["lr"], (size, size)
        )
        assert h == h2, "paired runs must see the identical sample order"
        hashes.append({"seed": seed, "order_hash_nlpd": h, "order_hash_mse": h2})
        ratios.append(mse_nlpd / mse_mse)

    ratios = np.stack(ratios, axis=0)  # (n_seeds, steps)
    mean = ratios.mean(axis=0)
    std = ratios.std(axis=0)
    header = ["step"] + [f"ratio_seed{s}" for s in cfg["seeds"]] + ["mean", "std"]
    rows = [
        (t + 1, *[ratios[i, t] for i in range(len(cfg["seeds"]))], mean[t], std[t])
        for t in range(steps)
    ]
    csv_path = write_csv(out / "ratio.csv", header, rows)
    write_metadata(csv_path, "batch1-ratio", cfg, extra={"sample_order_hashes": hashes})
    render_ratio_curve(np.arange(1, steps + 1), mean, std, out / "batch1_ratio.png")
    return {"ratios": ratios, "mean": mean, "std": std, "hashes": hashes}
