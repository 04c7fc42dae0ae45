"""Figure rendering for experiment outputs (PNG next to each CSV)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _save(fig, out_path):
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def render_sweep(rows, out_path) -> None:
    """Correlation-vs-rate curves for the three induced distances."""
    rows = [r for r in rows if r.rate_bpp is not None]
    rows = sorted(rows, key=lambda r: r.rate_bpp)
    bpp = [r.rate_bpp for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for attr, label, marker in (
        ("rho_ds", r"$\rho(D_s, p)$", "o"),
        ("rho_dr_sens", r"$\rho(D_r/\mathrm{RMSE}, p)$", "s"),
        ("rho_din_sens", r"$\rho(D_{in}/\mathrm{RMSE}, p)$", "^"),
    ):
        vals = [getattr(r, attr) for r in rows]
        ax.plot(bpp, vals, marker=marker, label=label)
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.set_xlabel("rate (bpp)")
    ax.set_ylabel("Spearman correlation")
    ax.legend(fontsize=8)
    _save(fig, out_path)


def render_relperf(xs, per_lambda_smooth, mean_smooth, out_path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for lam, ys in per_lambda_smooth:
        ax.plot(xs, ys, lw=0.8, alpha=0.6, label=f"$\\lambda$={lam:g}")
    ax.plot(xs, mean_smooth, "k", lw=2, label="mean")
    ax.axhline(1.0, color="gray", lw=0.5, ls="--")
    ax.set_xlabel("probe position x")
    ax.set_ylabel("relative performance")
    ax.legend(fontsize=7)
    _save(fig, out_path)


def render_geometry(named_exports, out_path) -> None:
    """Scatter of decoded code vectors for one or more models."""
    fig, axes = plt.subplots(1, len(named_exports), figsize=(4 * len(named_exports), 4), squeeze=False)
    for ax, (name, cells) in zip(axes[0], named_exports):
        if len(cells):
            xs = [c[2] for c in cells]
            ys = [c[3] for c in cells]
            ns = np.array([c[4] for c in cells], dtype=float)
            ax.scatter(xs, ys, s=4 + 40 * ns / ns.max(), alpha=0.7)
        ax.set_title(name, fontsize=9)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    _save(fig, out_path)


def render_ratio_curve(steps, mean, std, out_path, ylabel="MSE ratio (NLPD / MSE)") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    mean = np.asarray(mean)
    std = np.asarray(std)
    ax.plot(steps, mean, "b", lw=1.5, label="mean over seeds")
    ax.fill_between(steps, mean - std, mean + std, alpha=0.3)
    ax.axhline(1.0, color="k", ls="--", lw=1)
    ax.set_xlabel("training step")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    _save(fig, out_path)


def render_scorematch(xs, score_mag, inv_pdf, d_self_vals, out_path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, score_mag / np.max(score_mag), label="|score| (scaled)")
    ax.plot(xs, inv_pdf / np.max(inv_pdf), label="1/pdf (scaled)")
    ax.plot(xs, d_self_vals / np.max(d_self_vals), label="$D_s$ (scaled)")
    ax.set_xlabel("x")
    ax.set_ylabel("scaled value")
    ax.legend(fontsize=8)
    _save(fig, out_path)


def render_obs1(pdf_vals, ratio_det, ratio_dir, out_path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    for ax, vals, title in (
        (axes[0], ratio_det, "Jacobian-magnitude sensitivity"),
        (axes[1], ratio_dir, "direction-averaged sensitivity"),
    ):
        ax.loglog(pdf_vals, vals, ".", ms=2, alpha=0.5)
        ax.set_xlabel("$p(x)$")
        ax.set_ylabel("$D_p$ / RMSE")
        ax.set_title(title, fontsize=9)
    _save(fig, out_path)


def render_patch_table(rows, out_path) -> None:
    """Grouped bars of PSNR per loss at each rate bound."""
    bounds = sorted({r[0] for r in rows})
    losses = sorted({r[1] for r in rows})
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.8 / len(losses)
    for i, loss in enumerate(losses):
        vals = [next(r[2] for r in rows if r[0] == b and r[1] == loss) for b in bounds]
        ax.bar(np.arange(len(bounds)) + i * width, vals, width, label=loss)
    ax.set_xticks(np.arange(len(bounds)) + 0.4 - width / 2)
    ax.set_xticklabels([f"{b:.2f} bpp" for b in bounds])
    ax.set_ylabel("PSNR (dB)")
    ax.legend(fontsize=8)
    _save(fig, out_path)
