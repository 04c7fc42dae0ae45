"""Rate-distortion autoencoder: quantizer modes, training loops, evaluation.

The trainable unit couples a dense encoder/decoder pair with a factorized
entropy model over the latent.  Training follows the noisy-quantizer
relaxation (additive uniform noise on the latent) and minimizes
rate + lambda * distortion; probability-weighted loss variants multiply
either the distortion term or the whole per-sample loss by pdf(x)**0.1.
Entropy-limited models replace the rate term with a fixed center set and a
soft differentiable assignment during training.

Training is fully deterministic given the config seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .densities import StudentT2D, UniformBox2D
from .entropy import FactorizedDensity, rate_bits, rate_grad
from .errors import ConfigError, ShapeError, TrainingDiverged
from .nn import (
    AdamState,
    MlpParams,
    _adam_update,
    adam_step,
    backward_pass,
    forward_pass,
    init_mlp,
    mlp_forward,
)
from .perceptual.msssim import msssim_batch, msssim_batch_with_grad
from .perceptual.nlpd import nlpd_batch, nlpd_batch_with_grad

PROB_WEIGHT_EXPONENT = 0.1

LOSS_VARIANTS = ("plain", "prob_weighted", "inv_prob_weighted", "no_data_weighted")
DISTORTIONS = ("sse", "mse", "rmse", "msssim", "nlpd")


# ---------------------------------------------------------------------------
# quantizer modes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Round:
    """Round to the nearest integer (halves away from zero)."""


@dataclass(frozen=True)
class AdditiveUniformNoise:
    """U(-1/2, 1/2) noise during training; rounds at evaluation time."""


@dataclass(frozen=True)
class SoftCenters:
    """Softmax-weighted assignment to a fixed, sorted center set."""

    centers: tuple[float, ...]
    s: float = 1.0

    def __post_init__(self):
        c = tuple(float(v) for v in self.centers)
        if len(c) < 2 or any(a >= b for a, b in zip(c, c[1:])):
            raise ConfigError("centers must be >= 2 strictly increasing values")
        if self.s <= 0:
            raise ConfigError("scale s must be positive")
        object.__setattr__(self, "centers", c)


@dataclass(frozen=True)
class NoQuantizer:
    """Identity; used for pure dimensionality-reduction training."""


QuantizerMode = Round | AdditiveUniformNoise | SoftCenters | NoQuantizer


def round_half_away(y: np.ndarray) -> np.ndarray:
    return np.copysign(np.floor(np.abs(y) + 0.5), y)


def _soft_assign(mode: SoftCenters, y: np.ndarray):
    """Soft center average and the weights' second moment (for gradients)."""
    c = np.asarray(mode.centers, dtype=y.dtype)
    a = -mode.s * (y[..., None] - c) ** 2
    a -= a.max(axis=-1, keepdims=True)
    w = np.exp(a)
    w /= w.sum(axis=-1, keepdims=True)
    yhat = w @ c
    moment2 = w @ (c * c)
    return yhat, moment2


def quantize(mode: QuantizerMode, y: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """Apply the mode's training-time quantization to a latent array."""
    y = np.asarray(y)
    if isinstance(mode, Round):
        return round_half_away(y)
    if isinstance(mode, AdditiveUniformNoise):
        if rng is None:
            raise ValueError("additive-noise quantization needs an rng")
        return y + rng.uniform(-0.5, 0.5, size=y.shape)
    if isinstance(mode, SoftCenters):
        return _soft_assign(mode, y)[0]
    return y


def hard_quantize(mode: QuantizerMode, y: np.ndarray) -> np.ndarray:
    """Evaluation-time quantization: rounding, or nearest center for soft mode."""
    y = np.asarray(y)
    if isinstance(mode, (Round, AdditiveUniformNoise)):
        return round_half_away(y)
    if isinstance(mode, SoftCenters):
        c = np.asarray(mode.centers)
        mid = (c[:-1] + c[1:]) / 2.0
        return c[np.searchsorted(mid, y)]
    return y


def _quantizer_to_json(mode: QuantizerMode) -> dict:
    if isinstance(mode, Round):
        return {"mode": "round"}
    if isinstance(mode, AdditiveUniformNoise):
        return {"mode": "additive_uniform_noise"}
    if isinstance(mode, SoftCenters):
        return {"mode": "soft_centers", "centers": list(mode.centers), "s": mode.s}
    return {"mode": "none"}


def quantizer_from_json(d: dict) -> QuantizerMode:
    kind = d["mode"]
    if kind == "round":
        return Round()
    if kind == "additive_uniform_noise":
        return AdditiveUniformNoise()
    if kind == "soft_centers":
        return SoftCenters(tuple(d["centers"]), float(d.get("s", 1.0)))
    if kind == "none":
        return NoQuantizer()
    raise ConfigError(f"unknown quantizer mode {kind!r}")


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


@dataclass
class CompressModel:
    encoder: MlpParams
    decoder: MlpParams
    entropy: FactorizedDensity | None
    quantizer: QuantizerMode
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.encoder.out_dim != self.decoder.in_dim:
            raise ShapeError("encoder output dim must match decoder input dim")
        if self.entropy is not None and self.entropy.ndim != self.encoder.out_dim:
            raise ShapeError("entropy model dimension must match the latent dim")

    @property
    def latent_dim(self) -> int:
        return self.encoder.out_dim

    @property
    def signal_dim(self) -> int:
        return self.encoder.in_dim

    def to_json_dict(self) -> dict:
        return {
            "encoder": self.encoder.to_json_dict(),
            "decoder": self.decoder.to_json_dict(),
            "entropy": None if self.entropy is None else self.entropy.to_json_dict(),
            "quantizer": _quantizer_to_json(self.quantizer),
            "meta": self.meta,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "CompressModel":
        return cls(
            MlpParams.from_json_dict(d["encoder"]),
            MlpParams.from_json_dict(d["decoder"]),
            None if d["entropy"] is None else FactorizedDensity.from_json_dict(d["entropy"]),
            quantizer_from_json(d["quantizer"]),
            dict(d.get("meta", {})),
        )


def save_model(path, model: CompressModel) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_json_dict(), fh)


def load_model(path) -> CompressModel:
    with open(path) as fh:
        return CompressModel.from_json_dict(json.load(fh))


def encode(m: CompressModel, x: np.ndarray) -> np.ndarray:
    """Continuous latent (no quantization)."""
    return mlp_forward(m.encoder, x)


def decode(m: CompressModel, yhat: np.ndarray) -> np.ndarray:
    return mlp_forward(m.decoder, yhat)


def reconstruct(m: CompressModel, x: np.ndarray) -> np.ndarray:
    """decode(hard_quantize(encode(x))): the evaluation-time autoencoder map."""
    return decode(m, hard_quantize(m.quantizer, encode(m, x)))


# ---------------------------------------------------------------------------
# training configuration
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    """Everything one training run needs; fully determines the result with seed."""

    lam: float
    data: object  # sampler with .sample(n, rng); densities also expose .pdf/.log_pdf
    encoder_dims: list[int] = field(default_factory=lambda: [2, 100, 100, 2])
    decoder_dims: list[int] | None = None  # default: reversed encoder dims
    loss_variant: str = "plain"
    distortion: str = "sse"
    steps: int = 500_000
    batch: int = 4096
    lr: float = 0.001
    seed: int = 0
    quantizer: QuantizerMode = field(default_factory=AdditiveUniformNoise)
    weight_density: object | None = None  # pdf source; defaults to `data` when needed
    patch_shape: tuple[int, int] | None = None
    entropy_halfwidth: float = 30.0
    entropy_bins: int = 120
    dtype: str = "float32"
    checkpoint_every: int = 1000

    def __post_init__(self):
        if self.decoder_dims is None:
            self.decoder_dims = list(reversed(self.encoder_dims))
        if self.lam <= 0:
            raise ConfigError("lambda must be positive")
        if self.steps < 1 or self.batch < 1:
            raise ConfigError("steps and batch must be >= 1")
        if self.loss_variant not in LOSS_VARIANTS:
            raise ConfigError(f"unknown loss variant {self.loss_variant!r}")
        if self.distortion not in DISTORTIONS:
            raise ConfigError(f"unknown distortion {self.distortion!r}")
        if self.distortion in ("msssim", "nlpd") and self.patch_shape is None:
            raise ConfigError("patch_shape is required for perceptual distortions")
        if self.encoder_dims[-1] != self.decoder_dims[0]:
            raise ConfigError("encoder output dim must match decoder input dim")
        if isinstance(self.quantizer, Round):
            raise ConfigError("rounding has zero gradients; train with noise or soft centers")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")

    @property
    def rate_active(self) -> bool:
        return isinstance(self.quantizer, AdditiveUniformNoise)

    def weight_source(self):
        if self.loss_variant == "plain":
            return None
        src = self.weight_density if self.weight_density is not None else self.data
        if src is not None and not hasattr(src, "log_pdf"):
            raise ConfigError("weighted loss variants need a density with log_pdf")
        return src


def _sample_weights(cfg: TrainConfig, x: np.ndarray) -> np.ndarray | None:
    """Per-sample loss weights for the probability-weighted variants."""
    src = cfg.weight_source()
    if src is None:
        return None
    expo = -PROB_WEIGHT_EXPONENT if cfg.loss_variant == "inv_prob_weighted" else PROB_WEIGHT_EXPONENT
    logp = np.asarray(src.log_pdf(np.asarray(x, dtype=np.float64)))
    with np.errstate(over="ignore"):
        return np.exp(expo * logp)


def _distortion_and_grad(kind: str, x: np.ndarray, xhat: np.ndarray, patch_shape):
    """Per-sample distortion values and gradients w.r.t. xhat (both float64)."""
    x64 = np.asarray(x, dtype=np.float64)
    xh64 = np.asarray(xhat, dtype=np.float64)
    if kind in ("sse", "mse", "rmse"):
        err = xh64 - x64
        sse = (err * err).sum(axis=1)
        if kind == "sse":
            return sse, 2.0 * err
        ndim = x64.shape[1]
        mse = sse / ndim
        if kind == "mse":
            return mse, 2.0 * err / ndim
        r = np.sqrt(mse)
        safe = np.where(r > 0.0, r, 1.0)
        return r, err * (np.where(r > 0.0, 1.0, 0.0) / (ndim * safe))[:, None]
    h, w = patch_shape
    a = x64.reshape(-1, h, w)
    b = xh64.reshape(-1, h, w)
    if kind == "msssim":
        val, grad = msssim_batch_with_grad(a, b)
        return 1.0 - val, -grad.reshape(len(a), -1)
    val, grad = nlpd_batch_with_grad(a, b)
    return val, grad.reshape(len(a), -1)


def loss_and_grads(
    enc: MlpParams,
    dec: MlpParams,
    ent: FactorizedDensity | None,
    cfg: TrainConfig,
    x: np.ndarray,
    noise: np.ndarray | None,
):
    """Mean loss over the batch and exact gradients for all trainables.

    ``noise`` is the pre-drawn additive latent noise (required for the
    additive-noise quantizer so the loss is a deterministic function of the
    parameters, which also makes it finite-difference checkable).

    Returns (loss, (enc_grads, dec_grads, logits_grad), stats) where stats
    holds the batch-mean rate in bits and distortion.
    """
    n = x.shape[0]
    dtype = x.dtype
    y, enc_cache = forward_pass(enc, x)

    if isinstance(cfg.quantizer, AdditiveUniformNoise):
        if noise is None:
            raise ValueError("additive-noise quantizer needs a noise array")
        y_tilde = y + noise
        dyq_dy = None
    elif isinstance(cfg.quantizer, SoftCenters):
        y_tilde, moment2 = _soft_assign(cfg.quantizer, y)
        dyq_dy = 2.0 * cfg.quantizer.s * (moment2 - y_tilde * y_tilde)
    else:
        y_tilde = y
        dyq_dy = None

    xhat, dec_cache = forward_pass(dec, y_tilde)

    weights = _sample_weights(cfg, x)
    w = np.ones(n) if weights is None else weights
    dist, dist_grad = _distortion_and_grad(cfg.distortion, x, xhat, cfg.patch_shape)

    if cfg.loss_variant == "no_data_weighted":
        c_rate = w / n
        c_dist = cfg.lam * w / n
    elif cfg.loss_variant == "plain":
        c_rate = np.full(n, 1.0 / n)
        c_dist = np.full(n, cfg.lam / n)
    else:  # prob_weighted / inv_prob_weighted scale only the distortion term
        c_rate = np.full(n, 1.0 / n)
        c_dist = cfg.lam * w / n

    loss = float(np.dot(c_dist, dist))
    mean_bits = 0.0
    glogits = None
    g_rate_y = 0.0
    if cfg.rate_active and ent is not None:
        y64 = np.asarray(y_tilde, dtype=np.float64)
        bits = rate_bits(ent, y64)
        mean_bits = float(bits.mean())
        loss += float(np.dot(c_rate, bits))
        glogits, g_rate_y = rate_grad(ent, y64, weights=c_rate)

    g_xhat = (dist_grad * c_dist[:, None]).astype(dtype)
    dec_grads, g_ytilde = backward_pass(dec, dec_cache, g_xhat)
    g_y = g_ytilde + np.asarray(g_rate_y, dtype=dtype)
    if dyq_dy is not None:
        g_y = g_y * dyq_dy
    enc_grads, _ = backward_pass(enc, enc_cache, g_y)

    stats = {"rate_bits": mean_bits, "distortion": float(dist.mean())}
    return loss, (enc_grads, dec_grads, glogits), stats


@dataclass
class TrainCurve:
    """Per-checkpoint training-batch statistics."""

    steps: list[int] = field(default_factory=list)
    rate_bpp: list[float] = field(default_factory=list)
    distortion: list[float] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)

    def rows(self):
        return list(zip(self.steps, self.rate_bpp, self.distortion))


class _MlpWorkspace:
    """Preallocated buffers for repeated forward/backward passes.

    The step loop runs a hundred thousand times over ~1.6 MB activations;
    reusing buffers keeps the arrays cache-warm and avoids allocator
    churn, which dominates the naive implementation's runtime.  The math
    is identical to forward_pass/backward_pass.
    """

    def __init__(self, dims: list[int], batch: int, dtype):
        self.dims = dims
        n_hidden = len(dims) - 2
        self.z = [np.empty((batch, dims[i + 1]), dtype) for i in range(n_hidden)]
        self.act = [np.empty_like(z) for z in self.z]
        self.sig = [np.empty_like(z) for z in self.z]
        self.tmp = [np.empty_like(z) for z in self.z]
        self.out = np.empty((batch, dims[-1]), dtype)
        self.delta = [np.empty_like(z) for z in self.z]
        self.gin = np.empty((batch, dims[0]), dtype)

    def forward(self, p: MlpParams, x: np.ndarray) -> np.ndarray:
        h = x
        for i in range(len(self.z)):
            z = self.z[i]
            np.matmul(h, p.weights[i].T, out=z)
            z += p.biases[i]
            # act = softplus(z), sig = d softplus / dz, matching nn.softplus/sigmoid
            t, s, a = self.tmp[i], self.sig[i], self.act[i]
            np.multiply(z, 0.5, out=s)
            np.tanh(s, out=s)
            s += 1.0
            s *= 0.5
            np.abs(z, out=t)
            np.negative(t, out=t)
            np.exp(t, out=t)
            np.log1p(t, out=t)
            np.maximum(z, 0.0, out=a)
            a += t
            h = a
        np.matmul(h, p.weights[-1].T, out=self.out)
        self.out += p.biases[-1]
        return self.out

    def backward(self, p: MlpParams, x: np.ndarray, upstream: np.ndarray, wgrads, bgrads):
        """Writes parameter gradients into wgrads/bgrads; returns input grad."""
        n_layers = len(p.weights)
        delta = upstream
        for i in range(n_layers - 1, -1, -1):
            inp = x if i == 0 else self.act[i - 1]
            np.matmul(delta.T, inp, out=wgrads[i])
            delta.sum(axis=0, out=bgrads[i])
            if i > 0:
                np.matmul(delta, p.weights[i], out=self.delta[i - 1])
                delta = self.delta[i - 1]
                delta *= self.sig[i - 1]
            else:
                np.matmul(delta, p.weights[0], out=self.gin)
        return self.gin


class _AdamArrays:
    """In-place Adam over a flat list of parameter arrays."""

    def __init__(self, arrays, lr):
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.lr = lr
        self.t = 0

    def update(self, arrays, grads):
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            a -= self.lr * (m / c1) / (np.sqrt(v / c2) + eps)


def train(config: TrainConfig) -> tuple[CompressModel, TrainCurve]:
    """Run the configured training loop; deterministic given config.seed."""
    dtype = np.float32 if config.dtype == "float32" else np.float64
    ss = np.random.SeedSequence(config.seed)
    r_init, r_data, r_noise = (np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(3))

    enc = init_mlp(config.encoder_dims, r_init, dtype)
    dec = init_mlp(config.decoder_dims, r_init, dtype)
    latent_dim = config.encoder_dims[-1]
    signal_dim = config.encoder_dims[0]
    batch = config.batch
    ent = (
        FactorizedDensity.uniform(latent_dim, config.entropy_halfwidth, config.entropy_bins)
        if config.rate_active
        else None
    )

    ws_enc = _MlpWorkspace(config.encoder_dims, batch, dtype)
    ws_dec = _MlpWorkspace(config.decoder_dims, batch, dtype)
    ge_w = [np.empty_like(w) for w in enc.weights]
    ge_b = [np.empty_like(b) for b in enc.biases]
    gd_w = [np.empty_like(w) for w in dec.weights]
    gd_b = [np.empty_like(b) for b in dec.biases]
    adam_enc = _AdamArrays(enc.weights + enc.biases, config.lr)
    adam_dec = _AdamArrays(dec.weights + dec.biases, config.lr)
    adam_log = _AdamArrays([ent.logits], config.lr) if ent is not None else None

    noise = np.empty((batch, latent_dim), dtype) if config.rate_active else None
    y_tilde = np.empty((batch, latent_dim), dtype)
    soft = config.quantizer if isinstance(config.quantizer, SoftCenters) else None

    inv_n = 1.0 / batch
    curve = TrainCurve()
    for step in range(1, config.steps + 1):
        x = config.data.sample(batch, r_data).astype(dtype)
        y = ws_enc.forward(enc, x)

        dyq_dy = None
        if config.rate_active:
            r_noise.random(size=noise.shape, dtype=dtype, out=noise)
            noise -= 0.5
            np.add(y, noise, out=y_tilde)
        elif soft is not None:
            yq, moment2 = _soft_assign(soft, y)
            y_tilde[...] = yq
            dyq_dy = 2.0 * soft.s * (moment2 - yq * yq)
        else:
            y_tilde[...] = y

        xhat = ws_dec.forward(dec, y_tilde)

        weights = _sample_weights(config, x)
        if config.loss_variant == "no_data_weighted":
            c_rate = weights * inv_n
            c_dist = config.lam * weights * inv_n
        elif config.loss_variant == "plain":
            c_rate = None  # uniform 1/n
            c_dist = None
        else:
            c_rate = None
            c_dist = config.lam * weights * inv_n

        dist, dist_grad = _distortion_and_grad(config.distortion, x, xhat, config.patch_shape)
        if c_dist is None:
            loss = config.lam * inv_n * float(dist.sum())
            g_xhat = (dist_grad * (config.lam * inv_n)).astype(dtype)
        else:
            loss = float(np.dot(c_dist, dist))
            g_xhat = (dist_grad * c_dist[:, None]).astype(dtype)

        mean_bits = 0.0
        if ent is not None:
            y64 = np.asarray(y_tilde, dtype=np.float64)
            bits = rate_bits(ent, y64)
            mean_bits = float(bits.mean())
            cr = np.full(batch, inv_n) if c_rate is None else c_rate
            loss += float(np.dot(cr, bits))
            glogits, g_rate_y = rate_grad(ent, y64, weights=cr)

        if not math.isfinite(loss):
            raise TrainingDiverged(step, f"non-finite loss at step {step}")

        g_y = ws_dec.backward(dec, y_tilde, g_xhat, gd_w, gd_b)
        if ent is not None:
            g_y += np.asarray(g_rate_y, dtype=dtype)
        if dyq_dy is not None:
            g_y *= dyq_dy
        ws_enc.backward(enc, x, g_y, ge_w, ge_b)

        adam_enc.update(enc.weights + enc.biases, ge_w + ge_b)
        adam_dec.update(dec.weights + dec.biases, gd_w + gd_b)
        if ent is not None:
            adam_log.update([ent.logits], [glogits])

        if step % config.checkpoint_every == 0 or step == config.steps:
            curve.steps.append(step)
            curve.rate_bpp.append(mean_bits / signal_dim)
            curve.distortion.append(float(dist.mean()))
            curve.loss.append(loss)

    model = CompressModel(
        enc.astype(np.float64),
        dec.astype(np.float64),
        ent,
        config.quantizer,
        meta={"seed": config.seed, "steps": config.steps, "lambda": config.lam},
    )
    return model, curve


def train_no_data(config: TrainConfig) -> tuple[CompressModel, TrainCurve]:
    """Training-without-data: uniform-box samples, whole loss weighted by p_tau**0.1.

    The config's ``data`` must be the uniform sampling box and
    ``weight_density`` the density whose likelihood weights the loss.
    """
    if config.weight_density is None:
        raise ConfigError("train_no_data needs weight_density (p_tau)")
    cfg = replace(config, loss_variant="no_data_weighted")
    return train(cfg)


def eval_rate_distortion(m: CompressModel, test_points: np.ndarray, distortion_kind: str = "sse", patch_shape=None):
    """Mean (rate_bpp, distortion) over a test set with hard quantization.

    Rate is bits per signal component.  Entropy-limited (soft-center)
    models report their entropy upper bound; models without quantizer
    report 0 rate.
    """
    x = np.asarray(test_points, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("test_points must be a non-empty (n, signal_dim) array")
    y = encode(m, x)
    yq = hard_quantize(m.quantizer, y)
    xhat = decode(m, yq)
    if m.entropy is not None and isinstance(m.quantizer, (Round, AdditiveUniformNoise)):
        bpp = float(rate_bits(m.entropy, yq).mean()) / m.signal_dim
    elif isinstance(m.quantizer, SoftCenters):
        bpp = m.latent_dim * math.log2(len(m.quantizer.centers)) / m.signal_dim
    else:
        bpp = 0.0
    dist, _ = _distortion_and_grad(distortion_kind, x, xhat, patch_shape)
    return bpp, float(dist.mean())


def entropy_upper_bound(height: int, width: int, n_downsamples: int, channels: int, num_centers: int):
    """Upper bound on code entropy: (W*H / 4**n) * channels * log2(centers).

    Returns (bits, bpp).
    """
    if height <= 0 or width <= 0 or n_downsamples < 0 or channels < 0:
        raise ConfigError("dimensions must be positive (channels may be zero)")
    if num_centers < 2:
        raise ConfigError("need at least two centers")
    bits = (width * height) / (2**n_downsamples * 2**n_downsamples) * channels * math.log2(num_centers)
    return bits, bits / (height * width)
