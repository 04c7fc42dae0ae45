"""Dense feed-forward networks with hand-written reverse-mode gradients.

Everything a training loop needs for small MLPs: seeded initialization,
a forward pass with softplus hidden activations and a linear output layer,
exact backpropagation, and Adam updates.  All functions are pure: they
return new parameter/state values and never mutate their inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, TrainingDiverged


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; identical seeds yield identical streams."""
    return np.random.Generator(np.random.PCG64(seed))


def softplus(z: np.ndarray) -> np.ndarray:
    """ln(1 + exp(z)), overflow-safe for large |z|."""
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Derivative of softplus, via the saturation-safe tanh identity."""
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class MlpParams:
    """Weights and biases of a dense network.

    ``weights[i]`` has shape ``(dims[i+1], dims[i])`` (rows = output dim),
    ``biases[i]`` has shape ``(dims[i+1],)``.  Hidden layers use softplus,
    the final layer is linear.
    """

    dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def in_dim(self) -> int:
        return self.dims[0]

    @property
    def out_dim(self) -> int:
        return self.dims[-1]

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def astype(self, dtype) -> "MlpParams":
        return MlpParams(
            list(self.dims),
            [w.astype(dtype) for w in self.weights],
            [b.astype(dtype) for b in self.biases],
        )

    def copy(self) -> "MlpParams":
        return MlpParams(
            list(self.dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def to_json_dict(self) -> dict:
        return {
            "dims": [int(d) for d in self.dims],
            "weights": [w.astype(np.float64).tolist() for w in self.weights],
            "biases": [b.astype(np.float64).tolist() for b in self.biases],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MlpParams":
        dims = [int(x) for x in d["dims"]]
        weights = [np.asarray(w, dtype=np.float64) for w in d["weights"]]
        biases = [np.asarray(b, dtype=np.float64) for b in d["biases"]]
        p = cls(dims, weights, biases)
        _check_consistent(p)
        return p

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, s: str) -> "MlpParams":
        return cls.from_json_dict(json.loads(s))


def _check_consistent(p: MlpParams) -> None:
    if len(p.dims) < 2:
        raise ConfigError("need at least an input and an output dimension")
    if len(p.weights) != len(p.dims) - 1 or len(p.biases) != len(p.dims) - 1:
        raise ShapeError("layer count does not match dims")
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        if w.shape != (p.dims[i + 1], p.dims[i]) or b.shape != (p.dims[i + 1],):
            raise ShapeError(
                f"layer {i}: weight {w.shape} / bias {b.shape} "
                f"inconsistent with dims {p.dims}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError(f"layer {i}: non-finite parameter values")


def init_mlp(dims: list[int], rng: np.random.Generator, dtype=np.float64) -> MlpParams:
    """Scaled-uniform init: weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases 0."""
    if len(dims) < 2:
        raise ConfigError("dims must list at least input and output sizes")
    if any(d < 1 for d in dims):
        raise ConfigError(f"all dims must be >= 1, got {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return MlpParams(list(dims), weights, biases)


def forward_pass(params: MlpParams, x: np.ndarray):
    """Batched forward returning (output, cache) for a later backward pass.

    ``x`` has shape (batch, in_dim).  The cache stores pre-activations of
    hidden layers and the post-activation inputs of every layer.
    """
    inputs = [x]  # input to each linear layer
    pre = []  # hidden pre-activations
    h = x
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        if i < n_layers - 1:
            pre.append(z)
            h = softplus(z)
            inputs.append(h)
        else:
            h = z
    return h, (inputs, pre)


def backward_pass(params: MlpParams, cache, upstream: np.ndarray):
    """Exact gradients of ``sum(upstream * forward(x))`` w.r.t. params and x.

    Parameter gradients are summed over the batch; the input gradient keeps
    the batch dimension.  Returns ((weight_grads, bias_grads), input_grad).
    """
    inputs, pre = cache
    n_layers = len(params.weights)
    wgrads = [None] * n_layers
    bgrads = [None] * n_layers
    delta = upstream
    for i in range(n_layers - 1, -1, -1):
        wgrads[i] = delta.T @ inputs[i]
        bgrads[i] = delta.sum(axis=0)
        delta = delta @ params.weights[i]
        if i > 0:
            delta = delta * sigmoid(pre[i - 1])
    return (wgrads, bgrads), delta


def mlp_forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Forward map for a single vector or a (batch, in_dim) array."""
    x = np.asarray(x)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != params.in_dim:
        raise ShapeError(f"input shape {x.shape} does not match in_dim {params.in_dim}")
    y, _ = forward_pass(params, xb)
    return y[0] if single else y


def mlp_backward(params: MlpParams, x: np.ndarray, upstream_grad: np.ndarray):
    """Gradients of <upstream_grad, forward(x)> w.r.t. parameters and x.

    Accepts a single vector or a batch; for a batch the parameter gradients
    accumulate (sum) over samples.
    """
    x = np.asarray(x)
    g = np.asarray(upstream_grad)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    gb = g[None, :] if single else g
    if xb.shape[1] != params.in_dim:
        raise ShapeError(f"input shape {x.shape} does not match in_dim {params.in_dim}")
    if gb.shape != (xb.shape[0], params.out_dim):
        raise ShapeError(
            f"upstream shape {g.shape} does not match output dim {params.out_dim}"
        )
    _, cache = forward_pass(params, xb)
    grads, gx = backward_pass(params, cache, gb)
    return grads, (gx[0] if single else gx)


@dataclass
class AdamState:
    """Adam moment estimates mirroring an MlpParams layout."""

    mw: list[np.ndarray]
    vw: list[np.ndarray]
    mb: list[np.ndarray]
    vb: list[np.ndarray]
    step_count: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: MlpParams, lr: float = 0.001) -> "AdamState":
        return cls(
            mw=[np.zeros_like(w) for w in params.weights],
            vw=[np.zeros_like(w) for w in params.weights],
            mb=[np.zeros_like(b) for b in params.biases],
            vb=[np.zeros_like(b) for b in params.biases],
            lr=lr,
        )


def _adam_update(p, g, m, v, lr, b1, b2, eps, t):
    m = b1 * m + (1.0 - b1) * g
    v = b2 * v + (1.0 - b2) * g * g
    mhat = m / (1.0 - b1**t)
    vhat = v / (1.0 - b2**t)
    return p - lr * mhat / (np.sqrt(vhat) + eps), m, v


def adam_step(params: MlpParams, grads, state: AdamState):
    """One Adam update with bias correction; returns (new_params, new_state)."""
    wgrads, bgrads = grads
    for g in list(wgrads) + list(bgrads):
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged(state.step_count, "non-finite gradient")
    t = state.step_count + 1
    new_w, new_mw, new_vw = [], [], []
    new_b, new_mb, new_vb = [], [], []
    for p, g, m, v in zip(params.weights, wgrads, state.mw, state.vw):
        p2, m2, v2 = _adam_update(p, g, m, v, state.lr, state.beta1, state.beta2, state.eps, t)
        new_w.append(p2)
        new_mw.append(m2)
        new_vw.append(v2)
    for p, g, m, v in zip(params.biases, bgrads, state.mb, state.vb):
        p2, m2, v2 = _adam_update(p, g, m, v, state.lr, state.beta1, state.beta2, state.eps, t)
        new_b.append(p2)
        new_mb.append(m2)
        new_vb.append(v2)
    new_params = MlpParams(list(params.dims), new_w, new_b)
    new_state = AdamState(
        new_mw, new_vw, new_mb, new_vb, t, state.lr, state.beta1, state.beta2, state.eps
    )
    return new_params, new_state
