"""Config parsing: JSON fragments to density/model objects, per-experiment defaults."""

from __future__ import annotations

import json
from pathlib import Path

from ..densities import Gaussian1D, StudentT2D, StudentT1D, Uniform1D, UniformBox2D
from ..errors import ConfigError


def density_from_json(d: dict):
    kind = d.get("kind")
    if kind == "student_t_2d":
        return StudentT2D(
            mu=tuple(d.get("mu", (0.0, 0.0))),
            scale=tuple(d.get("scale", (0.5, 0.2))),
            nu=float(d.get("nu", 2.0)),
        )
    if kind == "uniform_box_2d":
        return UniformBox2D(lo=tuple(d["lo"]), hi=tuple(d["hi"]))
    if kind == "gaussian":
        return Gaussian1D(mu=float(d.get("mu", 0.0)), sigma=float(d.get("sigma", 1.0)))
    if kind == "student_t":
        return StudentT1D(
            nu=float(d.get("nu", 2.0)),
            mu=float(d.get("mu", 0.0)),
            sigma=float(d.get("sigma", 1.0)),
        )
    if kind == "uniform":
        return Uniform1D(a=float(d["a"]), b=float(d["b"]))
    raise ConfigError(f"unknown density kind {kind!r}")


def density_to_json(obj) -> dict:
    if isinstance(obj, StudentT2D):
        return {"kind": "student_t_2d", "mu": list(obj.mu), "scale": list(obj.scale), "nu": obj.nu}
    if isinstance(obj, UniformBox2D):
        return {"kind": "uniform_box_2d", "lo": list(obj.lo), "hi": list(obj.hi)}
    if isinstance(obj, Gaussian1D):
        return {"kind": "gaussian", "mu": obj.mu, "sigma": obj.sigma}
    if isinstance(obj, StudentT1D):
        return {"kind": "student_t", "nu": obj.nu, "mu": obj.mu, "sigma": obj.sigma}
    if isinstance(obj, Uniform1D):
        return {"kind": "uniform", "a": obj.a, "b": obj.b}
    raise ConfigError(f"cannot serialize density {type(obj).__name__}")


def load_config(path: str | Path | None, defaults: dict, overrides: dict | None = None) -> dict:
    """Merge defaults <- config file <- CLI overrides; reject unknown keys."""
    cfg = dict(defaults)
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        unknown = set(user) - set(defaults) - {"experiment"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k: v for k, v in user.items() if k != "experiment"})
    if overrides:
        cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg
