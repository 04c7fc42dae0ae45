"""Deterministic CSV/metadata output helpers shared by all experiments.

Every CSV gets a sibling ``<name>.meta.json`` with the resolved config, a
hash of it, the seed, and library versions.  Nothing time-dependent is
written, so re-running a command with the same config produces
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path

import numpy as np

import pplab


def _format_value(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return v


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_value(v) for v in row])
    return path


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def write_metadata(csv_path, experiment: str, cfg: dict, extra: dict | None = None) -> Path:
    meta = {
        "experiment": experiment,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seed": cfg.get("seed"),
        "versions": {
            "pplab": pplab.__version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        meta["extra"] = extra
    path = Path(str(csv_path) + ".meta.json" if not str(csv_path).endswith(".csv") else str(csv_path)[:-4] + ".meta.json")
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
