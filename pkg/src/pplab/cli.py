"""Command-line experiment harness.

Usage: pplab <experiment-id> [--config file.json] --out DIR
             [--seed N] [--steps N] [--jobs N]

Each experiment writes CSV results, a .meta.json sidecar per CSV with the
resolved config and seed, rendered PNG figures, and trained models as
JSON.  Outputs are byte-identical across re-runs with the same config.
Exit codes: 0 success, 2 configuration error, 3 training divergence in a
non-sweep run.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path


def _parser() -> argparse.ArgumentParser:
    from .experiments import EXPERIMENT_IDS

    p = argparse.ArgumentParser(prog="pplab", description=__doc__.strip().splitlines()[0])
    p.add_argument("experiment", choices=EXPERIMENT_IDS, help="experiment to run")
    p.add_argument("--config", type=Path, default=None, help="JSON config overriding defaults")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--steps", type=int, default=None, help="override config training steps")
    p.add_argument("--jobs", type=int, default=1, help="concurrent training jobs for sweeps")
    return p


def run_experiment(experiment: str, config_path, out: Path, seed=None, steps=None, jobs: int = 1):
    from .experiments import batch1, fig3, fig5, lossvariants, nodata, obs1, scorematch
    from .experiments.config import load_config

    overrides = {"seed": seed, "steps": steps}
    if experiment == "fig3-sweep":
        cfg = load_config(config_path, fig3.DEFAULTS, overrides)
        return fig3.run(cfg, out, jobs)
    if experiment == "fig5-relperf":
        cfg = load_config(config_path, fig5.DEFAULTS, overrides)
        return fig5.run(cfg, out, jobs)
    if experiment == "lossvariants-2d":
        cfg = load_config(config_path, lossvariants.DEFAULTS, overrides)
        return lossvariants.run(cfg, out, jobs)
    if experiment == "nodata-2d":
        cfg = load_config(config_path, nodata.DEFAULTS_2D, overrides)
        return nodata.run_2d(cfg, out, jobs)
    if experiment == "nodata-patch":
        cfg = load_config(config_path, nodata.DEFAULTS_PATCH, overrides)
        return nodata.run_patch(cfg, out, jobs)
    if experiment == "batch1-ratio":
        cfg = load_config(config_path, batch1.DEFAULTS, overrides)
        return batch1.run(cfg, out, jobs)
    if experiment == "scorematch-1d":
        cfg = load_config(config_path, scorematch.DEFAULTS, overrides)
        return scorematch.run(cfg, out, jobs)
    if experiment == "obs1-equalizer":
        cfg = load_config(config_path, obs1.DEFAULTS, overrides)
        return obs1.run(cfg, out, jobs)
    raise ValueError(f"unhandled experiment {experiment!r}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.jobs > 1:
        # sweep workers replace BLAS threading; must be set before numpy loads
        os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
        os.environ.setdefault("OMP_NUM_THREADS", "1")

    from .errors import ConfigError, TrainingDiverged

    try:
        run_experiment(args.experiment, args.config, args.out, args.seed, args.steps, args.jobs)
    except ConfigError as exc:
        print(f"pplab: config error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"pplab: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
