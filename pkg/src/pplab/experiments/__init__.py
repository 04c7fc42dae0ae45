"""Experiment runners behind the command-line interface."""

EXPERIMENT_IDS = (
    "obs1-equalizer",
    "fig3-sweep",
    "fig5-relperf",
    "nodata-2d",
    "nodata-patch",
    "lossvariants-2d",
    "batch1-ratio",
    "scorematch-1d",
)
