"""Shared fixtures: fixture corpus path and a small trained 2D model."""

from pathlib import Path

import numpy as np
import pytest

from pplab.compress import TrainConfig, train
from pplab.densities import StudentT2D

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return FIXTURES / "patches"


@pytest.fixture(scope="session")
def student_t() -> StudentT2D:
    return StudentT2D()


@pytest.fixture(scope="session")
def small_trained_model(student_t):
    """Mid-rate 2D model at reduced desk scale, shared across test modules."""
    cfg = TrainConfig(lam=64.0, data=student_t, steps=12_000, batch=1024, seed=11)
    model, curve = train(cfg)
    return model
