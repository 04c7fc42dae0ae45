"""Patch data sources: uniform-noise sampling and PGM corpus loading."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..perceptual.patch import read_pgm, tile_patches


@dataclass(frozen=True)
class UniformPatches:
    """I.i.d. U(0,1) pixels, flattened to (n, height*width) vectors."""

    height: int = 16
    width: int = 16

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.random((n, self.height * self.width))


def load_corpus(path, size: int = 16, stride: int | None = None) -> np.ndarray:
    """Tile every PGM under ``path`` into (n, size, size) patches.

    Files are visited in sorted order so the patch array is deterministic.
    """
    root = Path(path)
    if not root.is_dir():
        raise ConfigError(f"patch corpus directory not found: {path}")
    files = sorted(root.glob("*.pgm"))
    if not files:
        raise ConfigError(f"no .pgm files in corpus directory {path}")
    patches = []
    for f in files:
        patches.extend(p.pixels for p in tile_patches(read_pgm(f).pixels, size, stride))
    return np.stack(patches, axis=0)


def split_corpus(patches: np.ndarray, test_every: int = 4):
    """Deterministic interleaved train/test split."""
    idx = np.arange(len(patches))
    test_mask = idx % test_every == 0
    return patches[~test_mask], patches[test_mask]


def order_hash(indices: np.ndarray) -> str:
    """Hash of a sample presentation order, for cross-run comparison."""
    return hashlib.sha256(np.asarray(indices, dtype=np.int64).tobytes()).hexdigest()


@dataclass
class OrderedCorpusSampler:
    """Serves corpus patches in a seeded shuffled order, wrapping around.

    The full presentation order is fixed up front so two runs with the
    same seed see exactly the same stream.
    """

    patches: np.ndarray  # (n, h, w)
    order: np.ndarray

    @classmethod
    def for_seed(cls, patches: np.ndarray, steps: int, batch: int, seed: int):
        rng = np.random.Generator(np.random.PCG64(seed))
        reps = int(np.ceil(steps * batch / len(patches)))
        order = np.concatenate([rng.permutation(len(patches)) for _ in range(reps)])
        sampler = cls(patches, order)
        sampler._cursor = 0
        return sampler

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        take = self.order[self._cursor : self._cursor + n]
        self._cursor += n
        flat = self.patches[take].reshape(n, -1)
        return flat
