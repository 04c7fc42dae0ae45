"""Patch type, file formats, and pixel-domain utilities.

A patch is a single-channel image with float pixels in [0, 1].  Two file
formats are supported: binary PGM (P5, 8-bit) and a raw float format with
an 8-byte header of two little-endian uint32 dims (height, width) followed
by row-major little-endian float32 pixels.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, ShapeError


@dataclass(frozen=True)
class Patch:
    """Immutable single-channel patch; pixels clamped to [0, 1] on construction."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ShapeError(f"patch pixels must be 2-d, got shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValueError("patch pixels must be finite")
        px = np.clip(px, 0.0, 1.0)
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other):
        return isinstance(other, Patch) and np.array_equal(self.pixels, other.pixels)


def _check_same_dims(a: Patch, b: Patch):
    if a.pixels.shape != b.pixels.shape:
        raise ShapeError(f"patch dimensions differ: {a.pixels.shape} vs {b.pixels.shape}")


def rmse(a: Patch, b: Patch) -> float:
    """Root mean squared pixel difference."""
    _check_same_dims(a, b)
    return float(np.sqrt(np.mean((a.pixels - b.pixels) ** 2)))


def psnr(a: Patch, b: Patch) -> float:
    """Peak signal-to-noise ratio in dB with peak 1.0; inf for identical patches."""
    r = rmse(a, b)
    if r == 0.0:
        return float("inf")
    return float(20.0 * np.log10(1.0 / r))


def add_gaussian_noise(a: Patch, sigma: float, rng: np.random.Generator) -> Patch:
    """Additive Gaussian noise with sigma given on a 0-255 pixel scale."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    noisy = a.pixels + rng.standard_normal(a.pixels.shape) * (sigma / 255.0)
    return Patch(noisy)


def contrast_interp(a: Patch, alpha: float) -> Patch:
    """Rescale contrast around the patch mean: mean + alpha * (x - mean).

    alpha=0 gives a solid patch at the mean, 1 the original, 2 doubled
    contrast; results are clamped to [0, 1].
    """
    if not 0.0 <= alpha <= 2.0:
        raise ConfigError(f"alpha must lie in [0, 2], got {alpha}")
    m = float(a.pixels.mean())
    return Patch(m + alpha * (a.pixels - m))


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def write_pgm(path, a: Patch) -> None:
    data = np.rint(a.pixels * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{a.width} {a.height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def _read_pgm_tokens(raw: bytes, count: int):
    """First `count` whitespace-separated header tokens, skipping # comments."""
    tokens = []
    i = 0
    while len(tokens) < count:
        if i >= len(raw):
            raise ValueError("truncated PGM header")
        c = raw[i : i + 1]
        if c == b"#":
            while i < len(raw) and raw[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(raw) and not raw[j : j + 1].isspace() and raw[j : j + 1] != b"#":
                j += 1
            tokens.append(raw[i:j])
            i = j
    return tokens, i + 1  # skip the single whitespace after the last token


def read_pgm(path) -> Patch:
    raw = Path(path).read_bytes()
    tokens, offset = _read_pgm_tokens(raw, 4)
    if tokens[0] != b"P5":
        raise ValueError(f"not a binary PGM (P5) file: {path}")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ValueError("only 8-bit PGM files are supported")
    data = np.frombuffer(raw, dtype=np.uint8, count=height * width, offset=offset)
    return Patch(data.reshape(height, width).astype(np.float64) / 255.0)


def write_rawf32(path, a: Patch) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", a.height, a.width))
        fh.write(a.pixels.astype("<f4").tobytes())


def read_rawf32(path) -> Patch:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ValueError("truncated raw patch file")
    height, width = struct.unpack("<II", raw[:8])
    data = np.frombuffer(raw, dtype="<f4", count=height * width, offset=8)
    return Patch(data.reshape(height, width).astype(np.float64))


def tile_patches(image: np.ndarray, size: int = 16, stride: int | None = None) -> list[Patch]:
    """Cut an image array (values in [0,1]) into size x size tiles.

    The default stride of size//2 gives 50% overlap.
    """
    if stride is None:
        stride = size // 2
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    out = []
    for top in range(0, h - size + 1, stride):
        for left in range(0, w - size + 1, stride):
            out.append(Patch(img[top : top + size, left : left + size]))
    return out
