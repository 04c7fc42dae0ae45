"""Single-channel image patches and perceptual distances on them."""

from .patch import (
    Patch,
    add_gaussian_noise,
    contrast_interp,
    psnr,
    read_pgm,
    read_rawf32,
    rmse,
    tile_patches,
    write_pgm,
    write_rawf32,
)
from .pyramid import LaplacianPyramid, build_pyramid, collapse_pyramid, levels_for
from .msssim import msssim, msssim_batch, msssim_batch_with_grad
from .nlpd import nlpd, nlpd_batch, nlpd_batch_with_grad

__all__ = [
    "Patch",
    "add_gaussian_noise",
    "contrast_interp",
    "psnr",
    "read_pgm",
    "read_rawf32",
    "rmse",
    "tile_patches",
    "write_pgm",
    "write_rawf32",
    "LaplacianPyramid",
    "build_pyramid",
    "collapse_pyramid",
    "levels_for",
    "msssim",
    "msssim_batch",
    "msssim_batch_with_grad",
    "nlpd",
    "nlpd_batch",
    "nlpd_batch_with_grad",
]
