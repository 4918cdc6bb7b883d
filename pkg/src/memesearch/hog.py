"""Histogram of Oriented Gradients descriptor.

Defaults follow the classic pedestrian-detection recipe: 128x128 input,
8x8-pixel cells, 2x2-cell blocks sliding one cell at a time, 9 unsigned
orientation bins over [0, 180), L2 block normalization with component
clipping at 0.2 followed by renormalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import FeatureVector
from .errors import DataError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
_EPS = 1e-12


@dataclass(frozen=True)
class HogConfig:
    resize_to: tuple[int, int] = (128, 128)
    cell_size: int = 8
    block_size: int = 2
    num_bins: int = 9
    clip: float = 0.2

    def __post_init__(self):
        w, h = self.resize_to
        if w % self.cell_size or h % self.cell_size:
            raise DataError("resize dimensions must be divisible by cell_size")
        if self.block_size < 1:
            raise DataError("block_size must be >= 1")
        if self.num_bins < 2:
            raise DataError("num_bins must be >= 2")
        if not (0.0 < self.clip <= 1.0):
            raise DataError("clip must lie in (0, 1]")

    @property
    def descriptor_length(self) -> int:
        w, h = self.resize_to
        nbx = w // self.cell_size - self.block_size + 1
        nby = h // self.cell_size - self.block_size + 1
        if nbx < 1 or nby < 1:
            raise DataError("resize target smaller than one block")
        return nbx * nby * self.block_size ** 2 * self.num_bins


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Fixed-luminance grayscale conversion of an HxWx3 array in [0, 1]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim == 2:
        return rgb
    r, g, b = LUMA_WEIGHTS
    return rgb[..., 0] * r + rgb[..., 1] * g + rgb[..., 2] * b


def resize_bilinear(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resampling with pixel-center alignment."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if (w, h) == (width, height):
        return img.copy()
    # Sample positions map output pixel centers onto input pixel centers.
    xs = (np.arange(width) + 0.5) * w / width - 0.5
    ys = (np.arange(height) + 0.5) * h / height - 0.5
    xs = np.clip(xs, 0, w - 1)
    ys = np.clip(ys, 0, h - 1)
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = img[np.ix_(y0, x0)] * (1 - fx) + img[np.ix_(y0, x1)] * fx
    bot = img[np.ix_(y1, x0)] * (1 - fx) + img[np.ix_(y1, x1)] * fx
    return top * (1 - fy[:, None]) + bot * fy[:, None]


def gradients(img: np.ndarray):
    """Replicated-edge central differences.

    Returns (magnitude, orientation) with orientation in [0, 180)
    degrees (unsigned gradients)."""
    img = np.asarray(img, dtype=np.float64)
    padded = np.pad(img, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) * 0.5
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) * 0.5
    magnitude = np.hypot(gx, gy)
    orientation = np.degrees(np.arctan2(gy, gx)) % 180.0
    # arctan2 can yield exactly 180.0 after the modulo for tiny negatives
    orientation[orientation >= 180.0] = 0.0
    return magnitude, orientation


def _cell_histograms(magnitude, orientation, cell_size, num_bins):
    """Per-cell orientation histograms with bilinear voting between the
    two nearest bin centers (circular over the 180-degree range)."""
    h, w = magnitude.shape
    cy, cx = h // cell_size, w // cell_size
    bin_width = 180.0 / num_bins
    pos = orientation / bin_width - 0.5
    lower = np.floor(pos).astype(int)
    frac = pos - lower
    lower_bin = lower % num_bins
    upper_bin = (lower + 1) % num_bins
    w_lower = magnitude * (1.0 - frac)
    w_upper = magnitude * frac

    hist = np.zeros((cy, cx, num_bins))
    cell_y = np.arange(h) // cell_size
    cell_x = np.arange(w) // cell_size
    flat_cell = (cell_y[:, None] * cx + cell_x[None, :]).ravel()
    for bins, weights in ((lower_bin, w_lower), (upper_bin, w_upper)):
        flat_idx = flat_cell * num_bins + bins.ravel()
        hist += np.bincount(
            flat_idx, weights=weights.ravel(), minlength=cy * cx * num_bins
        ).reshape(cy, cx, num_bins)
    return hist


def _normalize_block(v, clip):
    v = v / np.sqrt(np.sum(v * v) + _EPS)
    v = np.minimum(v, clip)
    return v / np.sqrt(np.sum(v * v) + _EPS)


def hog_descriptor(img: np.ndarray, cfg: HogConfig = HogConfig()) -> np.ndarray:
    """Full descriptor of a grayscale image with intensities in [0, 1]."""
    cfg.descriptor_length  # validates that at least one block fits
    width, height = cfg.resize_to
    img = resize_bilinear(np.asarray(img, dtype=np.float64), width, height)
    magnitude, orientation = gradients(img)
    hist = _cell_histograms(magnitude, orientation, cfg.cell_size, cfg.num_bins)
    cy, cx = hist.shape[:2]
    nby = cy - cfg.block_size + 1
    nbx = cx - cfg.block_size + 1
    blocks = []
    for by in range(nby):
        for bx in range(nbx):
            block = hist[by : by + cfg.block_size, bx : bx + cfg.block_size].ravel()
            blocks.append(_normalize_block(block, cfg.clip))
    return np.concatenate(blocks)


def hog_feature(image_id: str, img: np.ndarray, cfg: HogConfig = HogConfig()) -> FeatureVector:
    return FeatureVector(id=image_id, values=hog_descriptor(img, cfg))
