"""HOG feature maps, cosine tapering and compact descriptors.

A feature map is a ``float64`` array of shape ``(channels, rows, cols)`` in
cell units. :func:`hog` returns ``n_orientations + 4`` channels: the
unsigned orientation histogram of each cell averaged over the four 2x2
blocks that contain it, followed by four gradient-energy channels (one per
block position), in the layout popularised by Felzenszwalb's HOG variant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

# number of extra channels appended to the orientation bins
N_ENERGY_CHANNELS = 4
HYS_CLIP = 0.2
# added to squared block norms; small enough that block normalization stays
# scale invariant to ~1e-8 on realistic gradient energies
NORM_EPS = 1e-12
ORIENT_SCALE = 0.5
ENERGY_SCALE = 0.2357
DESCRIPTOR_GRID = 8


def gradients(patch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central differences with edge replication (``[-1, 0, 1]`` filter)."""
    p = np.pad(np.asarray(patch, dtype=np.float64), 1, mode="edge")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    return gx, gy


def cell_histograms(patch: np.ndarray, cell_size: int = 4, n_orientations: int = 9) -> np.ndarray:
    """Unnormalized per-cell orientation histograms, shape ``(rows, cols, n_orientations)``.

    Every pixel votes its gradient magnitude bilinearly into the two nearest
    orientation bins and the four nearest cell centres; votes that would land
    outside the grid go to the nearest border cell. Pixels beyond the last
    full cell are ignored.
    """
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim != 2:
        raise DimensionError("HOG needs a 2-D grayscale patch")
    if n_orientations < 2:
        raise ValueError("n_orientations must be >= 2")
    rows, cols = patch.shape[0] // cell_size, patch.shape[1] // cell_size
    if rows < 1 or cols < 1:
        raise DimensionError(f"patch {patch.shape} smaller than one {cell_size}px cell")

    gx, gy = gradients(patch)
    gx = gx[: rows * cell_size, : cols * cell_size]
    gy = gy[: rows * cell_size, : cols * cell_size]
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)

    fo = theta * (n_orientations / np.pi) - 0.5
    o0f = np.floor(fo)
    wo1 = fo - o0f
    o0 = np.mod(o0f.astype(np.int64), n_orientations)
    o1 = np.mod(o0 + 1, n_orientations)

    ys = (np.arange(rows * cell_size) + 0.5) / cell_size - 0.5
    xs = (np.arange(cols * cell_size) + 0.5) / cell_size - 0.5
    y0f = np.floor(ys)
    x0f = np.floor(xs)
    wy1 = (ys - y0f)[:, None]
    wx1 = (xs - x0f)[None, :]
    y0 = np.clip(y0f.astype(np.int64), 0, rows - 1)[:, None]
    y1 = np.clip(y0f.astype(np.int64) + 1, 0, rows - 1)[:, None]
    x0 = np.clip(x0f.astype(np.int64), 0, cols - 1)[None, :]
    x1 = np.clip(x0f.astype(np.int64) + 1, 0, cols - 1)[None, :]

    size = rows * cols * n_orientations
    hist = np.zeros(size)
    for cy, wy in ((y0, 1.0 - wy1), (y1, wy1)):
        for cx, wx in ((x0, 1.0 - wx1), (x1, wx1)):
            base = (cy * cols + cx) * n_orientations
            w = mag * wy * wx
            hist += np.bincount((base + o0).ravel(), (w * (1.0 - wo1)).ravel(), minlength=size)
            hist += np.bincount((base + o1).ravel(), (w * wo1).ravel(), minlength=size)
    return hist.reshape(rows, cols, n_orientations)


def _l2hys(v: np.ndarray) -> np.ndarray:
    v = v / np.sqrt(np.sum(v * v, axis=-1, keepdims=True) + NORM_EPS)
    v = np.minimum(v, HYS_CLIP)
    return v / np.sqrt(np.sum(v * v, axis=-1, keepdims=True) + NORM_EPS)


def normalize_cells(hist: np.ndarray) -> np.ndarray:
    """Block-normalize a cell-histogram grid into a ``(n + 4, rows, cols)`` feature map."""
    rows, cols, n = hist.shape
    padded = np.pad(hist, ((1, 1), (1, 1), (0, 0)), mode="edge")
    # block (i, j) spans padded cells (i..i+1, j..j+1)
    blocks = np.concatenate(
        [padded[:-1, :-1], padded[:-1, 1:], padded[1:, :-1], padded[1:, 1:]], axis=-1
    )
    blocks = _l2hys(blocks)
    tl, tr, bl, br = (blocks[..., k * n:(k + 1) * n] for k in range(4))
    # cell (r, c) sits at padded (r+1, c+1): bottom-right of block (r, c),
    # bottom-left of (r, c+1), top-right of (r+1, c), top-left of (r+1, c+1)
    parts = [
        br[:rows, :cols],
        bl[:rows, 1:cols + 1],
        tr[1:rows + 1, :cols],
        tl[1:rows + 1, 1:cols + 1],
    ]
    orient = ORIENT_SCALE * (parts[0] + parts[1] + parts[2] + parts[3])
    energy = [ENERGY_SCALE * p.sum(axis=-1) for p in parts]
    out = np.empty((n + N_ENERGY_CHANNELS, rows, cols))
    out[:n] = np.moveaxis(orient, -1, 0)
    out[n:] = np.stack(energy)
    return out


def hog(patch: np.ndarray, cell_size: int = 4, n_orientations: int = 9) -> np.ndarray:
    """HOG feature map of a grayscale patch: ``(n_orientations + 4, h // cell, w // cell)``."""
    return normalize_cells(cell_histograms(patch, cell_size, n_orientations))


def n_channels(n_orientations: int = 9) -> int:
    return n_orientations + N_ENERGY_CHANNELS


def cosine_window(height: int, width: int) -> np.ndarray:
    """Outer product of Hann windows. A dimension of length 1 gets the value 1."""
    if height < 1 or width < 1:
        raise ValueError("window dimensions must be >= 1")
    return np.outer(np.hanning(height), np.hanning(width))


def apply_window(fm: np.ndarray, win: np.ndarray) -> np.ndarray:
    if fm.shape[-2:] != win.shape:
        raise DimensionError(f"window {win.shape} does not match feature map {fm.shape}")
    return fm * win


@dataclass(frozen=True)
class Descriptor:
    """Unit-norm pooled feature vector. ``is_zero`` marks an all-zero input."""

    values: np.ndarray
    is_zero: bool = False

    def __len__(self):
        return self.values.shape[0]


def _pool_edges(n: int, bins: int) -> np.ndarray:
    return (np.arange(bins) * n) // bins


def pool(fm: np.ndarray, grid: int = DESCRIPTOR_GRID) -> np.ndarray:
    """Average-pool the spatial axes of ``fm`` to at most ``grid x grid`` cells."""
    _, rows, cols = fm.shape
    out = fm
    if rows > grid:
        edges = _pool_edges(rows, grid)
        counts = np.diff(np.append(edges, rows))
        out = np.add.reduceat(out, edges, axis=1) / counts[None, :, None]
    if cols > grid:
        edges = _pool_edges(cols, grid)
        counts = np.diff(np.append(edges, cols))
        out = np.add.reduceat(out, edges, axis=2) / counts[None, None, :]
    return out


def descriptor(fm: np.ndarray) -> Descriptor:
    """Pool, flatten and L2-normalize a feature map."""
    v = pool(np.asarray(fm, dtype=np.float64)).ravel()
    norm = float(np.sqrt(v @ v))
    if norm == 0.0:
        return Descriptor(np.zeros_like(v), True)
    return Descriptor(v / norm, False)
