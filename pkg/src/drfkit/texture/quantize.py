from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import RegionError
from ..volume_io import RoiMask


@dataclass(frozen=True, eq=False)
class QuantizedGrid:
    """Integer gray levels ``1..levels`` inside ``mask``; 0 everywhere else."""

    values: np.ndarray
    mask: np.ndarray
    levels: int = 32

    @property
    def dims(self):
        return tuple(self.values.shape)


def mask_bits(mask) -> np.ndarray:
    return mask.bits if isinstance(mask, RoiMask) else np.asarray(mask, dtype=bool)


def region_values(grid, mask) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    bits = mask_bits(mask)
    if bits.shape != grid.shape:
        raise RegionError(f"mask shape {bits.shape} differs from grid shape {grid.shape}")
    if not bits.any():
        raise RegionError("feature region is empty")
    return grid[bits]


def quantize(grid, mask, levels: int = 32) -> QuantizedGrid:
    """Uniform min-max binning of the in-mask values onto ``1..levels``.

    ``q = 1 + floor((v - min) / (max - min) * levels)`` clamped to
    ``[1, levels]``; a constant region maps entirely to level 1.
    """
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")
    grid = np.asarray(grid, dtype=np.float64)
    vals = region_values(grid, mask)
    bits = mask_bits(mask)
    lo, hi = vals.min(), vals.max()
    q = np.zeros(grid.shape, dtype=np.int64)
    if hi > lo:
        binned = 1 + np.floor((vals - lo) / (hi - lo) * levels)
        q[bits] = np.clip(binned, 1, levels).astype(np.int64)
    else:
        q[bits] = 1
    return QuantizedGrid(q, bits.copy(), int(levels))


def crop_to_mask(q: QuantizedGrid) -> QuantizedGrid:
    """Restrict to the mask's bounding box; statistics are unchanged."""
    idx = np.nonzero(q.mask)
    sl = tuple(slice(i.min(), i.max() + 1) for i in idx)
    return QuantizedGrid(q.values[sl], q.mask[sl], q.levels)
