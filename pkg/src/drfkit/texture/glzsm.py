"""Gray-level size zone matrix over 26-connected zones."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..errors import RegionError
from .quantize import QuantizedGrid

GLZSM_FEATURES = (
    "glzsm_small_zone_emphasis",
    "glzsm_large_zone_emphasis",
    "glzsm_low_gray_level_zone_emphasis",
    "glzsm_high_gray_level_zone_emphasis",
    "glzsm_small_zone_low_gray_emphasis",
    "glzsm_small_zone_high_gray_emphasis",
    "glzsm_large_zone_low_gray_emphasis",
    "glzsm_large_zone_high_gray_emphasis",
    "glzsm_gray_level_non_uniformity",
    "glzsm_zone_size_non_uniformity",
    "glzsm_zone_size_percentage",
)

_CONNECTIVITY = np.ones((3, 3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class Glzsm:
    """``zones[i, s-1]`` counts zones of gray level ``i+1`` and size ``s``."""

    zones: np.ndarray
    n_voxels: int

    @property
    def max_size(self) -> int:
        return self.zones.shape[1]


def compute_glzsm(q: QuantizedGrid) -> Glzsm:
    if not q.mask.any():
        raise RegionError("feature region is empty")
    rows = {}
    max_size = 1
    for level in np.unique(q.values[q.mask]):
        labels, n_zones = ndimage.label(q.mask & (q.values == level), structure=_CONNECTIVITY)
        sizes = np.bincount(labels.ravel())[1:]
        rows[int(level)] = np.bincount(sizes)
        max_size = max(max_size, int(sizes.max()))
    zones = np.zeros((q.levels, max_size))
    for level, counts in rows.items():
        zones[level - 1, : len(counts) - 1] = counts[1:]
    return Glzsm(zones, int(q.mask.sum()))


def glzsm_features(z: Glzsm) -> np.ndarray:
    Z = z.zones
    n_zones = Z.sum()
    i2 = np.arange(1, Z.shape[0] + 1, dtype=np.float64)[:, None] ** 2
    s2 = np.arange(1, Z.shape[1] + 1, dtype=np.float64)[None, :] ** 2
    return np.array(
        [
            np.sum(Z / s2),
            np.sum(Z * s2),
            np.sum(Z / i2),
            np.sum(Z * i2),
            np.sum(Z / (i2 * s2)),
            np.sum(Z * i2 / s2),
            np.sum(Z * s2 / i2),
            np.sum(Z * i2 * s2),
            np.sum(Z.sum(axis=1) ** 2),
            np.sum(Z.sum(axis=0) ** 2),
            n_zones,
        ]
    ) / np.array([n_zones] * 10 + [z.n_voxels])
