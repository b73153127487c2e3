"""Neighbourhood gray-tone difference matrix, 26-connected in 3D."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import RegionError
from .quantize import QuantizedGrid

COARSENESS_EPS = 1e-12
COARSENESS_CAP = 1e12

NGTDM_FEATURES = (
    "ngtdm_coarseness",
    "ngtdm_contrast",
    "ngtdm_busyness",
    "ngtdm_complexity",
    "ngtdm_strength",
)

NEIGHBOUR_OFFSETS = tuple(o for o in itertools.product((-1, 0, 1), repeat=3) if o != (0, 0, 0))


@dataclass(frozen=True, eq=False)
class Ngtdm:
    s: np.ndarray  # per level, sum of |level - neighbourhood mean|
    n: np.ndarray  # per level, voxels with at least one in-mask neighbour
    n_total: int


def compute_ngtdm(q: QuantizedGrid) -> Ngtdm:
    if not q.mask.any():
        raise RegionError("feature region is empty")
    G = q.levels
    X, Y, Z = q.values.shape
    vals = np.pad(np.where(q.mask, q.values, 0).astype(np.float64), 1)
    inside = np.pad(q.mask, 1).astype(np.float64)
    total = np.zeros(q.values.shape)
    count = np.zeros(q.values.shape)
    for dx, dy, dz in NEIGHBOUR_OFFSETS:
        sl = (slice(1 + dx, 1 + dx + X), slice(1 + dy, 1 + dy + Y), slice(1 + dz, 1 + dz + Z))
        total += vals[sl]
        count += inside[sl]

    valid = q.mask & (count > 0)
    level = q.values[valid]
    dev = np.abs(level - total[valid] / count[valid])
    n = np.bincount(level - 1, minlength=G).astype(np.float64)
    s = np.bincount(level - 1, weights=dev, minlength=G)
    return Ngtdm(s, n, int(valid.sum()))


def ngtdm_features(m: Ngtdm) -> np.ndarray:
    """coarseness, contrast, busyness, complexity, strength."""
    if m.n_total == 0:
        return np.array([COARSENESS_CAP, 0.0, 0.0, 0.0, 0.0])
    p = m.n / m.n_total
    ps = p * m.s
    coarseness = min(1.0 / (COARSENESS_EPS + ps.sum()), COARSENESS_CAP)

    present = p > 0
    n_levels = int(present.sum())
    if n_levels <= 1:
        return np.array([coarseness, 0.0, 0.0, 0.0, 0.0])

    lv = np.arange(1, len(p) + 1, dtype=np.float64)[present]
    p, s, ps = p[present], m.s[present], ps[present]
    diff = lv[:, None] - lv[None, :]
    pp = p[:, None] * p[None, :]

    contrast = np.sum(pp * diff**2) / (n_levels * (n_levels - 1)) * s.sum() / m.n_total

    ip = lv * p
    denom = np.abs(ip[:, None] - ip[None, :]).sum()
    busyness = ps.sum() / denom if denom > 0 else 0.0

    complexity = np.sum(np.abs(diff) * (ps[:, None] + ps[None, :]) / (p[:, None] + p[None, :])) / m.n_total

    s_sum = s.sum()
    strength = np.sum((p[:, None] + p[None, :]) * diff**2) / s_sum if s_sum > 0 else 0.0
    return np.array([coarseness, contrast, busyness, complexity, strength])
