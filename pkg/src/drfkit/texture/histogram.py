from __future__ import annotations

import numpy as np

from .quantize import region_values

HISTOGRAM_BINS = 256


def histogram_features(grid, mask, bins: int = HISTOGRAM_BINS) -> np.ndarray:
    """mean, variance, skewness, kurtosis, energy, entropy of the in-mask values.

    Moments are population moments of the raw values; kurtosis is not excess.
    Energy and entropy (base 2) come from a ``bins``-bin min-max histogram.
    """
    v = region_values(grid, mask)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.array([lo, 0.0, 0.0, 0.0, 1.0, 0.0])

    mean = v.mean()
    d = v - mean
    var = np.mean(d * d)
    skew = np.mean(d**3) / var**1.5
    kurt = np.mean(d**4) / var**2

    idx = np.clip(np.floor((v - lo) / (hi - lo) * bins), 0, bins - 1).astype(np.int64)
    p = np.bincount(idx, minlength=bins) / v.size
    p = p[p > 0]
    energy = np.sum(p * p)
    entropy = -np.sum(p * np.log2(p))
    return np.array([mean, var, skew, kurt, energy, entropy])
