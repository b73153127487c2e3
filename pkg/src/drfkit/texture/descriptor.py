"""The 41-element texture descriptor and its deep (feature-map) variant."""

from __future__ import annotations

import numpy as np

from ..errors import RegionError
from .glcm import GLCM_FEATURES, aggregate_glcm_features
from .glzsm import GLZSM_FEATURES, compute_glzsm, glzsm_features
from .histogram import histogram_features
from .ngtdm import NGTDM_FEATURES, compute_ngtdm, ngtdm_features
from .quantize import crop_to_mask, mask_bits, quantize

HISTOGRAM_FEATURES = (
    "hist_mean",
    "hist_variance",
    "hist_skewness",
    "hist_kurtosis",
    "hist_energy",
    "hist_entropy",
)

# Index positions are part of the output contract; never reorder.
FEATURE_NAMES = HISTOGRAM_FEATURES + GLCM_FEATURES + NGTDM_FEATURES + GLZSM_FEATURES
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 41

FAMILIES = {
    "histogram": slice(0, 6),
    "glcm": slice(6, 25),
    "ngtdm": slice(25, 30),
    "glzsm": slice(30, 41),
}


def feature_vector(grid, mask, levels: int = 32) -> np.ndarray:
    """Histogram block on raw values, matrix blocks on ``levels`` gray levels."""
    grid = np.asarray(grid, dtype=np.float64)
    bits = mask_bits(mask)
    hist = histogram_features(grid, bits)
    q = crop_to_mask(quantize(grid, bits, levels))
    out = np.concatenate(
        [
            hist,
            aggregate_glcm_features(q),
            ngtdm_features(compute_ngtdm(q)),
            glzsm_features(compute_glzsm(q)),
        ]
    )
    if not np.all(np.isfinite(out)):
        raise RegionError("non-finite texture feature")
    return out


def compute_drf(layer1, layer2, mask1, mask2, levels: int = 32) -> np.ndarray:
    """Mean of the per-channel 41-vectors across both layers' feature maps."""
    vectors = []
    for name, stack, mask in (("layer 1", layer1, mask1), ("layer 2", layer2, mask2)):
        bits = mask_bits(mask)
        if not bits.any():
            raise RegionError(f"{name}: downsampled ROI is empty")
        stack = np.asarray(stack)
        if stack.shape[1:] != bits.shape:
            raise RegionError(f"{name}: mask shape {bits.shape} differs from map shape {stack.shape[1:]}")
        for channel in stack:
            try:
                vectors.append(feature_vector(channel, bits, levels))
            except RegionError as exc:
                raise RegionError(f"{name}: {exc}") from exc
    return np.mean(vectors, axis=0)
