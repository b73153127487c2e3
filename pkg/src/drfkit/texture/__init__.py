"""The 41 texture quantifiers: histogram, GLCM, NGTDM and GLZSM."""

from .descriptor import FAMILIES, FEATURE_NAMES, HISTOGRAM_FEATURES, N_FEATURES, compute_drf, feature_vector
from .glcm import (
    DIRECTIONS,
    DISTANCES,
    GLCM_FEATURES,
    aggregate_glcm_features,
    compute_glcm,
    glcm_counts,
    glcm_features,
    glcm_stack,
)
from .glzsm import GLZSM_FEATURES, Glzsm, compute_glzsm, glzsm_features
from .histogram import histogram_features
from .ngtdm import COARSENESS_CAP, COARSENESS_EPS, NGTDM_FEATURES, Ngtdm, compute_ngtdm, ngtdm_features
from .quantize import QuantizedGrid, crop_to_mask, quantize

__all__ = [
    "FAMILIES",
    "FEATURE_NAMES",
    "N_FEATURES",
    "HISTOGRAM_FEATURES",
    "GLCM_FEATURES",
    "NGTDM_FEATURES",
    "GLZSM_FEATURES",
    "DIRECTIONS",
    "DISTANCES",
    "COARSENESS_EPS",
    "COARSENESS_CAP",
    "QuantizedGrid",
    "Ngtdm",
    "Glzsm",
    "quantize",
    "crop_to_mask",
    "histogram_features",
    "glcm_counts",
    "compute_glcm",
    "glcm_stack",
    "glcm_features",
    "aggregate_glcm_features",
    "compute_ngtdm",
    "ngtdm_features",
    "compute_glzsm",
    "glzsm_features",
    "feature_vector",
    "compute_drf",
]
