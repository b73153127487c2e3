"""Gray-level co-occurrence matrices over the 13 unique 3D directions."""

from __future__ import annotations

import numpy as np

from ..errors import RegionError
from .quantize import QuantizedGrid

DIRECTIONS = (
    (1, 0, 0),
    (0, 1, 0),
    (0, 0, 1),
    (1, 1, 0),
    (1, -1, 0),
    (1, 0, 1),
    (1, 0, -1),
    (0, 1, 1),
    (0, 1, -1),
    (1, 1, 1),
    (1, -1, 1),
    (1, 1, -1),
    (1, -1, -1),
)
DISTANCES = (1, 2, 3, 4)

GLCM_FEATURES = (
    "glcm_angular_second_moment",
    "glcm_contrast",
    "glcm_correlation",
    "glcm_sum_of_squares_variance",
    "glcm_homogeneity",
    "glcm_sum_average",
    "glcm_sum_variance",
    "glcm_sum_entropy",
    "glcm_entropy",
    "glcm_difference_variance",
    "glcm_difference_entropy",
    "glcm_information_correlation_1",
    "glcm_information_correlation_2",
    "glcm_autocorrelation",
    "glcm_dissimilarity",
    "glcm_cluster_shade",
    "glcm_cluster_prominence",
    "glcm_maximum_probability",
    "glcm_inverse_difference",
)


def _pair_slices(shape, offset):
    src, dst = [], []
    for n, d in zip(shape, offset):
        if abs(d) >= n:
            return None
        if d >= 0:
            src.append(slice(0, n - d))
            dst.append(slice(d, n))
        else:
            src.append(slice(-d, n))
            dst.append(slice(0, n + d))
    return tuple(src), tuple(dst)


def glcm_counts(q: QuantizedGrid, direction, distance: int = 1) -> np.ndarray:
    """Symmetric pair counts for ``offset = distance * direction`` (un-normalized)."""
    G = q.levels
    offset = tuple(distance * c for c in direction)
    sl = _pair_slices(q.values.shape, offset)
    if sl is None:
        return np.zeros((G, G))
    src, dst = sl
    valid = q.mask[src] & q.mask[dst]
    a = q.values[src][valid]
    b = q.values[dst][valid]
    counts = np.bincount((a - 1) * G + (b - 1), minlength=G * G).reshape(G, G).astype(np.float64)
    return counts + counts.T


def compute_glcm(q: QuantizedGrid, direction, distance: int = 1) -> np.ndarray | None:
    """Normalized symmetric GLCM, or ``None`` if no in-mask pair exists."""
    counts = glcm_counts(q, direction, distance)
    total = counts.sum()
    if total == 0:
        return None
    return counts / total


def _xlog2x(p):
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log2(p[nz])
    return out


def _weight_table(G):
    """Per-cell weights for the features that are plain sums of f(i, j) * p(i, j)."""
    lv = np.arange(1, G + 1, dtype=np.float64)
    i, j = np.meshgrid(lv, lv, indexing="ij")
    d = np.abs(i - j)
    return np.stack([d**2, 1.0 / (1.0 + d**2), i * j, d, 1.0 / (1.0 + d), i], axis=-1).reshape(G * G, 6)


def glcm_features(P) -> np.ndarray:
    """The 19 Haralick-style statistics of a normalized GLCM.

    Accepts one ``(G, G)`` matrix or a ``(K, G, G)`` stack and returns 19 or
    ``(K, 19)`` values. Gray levels are indexed from 1; entropies are base 2.
    """
    P = np.asarray(P, dtype=np.float64)
    single = P.ndim == 2
    if single:
        P = P[None]
    K, G, _ = P.shape
    flat = P.reshape(K, G * G)

    contrast, homogeneity, autocorr, dissim, inv_diff, mu_x = (flat @ _weight_table(G)).T
    px = P.sum(axis=2)
    py = P.sum(axis=1)
    lv = np.arange(1, G + 1, dtype=np.float64)
    mu_y = py @ lv
    var_x = np.sum((lv[None, :] - mu_x[:, None]) ** 2 * px, axis=1)
    var_y = np.sum((lv[None, :] - mu_y[:, None]) ** 2 * py, axis=1)
    sd = np.sqrt(var_x * var_y)
    correlation = np.divide(autocorr - mu_x * mu_y, sd, out=np.zeros(K), where=sd > 0)
    asm = np.einsum("kn,kn->k", flat, flat)

    # Sum and difference distributions.
    g = np.arange(G)
    p_sum = flat @ np.eye(2 * G - 1)[(g[:, None] + g[None, :]).ravel()]
    p_diff = flat @ np.eye(G)[np.abs(g[:, None] - g[None, :]).ravel()]
    ks = np.arange(2, 2 * G + 1, dtype=np.float64)
    kd = np.arange(G, dtype=np.float64)
    sum_avg = p_sum @ ks
    sum_var = np.sum((ks[None, :] - sum_avg[:, None]) ** 2 * p_sum, axis=1)
    sum_ent = -_xlog2x(p_sum).sum(axis=1)
    diff_avg = p_diff @ kd
    diff_var = np.sum((kd[None, :] - diff_avg[:, None]) ** 2 * p_diff, axis=1)
    diff_ent = -_xlog2x(p_diff).sum(axis=1)

    # Cluster moments depend on i + j only.
    centred = ks[None, :] - (mu_x + mu_y)[:, None]
    shade = np.sum(centred**3 * p_sum, axis=1)
    prominence = np.sum(centred**4 * p_sum, axis=1)

    hxy = -_xlog2x(flat).sum(axis=1)
    hx = -_xlog2x(px).sum(axis=1)
    hy = -_xlog2x(py).sum(axis=1)
    # Both HXY1 and HXY2 reduce to HX + HY for a joint distribution with these marginals.
    hxy1 = hxy2 = hx + hy
    hmax = np.maximum(hx, hy)
    imc1 = np.divide(hxy - hxy1, hmax, out=np.zeros(K), where=hmax > 0)
    imc2 = np.sqrt(np.clip(1.0 - np.exp(-2.0 * (hxy2 - hxy)), 0.0, 1.0))

    maxprob = flat.max(axis=1)

    out = np.stack(
        [
            asm, contrast, correlation, var_x, homogeneity,
            sum_avg, sum_var, sum_ent, hxy, diff_var, diff_ent,
            imc1, imc2, autocorr, dissim, shade, prominence, maxprob, inv_diff,
        ],
        axis=1,
    )
    return out[0] if single else out


def glcm_stack(q: QuantizedGrid, directions=DIRECTIONS, distances=DISTANCES) -> np.ndarray:
    """All non-empty normalized GLCMs, shape ``(K, G, G)`` with ``K <= 52``."""
    mats = []
    for d in distances:
        for direction in directions:
            m = compute_glcm(q, direction, d)
            if m is not None:
                mats.append(m)
    if not mats:
        return np.zeros((0, q.levels, q.levels))
    return np.stack(mats)


def aggregate_glcm_features(q: QuantizedGrid) -> np.ndarray:
    """Unweighted mean of the 19 features over every non-empty GLCM."""
    stack = glcm_stack(q)
    if len(stack) == 0:
        raise RegionError("no voxel pair inside the region for any of the 52 offsets")
    return glcm_features(stack).mean(axis=0)
