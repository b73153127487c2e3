from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..conv3d import NetworkWeights, downsample_mask, forward_features, init_seeded_weights, load_weights
from ..errors import DrfError, ShapeError
from ..texture import FEATURE_NAMES, N_FEATURES, compute_drf, feature_vector
from ..volume_io import preprocess, read_mask, read_volume
from .config import ManifestRow, RunConfig

log = logging.getLogger(__name__)

KINDS = ("SRF", "DRF")


@dataclass(frozen=True, eq=False)
class FeatureTable:
    patient_ids: tuple[str, ...]
    srf: np.ndarray  # (patients, 41)
    drf: np.ndarray

    def __getitem__(self, kind: str) -> np.ndarray:
        return {"SRF": self.srf, "DRF": self.drf}[kind]

    def __len__(self):
        return len(self.patient_ids)

    def subset(self, patient_ids) -> "FeatureTable":
        pos = {p: i for i, p in enumerate(self.patient_ids)}
        idx = [pos[p] for p in patient_ids]
        return FeatureTable(tuple(patient_ids), self.srf[idx], self.drf[idx])


def network_weights(config: RunConfig) -> NetworkWeights:
    if config.weights is not None:
        return load_weights(config.weights)
    return init_seeded_weights(config.seed)


def patient_features(row: ManifestRow, weights: NetworkWeights, config: RunConfig):
    """SRF and DRF 41-vectors for one patient."""
    vol = read_volume(row.volume_path)
    mask = read_mask(row.mask_path)
    if mask.dims != vol.dims:
        raise ShapeError(f"mask dims {mask.dims} differ from volume dims {vol.dims}")
    gray, masked, mask = preprocess(vol, mask, config.voxel_mm, config.gray_levels, config.input_dims)
    srf = feature_vector(gray.data, mask, config.matrix_levels)

    layer1, layer2 = forward_features(masked, weights)
    n = config.input_size
    mask1 = downsample_mask(mask, n // layer1.shape[1])
    mask2 = downsample_mask(mask, n // layer2.shape[1])
    drf = compute_drf(layer1, layer2, mask1, mask2, config.matrix_levels)
    return srf, drf


def _worker(args):
    row, weights, config = args
    try:
        return patient_features(row, weights, config), None
    except (DrfError, OSError, ValueError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def extract_cohort_features(rows, config: RunConfig, weights: NetworkWeights | None = None):
    """Features for every readable patient.

    Returns ``(table, errors)`` where ``errors`` lists ``(patient_id, message)``
    for patients that failed; they are excluded from the table.
    """
    weights = weights if weights is not None else network_weights(config)
    jobs = [(row, weights, config) for row in rows]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_worker, jobs))
    else:
        results = [_worker(job) for job in jobs]

    ids, srf, drf, errors = [], [], [], []
    for row, (features, err) in zip(rows, results):
        if err is not None:
            log.warning("patient %s skipped: %s", row.patient_id, err)
            errors.append((row.patient_id, err))
            continue
        ids.append(row.patient_id)
        srf.append(features[0])
        drf.append(features[1])
    shape = (0, N_FEATURES)
    table = FeatureTable(
        tuple(ids),
        np.array(srf) if srf else np.zeros(shape),
        np.array(drf) if drf else np.zeros(shape),
    )
    return table, errors


def write_feature_table(table: FeatureTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patient_id", "kind", *FEATURE_NAMES])
        for i, pid in enumerate(table.patient_ids):
            for kind in KINDS:
                w.writerow([pid, kind, *(repr(float(v)) for v in table[kind][i])])


def read_feature_table(path) -> FeatureTable:
    rows = {kind: {} for kind in KINDS}
    order = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["patient_id", "kind", *FEATURE_NAMES]:
            raise ValueError(f"{path}: header does not match the 41-feature layout")
        for rec in reader:
            pid, kind = rec[0], rec[1]
            if kind not in rows:
                raise ValueError(f"{path}: unknown kind {kind!r}")
            if pid not in rows["SRF"] and pid not in rows["DRF"]:
                order.append(pid)
            rows[kind][pid] = [float(v) for v in rec[2:]]
    missing = [p for p in order if p not in rows["SRF"] or p not in rows["DRF"]]
    if missing:
        raise ValueError(f"{path}: patients missing an SRF or DRF row: {missing}")
    return FeatureTable(
        tuple(order),
        np.array([rows["SRF"][p] for p in order]).reshape(-1, N_FEATURES),
        np.array([rows["DRF"][p] for p in order]).reshape(-1, N_FEATURES),
    )


def write_error_ledger(errors, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patient_id", "error"])
        w.writerows(errors)


def read_error_ledger(path) -> list[tuple[str, str]]:
    path = Path(path)
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [tuple(r) for r in reader]
