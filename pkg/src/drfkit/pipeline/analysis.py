from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import JoinError
from ..learn import (
    AucComparison,
    CvReport,
    ImportanceReport,
    chisquare_auc_compare,
    cross_validate,
    oob_importance,
    train_forest,
)
from ..survival import KmCurve, LogRankResult, ScreenRow, feature_screen, impute_censored, km_estimate, logrank_test
from ..texture import FEATURE_NAMES
from .config import ManifestRow, RunConfig
from .extract import KINDS, FeatureTable


@dataclass(frozen=True, eq=False)
class GroupComparison:
    """Two KM curves and their log-rank test (group A relative to group B)."""

    name: str
    labels: tuple[str, str]
    curves: tuple[KmCurve | None, KmCurve | None]  # None for an empty group
    logrank: LogRankResult | None  # None when a group is empty
    sizes: tuple[int, int]


def compare_groups(name, in_a, times, events, labels) -> GroupComparison:
    in_a = np.asarray(in_a, dtype=bool)
    sizes = (int(in_a.sum()), int((~in_a).sum()))
    curves = tuple(
        km_estimate(times[g], events[g]) if g.any() else None for g in (in_a, ~in_a)
    )
    res = None
    if all(sizes):
        res = logrank_test(times[in_a], events[in_a], times[~in_a], events[~in_a])
    return GroupComparison(name, tuple(labels), curves, res, sizes)


def align(table: FeatureTable, rows) -> tuple[FeatureTable, list[ManifestRow]]:
    """Restrict both sides to shared patients in manifest order.

    Patients in the table but absent from the manifest are an error; manifest
    patients without features (failed extraction) are dropped.
    """
    by_id = {r.patient_id: r for r in rows}
    orphans = [p for p in table.patient_ids if p not in by_id]
    if orphans:
        raise JoinError(f"feature table has patients missing from the manifest: {orphans}", orphans)
    present = set(table.patient_ids)
    kept = [r for r in rows if r.patient_id in present]
    if not kept:
        raise JoinError("no patient appears in both the feature table and the manifest")
    return table.subset([r.patient_id for r in kept]), kept


def _survival_arrays(rows):
    times = np.array([r.survival_days for r in rows], dtype=np.float64)
    events = np.array([r.event for r in rows], dtype=np.int64)
    return times, events


@dataclass(frozen=True, eq=False)
class UnivariateResult:
    screen: list[ScreenRow]
    significant_km: list[GroupComparison]


def run_univariate(table: FeatureTable, rows) -> UnivariateResult:
    """Screen all 82 (kind, feature) columns; KM curves for the significant ones."""
    table, rows = align(table, rows)
    times, events = _survival_arrays(rows)
    screen = feature_screen({k: table[k] for k in KINDS}, times, events, FEATURE_NAMES)
    km = []
    for row in screen:
        if row.significant:
            values = table[row.kind][:, FEATURE_NAMES.index(row.feature)]
            high = values >= row.threshold
            km.append(compare_groups(f"{row.kind}_{row.feature}", high, times, events, ("high", "low")))
    return UnivariateResult(screen, km)


@dataclass(frozen=True, eq=False)
class ClassificationResult:
    patient_ids: tuple[str, ...]
    labels: np.ndarray  # 1 = long-term survivor (imputed time >= median)
    median_days: float
    cv: dict  # kind -> CvReport
    comparison: AucComparison
    importance: ImportanceReport
    importance_names: tuple[tuple[str, str], ...]  # (kind, feature) per combined column
    predicted_km: dict  # kind -> GroupComparison of predicted short vs long


def survival_labels(rows):
    """Long-term (1) vs short-term (0) from imputed times against their median."""
    imputed = impute_censored([r.record for r in rows])
    t = np.array([r.time_days for r in imputed])
    median = float(np.median(t))
    return (t >= median).astype(np.int64), median


def run_classification(table: FeatureTable, rows, config: RunConfig) -> ClassificationResult:
    table, rows = align(table, rows)
    times, events = _survival_arrays(rows)
    y, median = survival_labels(rows)
    params = config.forest

    cv: dict[str, CvReport] = {kind: cross_validate(table[kind], y, params, config.folds) for kind in KINDS}
    comparison = chisquare_auc_compare(cv["DRF"].predicted, cv["SRF"].predicted, y)

    combined = np.hstack([table["SRF"], table["DRF"]])
    names = tuple((kind, f) for kind in KINDS for f in FEATURE_NAMES)
    model = train_forest(combined, y, params)
    importance = oob_importance(model, combined, y)

    predicted_km = {
        kind: compare_groups(f"predicted_{kind}", cv[kind].predicted == 0, times, events, ("short", "long"))
        for kind in KINDS
    }
    return ClassificationResult(
        tuple(table.patient_ids), y, median, cv, comparison, importance, names, predicted_km
    )
