"""Univariate survival analysis: imputation, median splits, Kaplan-Meier,
log-rank with hazard ratios, and Holm step-down correction."""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

__all__ = [
    "SurvivalRecord",
    "KmCurve",
    "LogRankResult",
    "DegenerateSplit",
    "ScreenRow",
    "impute_censored",
    "median_split",
    "km_estimate",
    "logrank_test",
    "holm_bonferroni",
    "feature_screen",
]

SIGNIFICANCE = 0.05


@dataclass(frozen=True)
class SurvivalRecord:
    patient_id: str
    time_days: float
    event: int  # 1 = death observed, 0 = censored (alive at last visit)

    def __post_init__(self):
        if not self.time_days >= 0:
            raise ValueError(f"{self.patient_id}: survival time must be >= 0, got {self.time_days}")
        if self.event not in (0, 1):
            raise ValueError(f"{self.patient_id}: event must be 0 or 1, got {self.event}")


def impute_censored(records):
    """Replace each censored time by the mean time of deaths at or after it.

    A censored record with no later death keeps its own time. Event flags are
    left untouched; imputed times are meant for class labelling only.
    """
    records = list(records)
    if not records:
        raise ValueError("no survival records")
    deaths = np.array([r.time_days for r in records if r.event == 1], dtype=np.float64)
    out = []
    for r in records:
        if r.event == 0:
            later = deaths[deaths >= r.time_days]
            if later.size:
                r = replace(r, time_days=float(later.mean()))
        out.append(r)
    return out


class DegenerateSplit(ValueError):
    """A median split left one group empty."""


def median_split(values):
    """Split at the sample median: ``True`` (high) iff value >= median.

    Returns ``(high, threshold)``; raises :class:`DegenerateSplit` when either
    group would be empty.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise ValueError("median split needs at least two values")
    threshold = float(np.median(values))
    high = values >= threshold
    if high.all() or not high.any():
        raise DegenerateSplit(f"all values fall on one side of the median {threshold}")
    return high, threshold


@dataclass(frozen=True)
class KmCurve:
    """Product-limit survival curve; ``survival[k]`` holds from ``times[k]`` on.

    The first point is ``t = 0, S = 1``.
    """

    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    median_survival: float | None

    def at(self, t: float) -> float:
        k = np.searchsorted(self.times, t, side="right") - 1
        return float(self.survival[max(k, 0)])


def km_estimate(times, events) -> KmCurve:
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=np.int64)
    if times.size == 0:
        raise ValueError("no survival records")
    event_times = np.unique(times[events == 1])
    ts = [0.0]
    ss = [1.0]
    ns = [int(times.size)]
    # Exact rational product, rounded once per step, so hand cases match exactly.
    s = Fraction(1)
    median = None
    for t in event_times:
        n = int(np.sum(times >= t))
        d = int(np.sum((times == t) & (events == 1)))
        s *= Fraction(n - d, n)
        ts.append(float(t))
        ss.append(float(s))
        ns.append(n)
        if median is None and s <= Fraction(1, 2):
            median = float(t)
    return KmCurve(np.array(ts), np.array(ss), np.array(ns), median)


@dataclass(frozen=True)
class LogRankResult:
    chi2: float
    p_value: float
    hazard_ratio: float  # nan when undefined
    ci_low: float
    ci_high: float
    observed: tuple[float, float]
    expected: tuple[float, float]

    @property
    def hr_defined(self) -> bool:
        return math.isfinite(self.hazard_ratio)


def logrank_test(times_a, events_a, times_b, events_b) -> LogRankResult:
    """Two-group log-rank test; HR of group A relative to B from O/E ratios.

    The 95% CI is ``exp(ln HR +/- 1.96 sqrt(1/E_a + 1/E_b))``. With no events
    (zero variance) p is 1 and the HR is NaN.
    """
    ta = np.asarray(times_a, dtype=np.float64)
    ea = np.asarray(events_a, dtype=np.int64)
    tb = np.asarray(times_b, dtype=np.float64)
    eb = np.asarray(events_b, dtype=np.int64)
    if ta.size == 0 or tb.size == 0:
        raise ValueError("both groups must be non-empty")

    event_times = np.unique(np.concatenate([ta[ea == 1], tb[eb == 1]]))
    # Risk-set sizes: subjects with time >= t, via sorted-array counting.
    sa, sb = np.sort(ta), np.sort(tb)
    n_a = (sa.size - np.searchsorted(sa, event_times, side="left")).astype(np.float64)
    n_b = (sb.size - np.searchsorted(sb, event_times, side="left")).astype(np.float64)
    da_times, da_counts = np.unique(ta[ea == 1], return_counts=True)
    db_times, db_counts = np.unique(tb[eb == 1], return_counts=True)
    d_a = np.zeros(event_times.size)
    d_b = np.zeros(event_times.size)
    d_a[np.searchsorted(event_times, da_times)] = da_counts
    d_b[np.searchsorted(event_times, db_times)] = db_counts

    n = n_a + n_b
    d = d_a + d_b
    exp_a = np.sum(d * n_a / n)
    exp_b = np.sum(d * n_b / n)
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.where(n > 1, d * (n_a * n_b) * (n - d) / (n * n * (n - 1)), 0.0)
    var = float(np.sum(v))
    obs_a = float(d_a.sum())
    obs_b = float(d_b.sum())

    if var <= 0:
        chi2, p = 0.0, 1.0
    else:
        # O_a - E_a written antisymmetrically so swapping groups only flips its sign.
        diff = float(np.sum((d_a * n_b - d_b * n_a) / n))
        chi2 = diff * diff / var
        p = float(stats.chi2.sf(chi2, 1))
    p = min(max(p, np.nextafter(0, 1)), 1.0)

    hr = lo = hi = math.nan
    if obs_a > 0 and obs_b > 0 and exp_a > 0 and exp_b > 0:
        hr = (obs_a / exp_a) / (obs_b / exp_b)
        half = 1.96 * math.sqrt(1.0 / exp_a + 1.0 / exp_b)
        lo = math.exp(math.log(hr) - half)
        hi = math.exp(math.log(hr) + half)
    return LogRankResult(chi2, p, hr, lo, hi, (obs_a, obs_b), (float(exp_a), float(exp_b)))


def holm_bonferroni(p_values) -> np.ndarray:
    """Holm step-down adjusted p-values, returned in input order."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.size == 0:
        return p.copy()
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = np.minimum(1.0, (m - np.arange(m)) * p[order])
    adjusted = np.maximum.accumulate(scaled)
    out = np.empty(m)
    out[order] = adjusted
    return out


@dataclass(frozen=True)
class ScreenRow:
    kind: str
    feature: str
    raw_p: float
    holm_p: float
    neg_log10_p: float
    significant: bool
    logrank: LogRankResult | None  # None for a degenerate split
    threshold: float | None


def feature_screen(tables, times, events, feature_names, alpha: float = SIGNIFICANCE):
    """Median-split log-rank screen over every (kind, feature) column.

    ``tables`` maps a descriptor kind (``"SRF"``, ``"DRF"``) to a
    ``(patients, features)`` array aligned with ``times``/``events``. Holm
    correction runs jointly over all columns. The log-rank HR is that of the
    high group relative to the low group.
    """
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=np.int64)
    cols = []
    for kind, table in tables.items():
        table = np.asarray(table, dtype=np.float64)
        if table.shape != (times.size, len(feature_names)):
            raise ValueError(f"{kind}: table shape {table.shape} does not match {times.size} patients")
        for k, name in enumerate(feature_names):
            try:
                high, thr = median_split(table[:, k])
            except DegenerateSplit:
                cols.append((kind, name, 1.0, None, None))
                continue
            res = logrank_test(times[high], events[high], times[~high], events[~high])
            cols.append((kind, name, res.p_value, res, thr))

    raw = np.array([c[2] for c in cols])
    holm = holm_bonferroni(raw)
    return [
        ScreenRow(kind, name, float(p), float(h), float(-np.log10(p)), bool(h < alpha), res, thr)
        for (kind, name, p, res, thr), h in zip(cols, holm)
    ]
