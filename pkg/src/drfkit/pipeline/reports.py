"""Delimited and SVG report writers.

Every number is written with ``repr(float)`` so reruns with the same seed are
byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import DrfError
from ..survival import KmCurve
from .analysis import ClassificationResult, GroupComparison, UnivariateResult
from .config import RunConfig

SCREENING_COLUMNS = ("kind", "feature", "raw_p", "holm_p", "neg_log10_p", "significant")
LOGRANK_COLUMNS = (
    "name", "group_a", "group_b", "n_a", "n_b", "chi2", "p_value",
    "hazard_ratio", "ci_low", "ci_high", "median_a", "median_b",
)


class ReportError(DrfError, OSError):
    pass


def _num(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def _open(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _write_csv(path: Path, header, rows) -> Path:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_screening(result: UnivariateResult, out: Path) -> list[Path]:
    screen = result.screen
    rows = [
        (r.kind, r.feature, _num(r.raw_p), _num(r.holm_p), _num(r.neg_log10_p), int(r.significant))
        for r in screen
    ]
    paths = [_write_csv(out / "screening.csv", SCREENING_COLUMNS, rows)]
    # Long form: one (kind, feature) cell per row, in feature-vector order.
    heat = [(r.kind, r.feature, _num(r.neg_log10_p)) for r in screen]
    paths.append(_write_csv(out / "heatmap.csv", ("kind", "feature", "neg_log10_p"), heat))
    paths += write_km_set(result.significant_km, out / "km_screen")
    return paths


def write_km_curve(curve: KmCurve, path: Path) -> Path:
    rows = zip((_num(t) for t in curve.times), (_num(s) for s in curve.survival), curve.at_risk.tolist())
    return _write_csv(path, ("time", "survival", "at_risk"), rows)


def _logrank_row(cmp: GroupComparison):
    lr = cmp.logrank
    med = [None if c is None else c.median_survival for c in cmp.curves]
    stats_ = (None,) * 5 if lr is None else (lr.chi2, lr.p_value, lr.hazard_ratio, lr.ci_low, lr.ci_high)
    return (cmp.name, *cmp.labels, *cmp.sizes, *(_num(v) for v in stats_), *(_num(m) for m in med))


def write_km_set(comparisons, out: Path) -> list[Path]:
    """Per comparison: one CSV per group plus an SVG; a shared log-rank summary."""
    if not comparisons:
        return []
    paths = []
    for cmp in comparisons:
        for label, curve in zip(cmp.labels, cmp.curves):
            if curve is not None:
                paths.append(write_km_curve(curve, out / f"{cmp.name}_{label}.csv"))
        paths.append(write_km_svg(cmp, out / f"{cmp.name}.svg"))
    paths.append(_write_csv(out / "logrank.csv", LOGRANK_COLUMNS, [_logrank_row(c) for c in comparisons]))
    return paths


_COLOURS = ("#1f77b4", "#d62728")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def km_svg(cmp: GroupComparison, width: int = 480, height: int = 320) -> str:
    """Step-line SVG: one polyline per group, axis labels and a legend."""
    left, right, top, bottom = 56, 16, 16, 44
    pw, ph = width - left - right, height - top - bottom
    curves = [(lab, c) for lab, c in zip(cmp.labels, cmp.curves) if c is not None]
    t_max = max(float(c.times[-1]) for _, c in curves)
    t_max = t_max * 1.05 if t_max > 0 else 1.0

    def x(t):
        return left + pw * t / t_max

    def y(s):
        return top + ph * (1.0 - s)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<title>{cmp.name}</title>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
    ]
    for s in (0.0, 0.25, 0.5, 0.75, 1.0):
        out.append(f'<text x="{left - 6}" y="{_fmt(y(s) + 4)}" text-anchor="end">{s:g}</text>')
    for k in range(5):
        t = t_max * k / 4
        out.append(f'<text x="{_fmt(x(t))}" y="{top + ph + 16}" text-anchor="middle">{t:.0f}</text>')
    out.append(f'<text x="{left + pw / 2:g}" y="{height - 8}" text-anchor="middle">time (days)</text>')
    out.append(
        f'<text x="14" y="{top + ph / 2:g}" text-anchor="middle" '
        f'transform="rotate(-90 14 {top + ph / 2:g})">survival probability</text>'
    )
    for i, (label, c) in enumerate(curves):
        pts = [(0.0, 1.0)]
        for t, s in zip(c.times[1:], c.survival[1:]):
            pts.append((float(t), pts[-1][1]))
            pts.append((float(t), float(s)))
        pts.append((t_max, pts[-1][1]))
        coords = " ".join(f"{_fmt(x(t))},{_fmt(y(s))}" for t, s in pts)
        colour = _COLOURS[i % len(_COLOURS)]
        out.append(f'<polyline class="km" fill="none" stroke="{colour}" stroke-width="1.5" points="{coords}"/>')
        ly = top + 14 + 16 * i
        lx = left + pw - 120
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" stroke="{colour}" stroke-width="1.5"/>')
        out.append(f'<text x="{lx + 24}" y="{ly}">{label} (n={_group_size(cmp, label)})</text>')
    if cmp.logrank is not None:
        out.append(f'<text x="{left + 8}" y="{top + ph - 8}">log-rank p={cmp.logrank.p_value:.3g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _group_size(cmp: GroupComparison, label: str) -> int:
    return cmp.sizes[cmp.labels.index(label)]


def write_km_svg(cmp: GroupComparison, path: Path) -> Path:
    with _open(path) as fh:
        fh.write(km_svg(cmp))
    return path


def write_classification(result: ClassificationResult, out: Path) -> list[Path]:
    paths = []
    k = max(len(r.fold_aucs) for r in result.cv.values())
    header = ("kind", *(f"fold_{i + 1}" for i in range(k)), "mean_auc")
    rows = [(kind, *(_num(a) for a in r.fold_aucs), _num(r.mean_auc)) for kind, r in result.cv.items()]
    paths.append(_write_csv(out / "auc_summary.csv", header, rows))

    cmp = result.comparison
    (a, b), (c, d) = cmp.table
    paths.append(_write_csv(
        out / "auc_comparison.csv",
        ("model_a", "model_b", "both_correct", "a_only", "b_only", "both_wrong", "chi2", "p_value", "warning"),
        [("DRF", "SRF", a, b, c, d, _num(cmp.chi2), _num(cmp.p_value), cmp.warning or "")],
    ))

    kinds = list(result.cv)
    header = ("patient_id", "label", "fold", *(f"{k}_{col}" for k in kinds for col in ("score", "predicted")))
    rows = []
    for i, pid in enumerate(result.patient_ids):
        cells = [pid, int(result.labels[i]), int(result.cv[kinds[0]].folds[i])]
        for kind in kinds:
            cells += [_num(result.cv[kind].scores[i]), int(result.cv[kind].predicted[i])]
        rows.append(cells)
    paths.append(_write_csv(out / "cv_predictions.csv", header, rows))

    imp = result.importance
    order = np.argsort(-imp.importance, kind="stable")
    rows = [
        (*result.importance_names[j], _num(imp.importance[j]), _num(imp.raw_mean[j]), _num(imp.raw_std[j]),
         int(imp.importance[j] > 0))
        for j in order
    ]
    paths.append(_write_csv(
        out / "importance.csv", ("kind", "feature", "importance", "mean_drop", "std_drop", "predictive"), rows
    ))
    paths += write_km_set(list(result.predicted_km.values()), out / "km_predicted")
    return paths


def _sha256(path) -> str | None:
    if path is None:
        return None
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def library_versions() -> dict:
    import matplotlib
    import numba
    import scipy

    return {
        "drfkit": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "matplotlib": matplotlib.__version__,
    }


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def write_run_manifest(config: RunConfig, out: Path, command: str, outputs, extra: dict | None = None) -> Path:
    """JSON provenance record: command, seed, every parameter, input hashes, versions.

    ``run-all`` writes ``run_manifest.json``; single stages write
    ``run_manifest.<command>.json`` so stages sharing a directory keep theirs.
    """
    doc = {
        "command": command,
        "seed": config.seed,
        "config": {k: _clean(v) for k, v in config.as_dict().items()},
        "weights": "seeded" if config.weights is None else str(config.weights),
        "inputs": {
            "manifest_sha256": _sha256(config.manifest) if config.manifest and Path(config.manifest).exists() else None,
            "weights_sha256": _sha256(config.weights),
        },
        "versions": library_versions(),
        "outputs": sorted(Path(p).relative_to(out).as_posix() for p in outputs),
    }
    if extra:
        doc["summary"] = {k: _clean(v) for k, v in extra.items()}
    name = "run_manifest.json" if command == "run-all" else f"run_manifest.{command}.json"
    path = out / name
    with _open(path) as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
