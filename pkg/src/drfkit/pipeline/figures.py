"""Matplotlib renderings of the report tables (PNG, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..texture import FEATURE_NAMES  # noqa: E402
from .analysis import ClassificationResult, GroupComparison, UnivariateResult  # noqa: E402
from .extract import KINDS  # noqa: E402

_STYLE = {
    "font.size": 8,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}
# PNG metadata without a software stamp keeps reruns byte-identical.
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def heatmap_figure(result: UnivariateResult, path: Path) -> Path:
    grid = np.zeros((len(KINDS), len(FEATURE_NAMES)))
    sig = np.zeros_like(grid, dtype=bool)
    for r in result.screen:
        i, j = KINDS.index(r.kind), FEATURE_NAMES.index(r.feature)
        grid[i, j] = r.neg_log10_p
        sig[i, j] = r.significant
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 8.0))
        im = ax.imshow(grid.T, aspect="auto", cmap="viridis")
        for j, i in zip(*np.nonzero(sig.T)):
            ax.text(i, j, "*", ha="center", va="center", color="w")
        ax.set_xticks(range(len(KINDS)), KINDS)
        ax.set_yticks(range(len(FEATURE_NAMES)), FEATURE_NAMES, fontsize=5)
        fig.colorbar(im, ax=ax, label=r"$-\log_{10}$ p (log-rank)")
        return _save(fig, path)


def km_figure(cmp: GroupComparison, path: Path) -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 2.6))
        for label, c, n in zip(cmp.labels, cmp.curves, cmp.sizes):
            if c is not None:
                ax.step(c.times, c.survival, where="post", label=f"{label} (n={n})")
        ax.set_ylim(-0.02, 1.02)
        ax.set_xlabel("time (days)")
        ax.set_ylabel("survival probability")
        if cmp.logrank is not None:
            lr = cmp.logrank
            hr = f"HR={lr.hazard_ratio:.2f} ({lr.ci_low:.2f}-{lr.ci_high:.2f})" if lr.hr_defined else "HR undefined"
            ax.set_title(f"{cmp.name}: p={lr.p_value:.2g}, {hr}")
        ax.legend(frameon=False)
        return _save(fig, path)


def auc_figure(result: ClassificationResult, path: Path) -> Path:
    kinds = list(result.cv)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(3.0, 2.6))
        means = [result.cv[k].mean_auc for k in kinds]
        sds = [float(np.std(result.cv[k].fold_aucs)) for k in kinds]
        ax.bar(kinds, means, yerr=sds, capsize=4, color=["#1f77b4", "#ff7f0e"])
        ax.axhline(0.5, color="grey", lw=0.8, ls="--")
        ax.set_ylim(0, 1)
        ax.set_ylabel("mean AUC (5-fold)" if len(result.cv[kinds[0]].fold_aucs) == 5 else "mean AUC")
        ax.set_title(f"chi-square p={result.comparison.p_value:.2g}")
        return _save(fig, path)


def importance_figure(result: ClassificationResult, path: Path, top: int = 20) -> Path:
    imp = result.importance.importance
    order = np.argsort(-imp, kind="stable")[:top]
    labels = [f"{k}:{f}" for k, f in (result.importance_names[j] for j in order)]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 0.18 * len(order) + 1.0))
        ax.barh(range(len(order))[::-1], imp[order], color=np.where(imp[order] > 0, "#2ca02c", "#7f7f7f"))
        ax.set_yticks(range(len(order))[::-1], labels, fontsize=6)
        ax.axvline(0, color="k", lw=0.6)
        ax.set_xlabel("normalized OOB permutation importance")
        return _save(fig, path)


def screening_figures(result: UnivariateResult, out: Path) -> list[Path]:
    paths = [heatmap_figure(result, out / "heatmap.png")]
    paths += [km_figure(c, out / f"km_{c.name}.png") for c in result.significant_km]
    return paths


def classification_figures(result: ClassificationResult, out: Path) -> list[Path]:
    paths = [auc_figure(result, out / "auc.png"), importance_figure(result, out / "importance.png")]
    paths += [km_figure(c, out / f"km_{c.name}.png") for c in result.predicted_km.values()]
    return paths
