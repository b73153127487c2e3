"""Synthetic cohorts with a planted texture-survival link.

Each patient belongs to one of two classes drawn 50/50. The class fixes the
exponential survival distribution and a Gaussian-random-field correlation
length for the tumour texture. ``coupling`` additionally ties the length to
the patient's own survival time (through its quantile under the two-class
mixture), which is what lets texture predict a below/above-median label
rather than only the class.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from ..volume_io import Volume, write_raw
from .config import ManifestRow, write_manifest


@dataclass(frozen=True)
class SynthSpec:
    n: int = 100
    dims: tuple[int, int, int] = (64, 64, 64)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    length_scales: tuple[float, float] = (1.0, 5.0)  # voxels, class 0 / class 1
    medians_days: tuple[float, float] = (300.0, 600.0)
    censor_fraction: float = 0.06
    coupling: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.medians_days[0] == self.medians_days[1]:
            raise ValueError("class medians must differ")
        if min(self.medians_days) <= 0 or min(self.length_scales) <= 0:
            raise ValueError("medians and length scales must be positive")
        if not 0.0 <= self.censor_fraction < 1.0:
            raise ValueError("censor_fraction must lie in [0, 1)")
        if not 0.0 <= self.coupling <= 1.0:
            raise ValueError("coupling must lie in [0, 1]")


def _mixture_cdf(t, medians):
    return float(np.mean([1.0 - math.exp(-t * math.log(2) / m) for m in medians]))


def gaussian_field(rng, dims, length_scale):
    """Unit-variance periodic Gaussian random field with the given correlation length."""
    noise = rng.standard_normal(dims)
    field = ndimage.gaussian_filter(noise, sigma=length_scale, mode="wrap")
    return (field - field.mean()) / field.std()


def ellipsoid_mask(rng, dims):
    dims = np.asarray(dims)
    center = dims / 2.0 + rng.uniform(-0.05, 0.05, 3) * dims
    radii = dims * np.array([0.28, 0.24, 0.26]) * rng.uniform(0.9, 1.1, 3)
    grid = np.meshgrid(*[np.arange(d) + 0.5 for d in dims], indexing="ij")
    r2 = sum(((g - c) / r) ** 2 for g, c, r in zip(grid, center, radii))
    return r2 <= 1.0


def simulate_patient(spec: SynthSpec, index: int):
    """Volume, mask, class and latent death time for patient ``index``."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, index]))
    cls = int(rng.random() < 0.5)
    t_death = rng.exponential(spec.medians_days[cls] / math.log(2))
    u = _mixture_cdf(t_death, spec.medians_days)
    lo, hi = (math.log(s) for s in spec.length_scales)
    log_ls = (1 - spec.coupling) * (lo if cls == 0 else hi) + spec.coupling * (lo + u * (hi - lo))
    tumour = 120.0 + 30.0 * gaussian_field(rng, spec.dims, math.exp(log_ls))
    background = 60.0 + 15.0 * gaussian_field(rng, spec.dims, 2.0)
    mask = ellipsoid_mask(rng, spec.dims)
    volume = np.where(mask, tumour, background).astype(np.float32)
    return volume, mask, cls, float(t_death)


def generate_synthetic_cohort(spec: SynthSpec, out_dir) -> Path:
    """Write volumes, masks, ``manifest.csv`` and ``truth.csv``; returns the manifest path."""
    out = Path(out_dir)
    (out / "volumes").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)

    cohort_rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 2**32]))
    n_censored = int(round(spec.censor_fraction * spec.n))
    censored = set(cohort_rng.choice(spec.n, size=n_censored, replace=False).tolist())
    width = max(3, len(str(spec.n - 1)))

    rows, truth = [], []
    for i in range(spec.n):
        pid = f"P{i:0{width}d}"
        volume, mask, cls, t_death = simulate_patient(spec, i)
        vol_rel = Path("volumes") / f"{pid}.rawvol"
        mask_rel = Path("masks") / f"{pid}_mask.rawvol"
        write_raw(Volume(volume, spec.spacing), out / vol_rel, "f32")
        write_raw(Volume(mask.astype(np.uint8), spec.spacing), out / mask_rel, "u8")
        if i in censored:
            # Last visit somewhere before the (unobserved) death.
            time, event = t_death * cohort_rng.uniform(0.3, 0.95), 0
        else:
            time, event = t_death, 1
        rows.append(ManifestRow(pid, vol_rel, mask_rel, round(time, 3), event))
        truth.append((pid, cls, repr(t_death)))

    manifest = out / "manifest.csv"
    write_manifest(rows, manifest)
    with open(out / "truth.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patient_id", "texture_class", "latent_death_days"])
        w.writerows(truth)
    return manifest
