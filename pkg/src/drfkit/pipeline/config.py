from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

from ..learn import ForestParams
from ..survival import SurvivalRecord

MANIFEST_COLUMNS = ("patient_id", "volume_path", "mask_path", "survival_days", "event")


@dataclass(frozen=True)
class ManifestRow:
    patient_id: str
    volume_path: Path
    mask_path: Path
    survival_days: float
    event: int

    @property
    def record(self) -> SurvivalRecord:
        return SurvivalRecord(self.patient_id, self.survival_days, self.event)


def read_manifest(path) -> list[ManifestRow]:
    """Parse a cohort manifest; relative paths resolve against its directory."""
    path = Path(path)
    base = path.parent
    rows = []
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != MANIFEST_COLUMNS:
            raise ValueError(f"{path}: expected columns {','.join(MANIFEST_COLUMNS)}, got {reader.fieldnames}")
        for line, rec in enumerate(reader, start=2):
            pid = rec["patient_id"].strip()
            if not pid:
                raise ValueError(f"{path}:{line}: empty patient_id")
            if pid in seen:
                raise ValueError(f"{path}:{line}: duplicate patient_id {pid!r}")
            seen.add(pid)
            try:
                days = float(rec["survival_days"])
                event = int(rec["event"])
            except ValueError:
                raise ValueError(f"{path}:{line}: non-numeric survival_days/event") from None
            if not days >= 0 or event not in (0, 1):
                raise ValueError(f"{path}:{line}: need survival_days >= 0 and event in {{0, 1}}")
            rows.append(ManifestRow(pid, base / rec["volume_path"], base / rec["mask_path"], days, event))
    if not rows:
        raise ValueError(f"{path}: manifest has no patients")
    return rows


def write_manifest(rows, path) -> None:
    """Write rows verbatim; pass paths relative to the manifest directory."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for r in rows:
            w.writerow([r.patient_id, Path(r.volume_path).as_posix(), Path(r.mask_path).as_posix(), repr(float(r.survival_days)), r.event])


@dataclass(frozen=True)
class RunConfig:
    manifest: Path | None = None
    out: Path = Path("drf_out")
    weights: Path | None = None  # None -> seeded fallback weights
    seed: int = 0
    input_size: int = 256
    voxel_mm: float = 1.0
    gray_levels: int = 256
    matrix_levels: int = 32
    folds: int = 5
    trees: int = 500
    mtry: int | None = None
    min_leaf: int = 1
    max_depth: int | None = None
    workers: int = 1
    figures: bool = True

    @property
    def forest(self) -> ForestParams:
        return ForestParams(
            n_trees=self.trees, mtry=self.mtry, min_leaf=self.min_leaf, max_depth=self.max_depth, seed=self.seed
        )

    @property
    def input_dims(self) -> tuple[int, int, int]:
        return (self.input_size,) * 3

    def as_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = str(v) if isinstance(v, Path) else v
        return out


_PATH_KEYS = {"manifest", "out", "weights"}
_OPTIONAL_INT_KEYS = {"mtry", "max_depth"}
_BOOL_KEYS = {"figures"}


def coerce(key: str, value: str):
    """Convert a key=value string onto the RunConfig field type."""
    names = {f.name: f for f in dataclasses.fields(RunConfig)}
    if key not in names:
        raise KeyError(f"unknown config key {key!r}")
    if key in _PATH_KEYS:
        return None if value in ("", "none", "None") else Path(value)
    if key in _OPTIONAL_INT_KEYS:
        return None if value in ("", "none", "None") else int(value)
    if key in _BOOL_KEYS:
        return value.lower() in ("1", "true", "yes", "on")
    if key == "voxel_mm":
        return float(value)
    return int(value)


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{n}: expected key=value")
        key = key.strip().replace("-", "_")
        values[key] = coerce(key, value.strip())
    return values


def build_config(file_values: dict | None = None, **overrides) -> RunConfig:
    """File values first, then non-None overrides (command-line flags)."""
    values = dict(file_values or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    for key in _PATH_KEYS:
        if isinstance(values.get(key), str):
            values[key] = Path(values[key])
    return RunConfig(**values)
