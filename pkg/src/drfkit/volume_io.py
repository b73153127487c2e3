"""Volume and ROI ingestion plus the preprocessing chain.

Arrays are indexed ``[x, y, z]``. On disk every payload is x-fastest, which is
Fortran order for that indexing.

NIfTI-1 support is deliberately narrow: single-file ``.nii`` with dim,
pixdim, datatype, scl_slope/scl_inter and vox_offset honoured. The qform and
sform orientation matrices are ignored, so volumes are returned in stored
voxel order.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import FormatError, ShapeError, SizeError

__all__ = [
    "Volume",
    "RoiMask",
    "read_volume",
    "read_mask",
    "write_raw",
    "resample_isotropic",
    "normalize_gray_levels",
    "conform",
    "apply_mask",
    "preprocess",
]


@dataclass(frozen=True, eq=False)
class Volume:
    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ShapeError(f"volume must be a non-empty 3D array, got shape {data.shape}")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or min(spacing) <= 0:
            raise ShapeError(f"spacing must be three positive reals, got {self.spacing}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.data.shape)


@dataclass(frozen=True, eq=False)
class RoiMask:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 3:
            raise ShapeError(f"mask must be 3D, got shape {bits.shape}")
        object.__setattr__(self, "bits", bits.astype(bool, copy=False))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.bits.shape)

    @property
    def count(self) -> int:
        return int(self.bits.sum())


# ---------------------------------------------------------------- file formats

_NIFTI_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
}

_RAW_DTYPES = {"f32": np.float32, "u8": np.uint8, "i16": np.int16}


def read_volume(path, format: str | None = None) -> Volume:
    """Read a volume from ``path``.

    ``format`` is ``"nifti1"`` or ``"raw"``; when omitted it is inferred from
    the extension (``.nii`` or ``.rawvol``).
    """
    path = Path(path)
    if format is None:
        format = "nifti1" if path.suffix == ".nii" else "raw"
    if format == "nifti1":
        return _read_nifti1(path)
    if format == "raw":
        return _read_raw(path)
    raise FormatError(f"unknown volume format {format!r}", field="format")


def read_mask(path, format: str | None = None) -> RoiMask:
    vol = read_volume(path, format)
    return RoiMask(vol.data != 0)


def _read_nifti1(path: Path) -> Volume:
    blob = path.read_bytes()
    if len(blob) < 348:
        raise FormatError(f"file is {len(blob)} bytes, shorter than a NIfTI-1 header", field="sizeof_hdr")
    for endian in "<>":
        if struct.unpack_from(endian + "i", blob, 0)[0] == 348:
            break
    else:
        raise FormatError("expected 348", field="sizeof_hdr")

    magic = blob[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise FormatError(f"unsupported magic {magic!r}", field="magic")
    if magic == b"ni1\x00":
        raise FormatError("two-file NIfTI (.hdr/.img) is not supported", field="magic")

    dim = struct.unpack_from(endian + "8h", blob, 40)
    ndim = dim[0]
    if ndim < 3 or ndim > 7 or any(d != 1 for d in dim[4 : ndim + 1]):
        raise FormatError(f"need a 3D volume, got dim={dim}", field="dim")
    dims = dim[1:4]
    if min(dims) < 1:
        raise FormatError(f"non-positive extent in dim={dim}", field="dim")

    datatype = struct.unpack_from(endian + "h", blob, 70)[0]
    if datatype not in _NIFTI_DTYPES:
        raise FormatError(f"unsupported datatype code {datatype}", field="datatype")
    pixdim = struct.unpack_from(endian + "8f", blob, 76)
    spacing = tuple(abs(p) for p in pixdim[1:4])
    if min(spacing) <= 0 or not all(math.isfinite(s) for s in spacing):
        raise FormatError(f"non-positive voxel size {pixdim[1:4]}", field="pixdim")
    vox_offset = struct.unpack_from(endian + "f", blob, 108)[0]
    if not math.isfinite(vox_offset) or vox_offset < 348:
        raise FormatError(f"invalid offset {vox_offset}", field="vox_offset")
    slope, inter = struct.unpack_from(endian + "2f", blob, 112)

    dtype = np.dtype(_NIFTI_DTYPES[datatype]).newbyteorder(endian)
    n = int(np.prod(dims))
    offset = int(vox_offset)
    payload = blob[offset:]
    if len(payload) < n * dtype.itemsize:
        raise SizeError(f"{path}: payload holds {len(payload)} bytes, dims {dims} need {n * dtype.itemsize}")
    data = np.frombuffer(payload, dtype=dtype, count=n).reshape(dims, order="F")

    if not math.isfinite(slope) or slope == 0:
        slope = 1.0
    if not math.isfinite(inter):
        inter = 0.0
    if slope != 1.0 or inter != 0.0:
        data = data.astype(np.float64) * slope + inter
    else:
        data = data.astype(dtype.newbyteorder("="))
    return Volume(data, spacing)


def _header_path(path: Path) -> Path:
    return path.with_name(path.name + ".hdr")


def _read_raw(path: Path) -> Volume:
    hdr = _header_path(path)
    fields = {}
    try:
        text = hdr.read_text()
    except FileNotFoundError:
        raise FormatError(f"missing sidecar header {hdr}", field="header") from None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"malformed line {line!r}", field="header")
        fields[key.strip()] = value.strip()

    try:
        dims = tuple(int(v) for v in fields["dims"].split(","))
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError
    except (KeyError, ValueError):
        raise FormatError(f"bad value {fields.get('dims')!r}", field="dims") from None
    try:
        spacing = tuple(float(v) for v in fields["spacing"].split(","))
        if len(spacing) != 3 or min(spacing) <= 0:
            raise ValueError
    except (KeyError, ValueError):
        raise FormatError(f"bad value {fields.get('spacing')!r}", field="spacing") from None
    if fields.get("dtype") not in _RAW_DTYPES:
        raise FormatError(f"bad value {fields.get('dtype')!r}", field="dtype")

    dtype = np.dtype(_RAW_DTYPES[fields["dtype"]]).newbyteorder("<")
    payload = path.read_bytes()
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(payload) != expected:
        raise SizeError(f"{path}: payload is {len(payload)} bytes, dims {dims} need {expected}")
    data = np.frombuffer(payload, dtype=dtype).reshape(dims, order="F")
    return Volume(data.astype(dtype.newbyteorder("=")), spacing)


def write_raw(vol: Volume, path, dtype: str = "f32") -> Path:
    """Write ``vol`` as ``path`` plus its ``.hdr`` sidecar; returns the payload path."""
    if dtype not in _RAW_DTYPES:
        raise FormatError(f"unsupported raw dtype {dtype!r}", field="dtype")
    path = Path(path)
    arr = np.asarray(vol.data).astype(np.dtype(_RAW_DTYPES[dtype]).newbyteorder("<"))
    path.write_bytes(arr.tobytes(order="F"))
    dims = ",".join(str(d) for d in vol.dims)
    spacing = ",".join(repr(float(s)) for s in vol.spacing)
    _header_path(path).write_text(f"dims={dims}\nspacing={spacing}\ndtype={dtype}\n")
    return path


# -------------------------------------------------------------- preprocessing


def _resampled_dims(dims, spacing, target):
    # Round before ceil so that e.g. 3 * 0.1 / 0.1 does not become 4.
    return tuple(max(1, math.ceil(round(d * s / target, 9))) for d, s in zip(dims, spacing))


def resample_isotropic(vol: Volume, mask: RoiMask | None, target: float = 1.0):
    """Resample to ``target`` mm isotropic voxels.

    Intensities are interpolated trilinearly, the mask by nearest neighbour.
    Output voxel ``j`` samples input coordinate ``j * target / spacing``.
    """
    if target <= 0:
        raise ValueError(f"target spacing must be positive, got {target}")
    if mask is not None and mask.dims != vol.dims:
        raise ShapeError(f"mask dims {mask.dims} differ from volume dims {vol.dims}")
    out_spacing = (float(target),) * 3
    if all(s == target for s in vol.spacing):
        return Volume(vol.data.copy(), out_spacing), (None if mask is None else RoiMask(mask.bits.copy()))

    out_dims = _resampled_dims(vol.dims, vol.spacing, target)
    axes = [np.arange(n) * (target / s) for n, s in zip(out_dims, vol.spacing)]
    coords = np.meshgrid(*axes, indexing="ij")
    data = ndimage.map_coordinates(
        vol.data.astype(np.float64), coords, order=1, mode="nearest", prefilter=False
    )
    out_mask = None
    if mask is not None:
        idx = [np.clip(np.floor(a + 0.5).astype(int), 0, n - 1) for a, n in zip(axes, mask.dims)]
        out_mask = RoiMask(mask.bits[np.ix_(*idx)])
    return Volume(data, out_spacing), out_mask


def normalize_gray_levels(vol: Volume, levels: int = 256) -> Volume:
    """Min-max rescale over the whole volume onto integers ``0 .. levels-1``."""
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")
    data = vol.data.astype(np.float64)
    lo, hi = data.min(), data.max()
    if hi == lo:
        return Volume(np.zeros_like(data), vol.spacing)
    out = np.floor((data - lo) / (hi - lo) * levels)
    np.clip(out, 0, levels - 1, out=out)
    return Volume(out, vol.spacing)


def _crop_pad_slices(n, target):
    """Source/destination slices that center-crop or center-pad one axis."""
    if n >= target:
        start = (n - target) // 2
        return slice(start, start + target), slice(0, target)
    before = (target - n) // 2
    return slice(0, n), slice(before, before + n)


def conform(vol: Volume, mask: RoiMask | None, target_dims=(256, 256, 256)):
    """Center-crop, then zero-pad symmetrically, to ``target_dims``."""
    target_dims = tuple(int(t) for t in target_dims)
    if len(target_dims) != 3 or min(target_dims) < 1:
        raise ValueError(f"target_dims must be three positive integers, got {target_dims}")
    if mask is not None and mask.dims != vol.dims:
        raise ShapeError(f"mask dims {mask.dims} differ from volume dims {vol.dims}")
    pairs = [_crop_pad_slices(n, t) for n, t in zip(vol.dims, target_dims)]
    src = tuple(p[0] for p in pairs)
    dst = tuple(p[1] for p in pairs)

    data = np.zeros(target_dims, dtype=vol.data.dtype)
    data[dst] = vol.data[src]
    out_mask = None
    if mask is not None:
        bits = np.zeros(target_dims, dtype=bool)
        bits[dst] = mask.bits[src]
        out_mask = RoiMask(bits)
    return Volume(data, vol.spacing), out_mask


def apply_mask(vol: Volume, mask: RoiMask) -> Volume:
    if mask.dims != vol.dims:
        raise ShapeError(f"mask dims {mask.dims} differ from volume dims {vol.dims}")
    return Volume(np.where(mask.bits, vol.data, 0).astype(vol.data.dtype), vol.spacing)


def preprocess(vol: Volume, mask: RoiMask, target_mm=1.0, levels=256, target_dims=(256, 256, 256)):
    """resample -> normalize -> conform -> mask.

    Returns ``(normalized, masked, mask)``: the conformed gray-level volume
    before masking, the masked network input, and the conformed mask.
    """
    vol, mask = resample_isotropic(vol, mask, target_mm)
    vol = normalize_gray_levels(vol, levels)
    vol, mask = conform(vol, mask, target_dims)
    return vol, apply_mask(vol, mask), mask
