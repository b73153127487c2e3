"""Forward-only 3D convolutional feature extractor.

Only the two convolutional blocks are ever evaluated; any dense/softmax blocks
found in a weight file are kept as opaque arrays. Dropout is inference-time
identity.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError, WeightError
from .volume_io import RoiMask, Volume

__all__ = [
    "ConvLayerSpec",
    "ConvLayer",
    "NetworkWeights",
    "DEFAULT_LAYERS",
    "conv3d_forward",
    "maxpool3d",
    "relu",
    "forward_features",
    "init_seeded_weights",
    "load_weights",
    "save_weights",
    "downsample_mask",
]

MAGIC = b"DRF1"
_RECORD = struct.Struct("<BIIIII")


@dataclass(frozen=True)
class ConvLayerSpec:
    filter_size: tuple[int, int, int] = (2, 2, 2)
    stride: tuple[int, int, int] = (2, 2, 2)
    out_channels: int = 10
    pool_size: int = 2
    pool_stride: int = 2
    activation: str = "relu"
    dropout_rate: float = 0.8

    def __post_init__(self):
        if min(self.filter_size) < 1 or min(self.stride) < 1:
            raise ValueError("filter size and stride must be >= 1")
        if self.pool_size < 1 or self.pool_stride < 1 or self.out_channels < 1:
            raise ValueError("pool size/stride and out_channels must be >= 1")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate <= 1.0:
            raise ValueError("dropout_rate must lie in [0, 1]")


# Layer 2 pools with stride 1 (replicate padded) so a 256^3 input yields the
# 64^3 and 32^3 maps of the reference architecture.
DEFAULT_LAYERS = (
    ConvLayerSpec(pool_stride=2),
    ConvLayerSpec(pool_stride=1),
)


@dataclass(frozen=True, eq=False)
class ConvLayer:
    filters: np.ndarray  # (out, in, kx, ky, kz)
    bias: np.ndarray  # (out,)

    @property
    def out_channels(self) -> int:
        return self.filters.shape[0]

    @property
    def in_channels(self) -> int:
        return self.filters.shape[1]


@dataclass(frozen=True, eq=False)
class NetworkWeights:
    layers: tuple[ConvLayer, ...]
    specs: tuple[ConvLayerSpec, ...] = DEFAULT_LAYERS
    # Trailing blocks (dense, softmax, anything unknown), keyed by layer index.
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.layers) != len(self.specs):
            raise WeightError(f"expected {len(self.specs)} conv layers, got {len(self.layers)}")
        in_ch = 1
        for i, (layer, spec) in enumerate(zip(self.layers, self.specs), start=1):
            expected = (spec.out_channels, in_ch, *spec.filter_size)
            if layer.filters.shape != expected:
                raise WeightError(f"layer {i}: filter shape {layer.filters.shape}, expected {expected}")
            if layer.bias.shape != (spec.out_channels,):
                raise WeightError(f"layer {i}: bias shape {layer.bias.shape}, expected ({spec.out_channels},)")
            if not (np.all(np.isfinite(layer.filters)) and np.all(np.isfinite(layer.bias))):
                raise WeightError(f"layer {i}: non-finite weights")
            in_ch = spec.out_channels


def _as_stack(x) -> np.ndarray:
    if isinstance(x, Volume):
        return x.data[None].astype(np.float64)
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 3:
        return arr[None]
    if arr.ndim != 4:
        raise ShapeError(f"expected (channels, x, y, z) array, got shape {arr.shape}")
    return arr


def conv3d_forward(x, filters, bias, stride=(2, 2, 2)) -> np.ndarray:
    """Valid strided cross-correlation summed over input channels plus bias.

    ``x`` is a ``(C, X, Y, Z)`` stack or a single-channel grid/Volume; returns
    ``(out_channels, ox, oy, oz)`` with ``o = (n - k) // s + 1``.
    """
    x = _as_stack(x)
    filters = np.asarray(filters, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if filters.ndim != 5 or filters.shape[1] != x.shape[0]:
        raise ShapeError(f"filters {filters.shape} do not match {x.shape[0]} input channels")
    if bias.shape != (filters.shape[0],):
        raise ShapeError(f"bias shape {bias.shape} does not match {filters.shape[0]} filters")
    k = filters.shape[2:]
    stride = tuple(int(s) for s in stride)
    if any(n < kk for n, kk in zip(x.shape[1:], k)):
        raise ShapeError(f"input dims {x.shape[1:]} smaller than kernel {k}")

    if k == tuple(stride):
        # Non-overlapping windows: a reshape is much cheaper than a window view.
        o = [n // s for n, s in zip(x.shape[1:], stride)]
        xc = x[:, : o[0] * k[0], : o[1] * k[1], : o[2] * k[2]]
        blocks = xc.reshape(x.shape[0], o[0], k[0], o[1], k[1], o[2], k[2])
        out = np.einsum("cxaybzd,ocabd->oxyz", blocks, filters, optimize=True)
    else:
        win = sliding_window_view(x, k, axis=(1, 2, 3))[:, :: stride[0], :: stride[1], :: stride[2]]
        out = np.einsum("cxyzabd,ocabd->oxyz", win, filters, optimize=True)
    return out + bias[:, None, None, None]


def maxpool3d(x, size: int = 2, stride: int = 2) -> np.ndarray:
    """Per-channel max over ``size``^3 windows.

    With ``stride == 1`` the trailing faces are replicate-padded by
    ``size - 1`` so output dims equal input dims.
    """
    if size < 1 or stride < 1:
        raise ValueError("pool size and stride must be >= 1")
    x = _as_stack(x)
    if size == 1 and stride == 1:
        return x.copy()
    if stride == 1:
        x = np.pad(x, ((0, 0), (0, size - 1), (0, size - 1), (0, size - 1)), mode="edge")
    if size == stride:
        o = [n // size for n in x.shape[1:]]
        xc = x[:, : o[0] * size, : o[1] * size, : o[2] * size]
        return xc.reshape(x.shape[0], o[0], size, o[1], size, o[2], size).max(axis=(2, 4, 6))
    win = sliding_window_view(x, (size,) * 3, axis=(1, 2, 3))[:, ::stride, ::stride, ::stride]
    return win.max(axis=(4, 5, 6))


def relu(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def layer_output_dims(input_dims, specs=DEFAULT_LAYERS):
    """Output dims after each conv block, or ShapeError if the arithmetic breaks."""
    dims = tuple(int(d) for d in input_dims)
    out = []
    for i, spec in enumerate(specs, start=1):
        if any(d % s for d, s in zip(dims, spec.stride)) or any(d < k for d, k in zip(dims, spec.filter_size)):
            raise ShapeError(f"layer {i}: dims {dims} incompatible with filter {spec.filter_size} stride {spec.stride}")
        dims = tuple((d - k) // s + 1 for d, k, s in zip(dims, spec.filter_size, spec.stride))
        if spec.pool_stride != 1:
            if any(d % spec.pool_stride or d < spec.pool_size for d in dims):
                raise ShapeError(f"layer {i}: conv output {dims} not divisible by pool stride {spec.pool_stride}")
            dims = tuple((d - spec.pool_size) // spec.pool_stride + 1 for d in dims)
        out.append(dims)
    return out


def forward_features(vol, weights: NetworkWeights):
    """Run the conv blocks; returns one ``(channels, x, y, z)`` stack per layer."""
    x = _as_stack(vol)
    if x.shape[0] != 1:
        raise ShapeError(f"network input must be single-channel, got {x.shape[0]} channels")
    layer_output_dims(x.shape[1:], weights.specs)
    stacks = []
    for layer, spec in zip(weights.layers, weights.specs):
        x = conv3d_forward(x, layer.filters, layer.bias, spec.stride)
        x = relu(x)
        x = maxpool3d(x, spec.pool_size, spec.pool_stride)
        stacks.append(x)
    return tuple(stacks)


def init_seeded_weights(seed: int, specs=DEFAULT_LAYERS) -> NetworkWeights:
    """Deterministic uniform weights in ``[-a, a]``, ``a = sqrt(6 / (fan_in + fan_out))``.

    Biases are zero.
    """
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & (2**64 - 1)))
    layers = []
    in_ch = 1
    for spec in specs:
        ksize = int(np.prod(spec.filter_size))
        bound = np.sqrt(6.0 / (in_ch * ksize + spec.out_channels * ksize))
        filters = rng.uniform(-bound, bound, size=(spec.out_channels, in_ch, *spec.filter_size))
        # Weight files store float32; keep seeded weights on the same grid so
        # save/load round trips are exact.
        layers.append(ConvLayer(filters.astype(np.float32).astype(np.float64), np.zeros(spec.out_channels)))
        in_ch = spec.out_channels
    return NetworkWeights(tuple(layers), tuple(specs))


def save_weights(weights: NetworkWeights, path) -> Path:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        records = [(i, layer.filters, layer.bias) for i, layer in enumerate(weights.layers, start=1)]
        records += [(i, w, b) for i, (w, b) in sorted(weights.extra.items())]
        for index, filters, bias in records:
            filters = np.asarray(filters)
            out_ch, in_ch, kx, ky, kz = filters.shape
            fh.write(_RECORD.pack(index, out_ch, in_ch, kx, ky, kz))
            fh.write(filters.astype("<f4").tobytes(order="C"))
            fh.write(np.asarray(bias).astype("<f4").tobytes())
    return path


def load_weights(path, specs=DEFAULT_LAYERS) -> NetworkWeights:
    """Parse a ``DRF1`` weight file and validate it against ``specs``."""
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise WeightError(f"{path}: bad magic {blob[:4]!r}")
    pos = 4
    conv = {}
    extra = {}
    while pos < len(blob):
        if pos + _RECORD.size > len(blob):
            raise WeightError(f"{path}: truncated record header at byte {pos}")
        index, out_ch, in_ch, kx, ky, kz = _RECORD.unpack_from(blob, pos)
        pos += _RECORD.size
        n_w = out_ch * in_ch * kx * ky * kz
        end = pos + 4 * (n_w + out_ch)
        if end > len(blob):
            raise WeightError(f"{path}: layer {index} payload truncated")
        filters = np.frombuffer(blob, "<f4", n_w, pos).reshape(out_ch, in_ch, kx, ky, kz).astype(np.float64)
        bias = np.frombuffer(blob, "<f4", out_ch, pos + 4 * n_w).astype(np.float64)
        pos = end
        if 1 <= index <= len(specs):
            conv[index] = ConvLayer(filters, bias)
        else:
            extra[index] = (filters, bias)
    missing = [i for i in range(1, len(specs) + 1) if i not in conv]
    if missing:
        raise WeightError(f"{path}: missing conv layer(s) {missing}")
    return NetworkWeights(tuple(conv[i] for i in range(1, len(specs) + 1)), tuple(specs), extra)


def downsample_mask(mask, factor: int) -> RoiMask:
    """A coarse cell is set iff any voxel of its ``factor``^3 block is set."""
    bits = mask.bits if isinstance(mask, RoiMask) else np.asarray(mask, dtype=bool)
    if factor < 1 or any(d % factor for d in bits.shape):
        raise ShapeError(f"mask dims {bits.shape} not divisible by {factor}")
    o = [d // factor for d in bits.shape]
    return RoiMask(bits.reshape(o[0], factor, o[1], factor, o[2], factor).any(axis=(1, 3, 5)))
