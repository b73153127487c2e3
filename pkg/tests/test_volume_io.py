import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drfkit.errors import FormatError, ShapeError, SizeError
from drfkit.volume_io import (
    RoiMask,
    Volume,
    apply_mask,
    conform,
    normalize_gray_levels,
    preprocess,
    read_mask,
    read_volume,
    resample_isotropic,
    write_raw,
)


def nifti_bytes(data, pixdim=(1.0, 1.0, 1.0), datatype=16, slope=1.0, inter=0.0, endian="<", vox_offset=352.0):
    """Minimal single-file NIfTI-1 writer built from the published header layout."""
    codes = {2: "u1", 4: "i2", 8: "i4", 16: "f4", 64: "f8"}
    bitpix = {2: 8, 4: 16, 8: 32, 16: 32, 64: 64}[datatype]
    hdr = bytearray(348)
    struct.pack_into(endian + "i", hdr, 0, 348)
    dims = (3, *data.shape, 1, 1, 1, 1)
    struct.pack_into(endian + "8h", hdr, 40, *dims)
    struct.pack_into(endian + "h", hdr, 70, datatype)
    struct.pack_into(endian + "h", hdr, 72, bitpix)
    struct.pack_into(endian + "8f", hdr, 76, 1.0, *pixdim, 0, 0, 0, 0)
    struct.pack_into(endian + "f", hdr, 108, vox_offset)
    struct.pack_into(endian + "f", hdr, 112, slope)
    struct.pack_into(endian + "f", hdr, 116, inter)
    hdr[344:348] = b"n+1\0"
    pad = bytes(int(vox_offset) - 348)
    payload = np.asarray(data).astype(np.dtype(codes[datatype]).newbyteorder(endian)).tobytes(order="F")
    return bytes(hdr) + pad + payload


def test_raw_zero_volume(tmp_path):
    path = write_raw(Volume(np.zeros((4, 4, 4)), (1, 1, 1)), tmp_path / "z.rawvol")
    vol = read_volume(path)
    assert vol.dims == (4, 4, 4)
    assert vol.spacing == (1.0, 1.0, 1.0)
    assert not vol.data.any()


def test_raw_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.normal(size=(5, 3, 4)).astype(np.float32)
    path = write_raw(Volume(data, (0.5, 1.0, 2.5)), tmp_path / "a.rawvol")
    first = path.read_bytes()
    vol = read_volume(path)
    np.testing.assert_array_equal(vol.data, data)
    assert vol.spacing == (0.5, 1.0, 2.5)
    write_raw(vol, tmp_path / "b.rawvol")
    assert (tmp_path / "b.rawvol").read_bytes() == first


def test_raw_payload_is_x_fastest(tmp_path):
    data = np.zeros((3, 2, 2), dtype=np.float32)
    data[1, 0, 0] = 7
    path = write_raw(Volume(data), tmp_path / "x.rawvol")
    assert np.frombuffer(path.read_bytes(), "<f4")[1] == 7


@pytest.mark.parametrize("dtype", ["u8", "i16"])
def test_raw_integer_types(tmp_path, dtype):
    data = np.arange(24).reshape(2, 3, 4)
    vol = read_volume(write_raw(Volume(data), tmp_path / "i.rawvol", dtype))
    np.testing.assert_array_equal(vol.data, data)


def test_raw_short_payload_is_size_error(tmp_path):
    path = write_raw(Volume(np.ones((4, 4, 4))), tmp_path / "s.rawvol")
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(SizeError):
        read_volume(path)


@pytest.mark.parametrize(
    "header,field",
    [
        ("dims=4,4\nspacing=1,1,1\ndtype=f32\n", "dims"),
        ("dims=4,4,4\nspacing=1,0,1\ndtype=f32\n", "spacing"),
        ("dims=4,4,4\nspacing=1,1,1\ndtype=f16\n", "dtype"),
        ("spacing=1,1,1\ndtype=f32\n", "dims"),
    ],
)
def test_raw_bad_header_names_field(tmp_path, header, field):
    path = write_raw(Volume(np.ones((4, 4, 4))), tmp_path / "h.rawvol")
    (tmp_path / "h.rawvol.hdr").write_text(header)
    with pytest.raises(FormatError) as err:
        read_volume(path)
    assert err.value.field == field


def test_raw_missing_header(tmp_path):
    (tmp_path / "m.rawvol").write_bytes(b"\0" * 8)
    with pytest.raises(FormatError):
        read_volume(tmp_path / "m.rawvol")


def test_nifti_float32_dims_and_spacing(tmp_path):
    data = np.random.default_rng(1).normal(size=(8, 8, 8)).astype(np.float32)
    p = tmp_path / "v.nii"
    p.write_bytes(nifti_bytes(data, pixdim=(2, 2, 2)))
    vol = read_volume(p)
    assert vol.dims == (8, 8, 8)
    assert vol.spacing == (2.0, 2.0, 2.0)
    np.testing.assert_array_equal(vol.data, data)


@pytest.mark.parametrize("datatype", [2, 4, 8, 16, 64])
@pytest.mark.parametrize("endian", ["<", ">"])
def test_nifti_datatypes_and_endianness(tmp_path, datatype, endian):
    data = np.arange(60).reshape(3, 4, 5)
    p = tmp_path / "d.nii"
    p.write_bytes(nifti_bytes(data, datatype=datatype, endian=endian))
    np.testing.assert_array_equal(read_volume(p).data, data)


def test_nifti_scaling(tmp_path):
    data = np.arange(8).reshape(2, 2, 2)
    p = tmp_path / "s.nii"
    p.write_bytes(nifti_bytes(data, datatype=4, slope=2.0, inter=-1.0))
    np.testing.assert_allclose(read_volume(p).data, 2.0 * data - 1.0)
    p.write_bytes(nifti_bytes(data, datatype=4, slope=0.0, inter=3.0))
    np.testing.assert_allclose(read_volume(p).data, data + 3.0)


def test_nifti_errors(tmp_path):
    data = np.ones((4, 4, 4), dtype=np.float32)
    p = tmp_path / "e.nii"
    good = nifti_bytes(data)
    p.write_bytes(good[:-4])
    with pytest.raises(SizeError):
        read_volume(p)
    bad = bytearray(good)
    bad[344:348] = b"ni1\0"
    p.write_bytes(bytes(bad))
    with pytest.raises(FormatError) as err:
        read_volume(p)
    assert err.value.field == "magic"
    bad = bytearray(good)
    struct.pack_into("<h", bad, 70, 32)  # complex64, unsupported
    p.write_bytes(bytes(bad))
    with pytest.raises(FormatError) as err:
        read_volume(p)
    assert err.value.field == "datatype"
    p.write_bytes(b"\0" * 100)
    with pytest.raises(FormatError):
        read_volume(p)


def test_read_mask_binarizes(tmp_path):
    data = np.zeros((3, 3, 3), dtype=np.uint8)
    data[1, 1, 1] = 5
    mask = read_mask(write_raw(Volume(data), tmp_path / "m.rawvol", "u8"))
    assert mask.count == 1 and mask.bits[1, 1, 1]


def test_resample_identity():
    vol = Volume(np.random.default_rng(2).random((5, 6, 7)))
    out, mask = resample_isotropic(vol, RoiMask(np.ones((5, 6, 7))), 1.0)
    np.testing.assert_array_equal(out.data, vol.data)
    assert mask.count == 5 * 6 * 7


def test_resample_dims_and_constant():
    vol = Volume(np.full((4, 4, 4), 3.25), (2, 2, 2))
    out, mask = resample_isotropic(vol, RoiMask(np.ones((4, 4, 4))), 1.0)
    assert out.dims == (8, 8, 8) and mask.dims == (8, 8, 8)
    assert out.spacing == (1.0, 1.0, 1.0)
    assert np.all(out.data == 3.25)
    out, _ = resample_isotropic(Volume(np.ones((3, 5, 2)), (0.7, 1.3, 2.0)), None, 1.0)
    assert out.dims == (3, 7, 4)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(0.3, 3.0), min_size=3, max_size=3),
    st.integers(0, 2**31 - 1),
)
def test_resample_stays_within_input_range(spacing, seed):
    data = np.random.default_rng(seed).normal(size=(4, 5, 3))
    out, _ = resample_isotropic(Volume(data, tuple(spacing)), None, 1.0)
    assert out.data.min() >= data.min() - 1e-12
    assert out.data.max() <= data.max() + 1e-12


def test_resample_mask_stays_binary():
    bits = np.zeros((6, 6, 6), bool)
    bits[2:4, 2:4, 2:4] = True
    _, mask = resample_isotropic(Volume(np.zeros((6, 6, 6)), (2, 2, 2)), RoiMask(bits), 1.0)
    assert mask.bits.dtype == bool
    assert mask.count == 64  # each set voxel becomes a 2x2x2 block


def test_normalize_examples():
    vol = Volume(np.array([0.0, 100.0, 255.0]).reshape(3, 1, 1))
    np.testing.assert_array_equal(normalize_gray_levels(vol).data.ravel(), [0, 100, 255])
    vol = Volume(np.array([-1.0, 0.0, 1.0]).reshape(3, 1, 1))
    np.testing.assert_array_equal(normalize_gray_levels(vol, 4).data.ravel(), [0, 2, 3])
    assert not normalize_gray_levels(Volume(np.full((2, 2, 2), 9.0))).data.any()


def test_normalize_idempotent_on_full_range():
    data = np.random.default_rng(3).integers(0, 256, (6, 6, 6)).astype(float)
    data[0, 0, 0], data[1, 1, 1] = 0, 255
    once = normalize_gray_levels(Volume(data))
    np.testing.assert_array_equal(normalize_gray_levels(once).data, once.data)
    np.testing.assert_array_equal(once.data, data)


def test_conform_identity_crop_and_pad():
    vol = Volume(np.random.default_rng(4).random((8, 8, 8)))
    out, _ = conform(vol, None, (8, 8, 8))
    np.testing.assert_array_equal(out.data, vol.data)

    data = np.zeros((300, 4, 4))
    data[150, 1, 1] = 1.0
    out, _ = conform(Volume(data), None, (256, 4, 4))
    # start = (300 - 256) // 2 = 22, so index 150 lands on 128
    assert out.data[128, 1, 1] == 1.0 and out.data.sum() == 1.0

    data = np.ones((200, 2, 2))
    out, mask = conform(Volume(data), RoiMask(data), (256, 2, 2))
    assert not out.data[:28].any() and not out.data[228:].any()
    assert out.data[28:228].all()
    assert mask.count == 200 * 4


def test_conform_preserves_masked_sum():
    rng = np.random.default_rng(5)
    data = rng.random((10, 7, 9))
    bits = np.zeros(data.shape, bool)
    bits[3:7, 2:5, 3:6] = True
    out, mask = conform(Volume(data), RoiMask(bits), (8, 12, 8))
    assert np.isclose(out.data[mask.bits].sum(), data[bits].sum())


def test_apply_mask():
    vol = Volume(np.full((3, 3, 3), 7.0))
    assert np.array_equal(apply_mask(vol, RoiMask(np.ones((3, 3, 3)))).data, vol.data)
    bits = np.zeros((3, 3, 3), bool)
    bits[0, 1, 2] = True
    out = apply_mask(vol, RoiMask(bits))
    assert out.data.sum() == 7.0 and out.data[0, 1, 2] == 7.0
    assert not apply_mask(vol, RoiMask(np.zeros((3, 3, 3)))).data.any()
    with pytest.raises(ShapeError):
        apply_mask(vol, RoiMask(np.ones((2, 3, 3))))


def test_preprocess_order():
    rng = np.random.default_rng(6)
    data = rng.normal(size=(6, 6, 6))
    bits = np.zeros(data.shape, bool)
    bits[1:5, 1:5, 1:5] = True
    gray, masked, mask = preprocess(Volume(data), RoiMask(bits), 1.0, 256, (8, 8, 8))
    assert gray.dims == masked.dims == mask.dims == (8, 8, 8)
    inner = gray.data[1:7, 1:7, 1:7]
    assert inner.min() == 0 and inner.max() == 255  # normalized over the whole volume
    np.testing.assert_array_equal(masked.data[~mask.bits], 0)
    np.testing.assert_array_equal(masked.data[mask.bits], gray.data[mask.bits])
