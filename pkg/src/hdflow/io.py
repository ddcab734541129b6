"""Binary file formats: HFLD field files and HCKP parameter checkpoints.

HFLD layout (little-endian):
    bytes 0-3   magic ``HFLD``
    u8          version = 1
    u8          channels (1 = scalar, 2 = vector)
    u16         reserved = 0
    u32         width
    u32         height
    float32[]   channels * width * height values, row-major, channel-planar

HCKP layout (little-endian):
    bytes 0-3   magic ``HCKP``
    u32         version = 1
    u32         number of parameter blocks
    per block:  u32 name length, UTF-8 name, u32 ndim, u32 dims..., float32 data
"""

from __future__ import annotations

import struct

import numpy as np

from .fields import ScalarField, VectorField

HFLD_MAGIC = b"HFLD"
HCKP_MAGIC = b"HCKP"


class FormatError(ValueError):
    """Raised when a binary file does not conform to its declared format."""


def write_hfld(path, field: ScalarField | VectorField) -> None:
    if isinstance(field, ScalarField):
        channels = [field.data]
    else:
        channels = [field.u, field.w]
    h, w = channels[0].shape
    with open(path, "wb") as fh:
        fh.write(HFLD_MAGIC)
        fh.write(struct.pack("<BBH", 1, len(channels), 0))
        fh.write(struct.pack("<II", w, h))
        for c in channels:
            fh.write(np.ascontiguousarray(c, dtype="<f4").tobytes())


def read_hfld(path, spacing: float | None = None) -> ScalarField | VectorField:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16 or raw[:4] != HFLD_MAGIC:
        raise FormatError(f"{path}: not an HFLD file")
    version, nchan, reserved = struct.unpack_from("<BBH", raw, 4)
    if version != 1:
        raise FormatError(f"{path}: unsupported HFLD version {version}")
    if nchan not in (1, 2):
        raise FormatError(f"{path}: invalid channel count {nchan}")
    if reserved != 0:
        raise FormatError(f"{path}: reserved header field must be 0")
    w, h = struct.unpack_from("<II", raw, 8)
    expected = 16 + 4 * nchan * w * h
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, got {len(raw)}")
    planes = np.frombuffer(raw, dtype="<f4", offset=16).reshape(nchan, h, w)
    if nchan == 1:
        return ScalarField(planes[0].astype(np.float64), spacing)
    return VectorField(planes[0].astype(np.float64), planes[1].astype(np.float64), spacing)


def write_hckp(path, params: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(HCKP_MAGIC)
        fh.write(struct.pack("<II", 1, len(params)))
        for name, value in params.items():
            encoded = name.encode("utf-8")
            # asarray keeps 0-d shapes; ascontiguousarray would promote to 1-d
            arr = np.asarray(value, dtype="<f4", order="C")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def read_hckp(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != HCKP_MAGIC:
        raise FormatError(f"{path}: not an HCKP file")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != 1:
        raise FormatError(f"{path}: unsupported HCKP version {version}")
    offset = 12
    params: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            name = raw[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            shape = struct.unpack_from(f"<{ndim}I", raw, offset)
            offset += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(raw, dtype="<f4", count=size, offset=offset)
            offset += 4 * size
            params[name] = data.reshape(shape).astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise FormatError(f"{path}: truncated or corrupt checkpoint") from exc
    if offset != len(raw):
        raise FormatError(f"{path}: trailing bytes after last parameter block")
    return params
