"""Binary file formats for images and sampling masks.

CIM1 (complex image):
    16-byte header: magic b"CIM1", u32 height, u32 width, u32 flags (reserved,
    written as 0), all little-endian; then height*width float32 (re, im)
    pairs, row-major, little-endian.

MSK1 (sampling mask):
    28-byte header: magic b"MSK1", u32 height, u32 width, u32 kind (0 = point2d,
    1 = line2d), u32 R numerator, u32 R denominator, u32 calib size; then the
    boolean grid on the centered k-space layout, row-major, bit-packed 8 cells
    per byte, LSB first.
"""

import struct
from fractions import Fraction

import numpy as np

from .forward_model import SamplingMask

_CIM_HDR = struct.Struct("<4sIII")
_MSK_HDR = struct.Struct("<4sIIIIII")
_KINDS = ("point2d", "line2d")


class FileFormatError(ValueError):
    """Malformed or truncated CIM1/MSK1 payload."""


def encode_image(img):
    img = np.asarray(img)
    if img.ndim != 2:
        raise FileFormatError(f"CIM1 stores 2D arrays, got ndim={img.ndim}")
    h, w = img.shape
    inter = np.empty((h, w, 2), dtype="<f4")
    inter[..., 0] = img.real
    inter[..., 1] = img.imag
    return _CIM_HDR.pack(b"CIM1", h, w, 0) + inter.tobytes()


def decode_image(buf):
    if len(buf) < _CIM_HDR.size:
        raise FileFormatError("truncated CIM1 header")
    magic, h, w, _flags = _CIM_HDR.unpack_from(buf)
    if magic != b"CIM1":
        raise FileFormatError(f"bad magic {magic!r}")
    need = _CIM_HDR.size + h * w * 8
    if len(buf) != need:
        raise FileFormatError(f"CIM1 payload is {len(buf)} bytes, expected {need}")
    inter = np.frombuffer(buf, dtype="<f4", offset=_CIM_HDR.size).reshape(h, w, 2)
    return (inter[..., 0] + 1j * inter[..., 1]).astype(np.complex128)


def write_image(path, img):
    with open(path, "wb") as f:
        f.write(encode_image(img))


def read_image(path):
    with open(path, "rb") as f:
        return decode_image(f.read())


def write_mask(path, mask):
    h, w = mask.shape
    r = mask.acceleration
    hdr = _MSK_HDR.pack(b"MSK1", h, w, _KINDS.index(mask.kind),
                        r.numerator, r.denominator, mask.calib)
    packed = np.packbits(mask.sampled.ravel().astype(np.uint8), bitorder="little")
    with open(path, "wb") as f:
        f.write(hdr + packed.tobytes())


def read_mask(path):
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < _MSK_HDR.size:
        raise FileFormatError("truncated MSK1 header")
    magic, h, w, kind, num, den, calib = _MSK_HDR.unpack_from(buf)
    if magic != b"MSK1":
        raise FileFormatError(f"bad magic {magic!r}")
    if kind >= len(_KINDS):
        raise FileFormatError(f"unknown mask kind {kind}")
    n = h * w
    need = _MSK_HDR.size + (n + 7) // 8
    if len(buf) != need:
        raise FileFormatError(f"MSK1 payload is {len(buf)} bytes, expected {need}")
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8, offset=_MSK_HDR.size),
                         count=n, bitorder="little")
    return SamplingMask(shape=(h, w), kind=_KINDS[kind],
                        sampled=bits.astype(bool).reshape(h, w),
                        acceleration=Fraction(num, den), calib=calib)
