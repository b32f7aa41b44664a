"""Unitary 2D DFT and orthogonal 2D Haar DWT with an explicit subband layout.

Conventions used throughout the package:

* Images are complex ndarrays of shape (..., H, W); all operations broadcast
  over leading axes.  Computation is done in complex128 (the float32-based
  file format is handled in :mod:`wavegec.fileio`).
* The DFT stores the k-space origin at index (0, 0); ``kspace_center`` /
  ``kspace_uncenter`` map to and from the centered layout used by sampling
  masks.
* Wavelet coefficients are stored as flat vectors of length N = H*W in the
  subband order: scaling band LL at the coarsest level D first, then for each
  level d = D, D-1, ..., 1 the detail triple (LH_d, HL_d, HH_d), where LH is
  high-pass along axis 1 and HL is high-pass along axis 0.  Each subband is
  row-major within its own grid.  A depth-D transform has L = 3D+1 subbands.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels


class TransformError(ValueError):
    """Invalid input to a transform (shape, divisibility, non-finite data)."""


@dataclass(frozen=True)
class Subband:
    name: str
    level: int          # dyadic level; 0 denotes the scaling band
    start: int          # offset of this subband in the flat coefficient vector
    stop: int
    grid: tuple         # (h, w) of the subband's own grid

    @property
    def size(self):
        return self.stop - self.start


@dataclass(frozen=True)
class SubbandLayout:
    """Subband index map for a depth-D Haar decomposition of an (H, W) image."""

    depth: int
    shape: tuple
    subbands: tuple

    @property
    def n_subbands(self):
        return len(self.subbands)

    @property
    def size(self):
        h, w = self.shape
        return h * w

    def slices(self):
        return [slice(b.start, b.stop) for b in self.subbands]

    def expand(self, per_subband):
        """Expand L per-subband values to a flat length-N vector."""
        per_subband = np.asarray(per_subband)
        if per_subband.shape != (self.n_subbands,):
            raise TransformError(
                f"expected {self.n_subbands} per-subband values, got shape {per_subband.shape}"
            )
        out = np.empty(self.size, dtype=per_subband.dtype)
        for band, v in zip(self.subbands, per_subband):
            out[band.start:band.stop] = v
        return out

    def subband_view(self, coeffs, ell):
        """Flat view of subband ell of a (..., N) coefficient array."""
        band = self.subbands[ell]
        return coeffs[..., band.start:band.stop]


def make_layout(shape, depth):
    """Build the canonical SubbandLayout for an (H, W) image at a given depth.

    depth = 0 is the identity decomposition: a single subband covering the
    whole image (L = 1), which reduces subband-structured algorithms to
    their scalar-precision form.
    """
    h, w = shape
    if depth < 0:
        raise TransformError(f"depth must be >= 0, got {depth}")
    div = 1 << depth
    if h % div or w % div:
        raise TransformError(
            f"image shape {shape} is not divisible by 2^{depth}; "
            "pick a smaller depth or resize"
        )
    bands = []
    pos = 0

    def add(name, level, gh, gw):
        nonlocal pos
        bands.append(Subband(name, level, pos, pos + gh * gw, (gh, gw)))
        pos += gh * gw

    add(f"LL{depth}", 0, h >> depth, w >> depth)
    for d in range(depth, 0, -1):
        gh, gw = h >> d, w >> d
        add(f"LH{d}", d, gh, gw)
        add(f"HL{d}", d, gh, gw)
        add(f"HH{d}", d, gh, gw)
    return SubbandLayout(depth=depth, shape=(h, w), subbands=tuple(bands))


@dataclass
class WaveletPyramid:
    """Flat Haar coefficient vector(s) plus the layout that indexes them."""

    layout: SubbandLayout
    coeffs: np.ndarray    # shape (..., N)

    def copy(self):
        return WaveletPyramid(self.layout, self.coeffs.copy())


def _check_image(x):
    x = np.asarray(x)
    if x.ndim < 2:
        raise TransformError(f"expected a (..., H, W) array, got ndim={x.ndim}")
    if not np.all(np.isfinite(x)):
        raise TransformError("non-finite entries in input image")
    return np.asarray(x, dtype=np.complex128)


def dft2(x):
    """Unitary 2D DFT over the trailing two axes (origin at index 0)."""
    x = _check_image(x)
    return np.fft.fft2(x, norm="ortho")


def idft2(k):
    """Inverse (adjoint) of dft2."""
    k = _check_image(k)
    return np.fft.ifft2(k, norm="ortho")


def kspace_center(k):
    """Move the k-space origin from index 0 to the grid center (fftshift)."""
    return np.fft.fftshift(k, axes=(-2, -1))


def kspace_uncenter(k):
    """Inverse of kspace_center."""
    return np.fft.ifftshift(k, axes=(-2, -1))


def dwt2_haar(x, depth, layout=None):
    """Depth-D orthonormal 2D Haar transform; returns a WaveletPyramid.

    Accepts (..., H, W); coefficient vectors come back as (..., N).
    """
    x = _check_image(x)
    shape = x.shape[-2:]
    if layout is None:
        layout = make_layout(shape, depth)
    elif layout.shape != shape or layout.depth != depth:
        raise TransformError("layout does not match image shape/depth")

    lead = x.shape[:-2]
    work = x.reshape((-1,) + shape)
    coeffs = np.empty(work.shape[:1] + (layout.size,), dtype=np.complex128)

    ll = work
    details = []   # one (lh, hl, hh) triple per level, finest first
    for _ in range(depth):
        ll, lh, hl, hh = _kernels.haar_analysis_level(np.ascontiguousarray(ll))
        details.append((lh, hl, hh))

    bands = layout.subbands
    coeffs[:, bands[0].start:bands[0].stop] = ll.reshape(ll.shape[0], -1)
    idx = 1
    for d in range(depth, 0, -1):
        lh, hl, hh = details[d - 1]
        for block in (lh, hl, hh):
            band = bands[idx]
            coeffs[:, band.start:band.stop] = block.reshape(block.shape[0], -1)
            idx += 1
    return WaveletPyramid(layout, coeffs.reshape(lead + (layout.size,)))


def idwt2_haar(pyr):
    """Exact inverse (= adjoint) of dwt2_haar; returns (..., H, W) images."""
    layout = pyr.layout
    coeffs = np.asarray(pyr.coeffs, dtype=np.complex128)
    if coeffs.shape[-1] != layout.size:
        raise TransformError(
            f"coefficient length {coeffs.shape[-1]} does not match layout size {layout.size}"
        )
    lead = coeffs.shape[:-1]
    work = coeffs.reshape((-1, layout.size))
    bands = layout.subbands

    b0 = bands[0]
    ll = work[:, b0.start:b0.stop].reshape((-1,) + b0.grid)
    idx = 1
    for d in range(layout.depth, 0, -1):
        blocks = []
        for _ in range(3):
            band = bands[idx]
            blocks.append(work[:, band.start:band.stop].reshape((-1,) + band.grid))
            idx += 1
        lh, hl, hh = blocks
        ll = _kernels.haar_synthesis_level(
            np.ascontiguousarray(ll), np.ascontiguousarray(lh),
            np.ascontiguousarray(hl), np.ascontiguousarray(hh))
    return ll.reshape(lead + layout.shape)
