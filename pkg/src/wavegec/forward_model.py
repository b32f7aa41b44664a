"""Fourier measurement operators, sampling masks, coil maps, and phantoms.

The measurement operator stacks, over receive coils c = 1..C,
``mask o centered-DFT o Diag(s_c)``; its wavelet-domain counterpart composes
with the inverse Haar transform.  Masks are stored on the centered k-space
grid (origin at (H//2, W//2)) and gathered row-major, so measurement vectors
have length C*M with coil-major order.

Noise convention: circularly symmetric complex Gaussian with per-component
variance sigma^2/2, so E|w_i|^2 = sigma^2 and the recorded precision is
gamma_w = 1/sigma^2.  A noiseless (infinite SNR) simulation records the
sentinel precision GAMMA_W_NOISELESS.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .transforms import (SubbandLayout, WaveletPyramid, dft2, dwt2_haar,
                         idft2, idwt2_haar, kspace_center, kspace_uncenter,
                         make_layout)

GAMMA_W_NOISELESS = 1e12   # stands in for infinite measurement precision


class ForwardModelError(ValueError):
    """Inconsistent shapes or infeasible mask/measurement parameters."""


@dataclass
class SamplingMask:
    shape: tuple
    kind: str                 # "point2d" or "line2d"
    sampled: np.ndarray       # bool grid on the centered k-space layout
    acceleration: Fraction
    calib: int = 0            # calib block size (point) or band width (line); 0 = none

    @property
    def n_sampled(self):
        return int(np.count_nonzero(self.sampled))

    def indices(self):
        """Row-major flat indices of the sampled cells on the centered grid."""
        return np.flatnonzero(self.sampled.ravel())


@dataclass
class CoilMaps:
    maps: np.ndarray          # (C, H, W) complex
    support: np.ndarray       # (H, W) bool

    @property
    def n_coils(self):
        return self.maps.shape[0]


@dataclass
class MeasurementSet:
    y: np.ndarray             # (C*M,) complex
    gamma_w: float
    snr_db: float
    seed: int


@dataclass
class ForwardModel:
    mask: SamplingMask
    coils: CoilMaps
    layout: SubbandLayout = field(default=None)

    def __post_init__(self):
        if self.coils.maps.shape[1:] != self.mask.shape:
            raise ForwardModelError(
                f"coil maps {self.coils.maps.shape[1:]} vs mask {self.mask.shape}")
        if self.layout is None:
            self.layout = make_layout(self.mask.shape, 4)
        elif self.layout.shape != self.mask.shape:
            raise ForwardModelError("layout shape does not match mask shape")

    @property
    def shape(self):
        return self.mask.shape

    @property
    def n_measurements(self):
        return self.coils.n_coils * self.mask.n_sampled


def _center_slices(shape, size):
    h, w = shape
    return (slice(h // 2 - size // 2, h // 2 - size // 2 + size),
            slice(w // 2 - size // 2, w // 2 - size // 2 + size))


def _radial_weights(shape, q):
    h, w = shape
    ki = (np.arange(h) - h // 2) / max(h // 2, 1)
    kj = (np.arange(w) - w // 2) / max(w // 2, 1)
    r = np.sqrt(ki[:, None] ** 2 + kj[None, :] ** 2)
    wts = np.clip(1.0 - r, 0.0, None) ** q
    # small uniform floor keeps far corners reachable when the budget is large
    return wts + 1e-6


def make_point_mask(shape, r, density_exponent=8.0, calib_size=0, seed=0):
    """Variable-density 2D point mask with exactly floor(N/R) samples.

    The sampling density decays as (1 - |k|/k_max)^q from the k-space center;
    a central calib_size x calib_size block is always fully sampled.
    """
    h, w = shape
    n = h * w
    if r < 1:
        raise ForwardModelError(f"acceleration must be >= 1, got {r}")
    budget = int(n // r)
    sampled = np.zeros(shape, dtype=bool)
    if calib_size:
        sampled[_center_slices(shape, calib_size)] = True
    n_calib = int(np.count_nonzero(sampled))
    if budget < n_calib:
        raise ForwardModelError(
            f"budget {budget} cannot cover the {n_calib}-sample calib region")
    free = np.flatnonzero(~sampled.ravel())
    wts = _radial_weights(shape, density_exponent).ravel()[free]
    rng = np.random.default_rng(seed)
    pick = rng.choice(free.size, size=budget - n_calib, replace=False, p=wts / wts.sum())
    flat = sampled.ravel()
    flat[free[pick]] = True
    return SamplingMask(shape=shape, kind="point2d", sampled=flat.reshape(shape),
                        acceleration=Fraction(n, budget), calib=calib_size)


def make_line_mask(shape, r, density_exponent=8.0, calib_width=0, seed=0):
    """Variable-density 2D line mask: full columns, exactly floor(W/R) of them.

    Axis 0 (rows) is fully sampled; columns are drawn with a 1D density
    decaying from the center, and a central band of calib_width columns is
    always included.
    """
    h, w = shape
    if r < 1:
        raise ForwardModelError(f"acceleration must be >= 1, got {r}")
    n_lines = int(w // r)
    cols = np.zeros(w, dtype=bool)
    if calib_width:
        lo = w // 2 - calib_width // 2
        cols[lo:lo + calib_width] = True
    n_calib = int(np.count_nonzero(cols))
    if n_lines < n_calib:
        raise ForwardModelError(
            f"{n_lines} lines cannot cover the {n_calib}-wide calib band")
    free = np.flatnonzero(~cols)
    kj = (np.arange(w) - w // 2) / max(w // 2, 1)
    wts = (np.clip(1.0 - np.abs(kj), 0.0, None) ** density_exponent + 1e-6)[free]
    rng = np.random.default_rng(seed)
    pick = rng.choice(free.size, size=n_lines - n_calib, replace=False, p=wts / wts.sum())
    cols[free[pick]] = True
    sampled = np.broadcast_to(cols, shape).copy()
    return SamplingMask(shape=shape, kind="line2d", sampled=sampled,
                        acceleration=Fraction(w, n_lines), calib=calib_width)


def full_mask(shape):
    return SamplingMask(shape=shape, kind="point2d",
                        sampled=np.ones(shape, dtype=bool),
                        acceleration=Fraction(1), calib=0)


def generate_coil_maps(shape, n_coils, smoothness=4.0, seed=0, support="full"):
    """Smooth random coil sensitivities, unit sum-of-squares on the support.

    support: "full" (all pixels) or "ellipse" (interior ellipse; pixels
    outside carry exactly-zero maps on every coil).
    """
    h, w = shape
    if n_coils < 1:
        raise ForwardModelError(f"need at least one coil, got {n_coils}")
    if support == "full":
        sup = np.ones(shape, dtype=bool)
    elif support == "ellipse":
        yy = (np.arange(h) - (h - 1) / 2) / (h / 2)
        xx = (np.arange(w) - (w - 1) / 2) / (w / 2)
        sup = (yy[:, None] ** 2 + xx[None, :] ** 2) <= 0.9 ** 2
    else:
        raise ForwardModelError(f"unknown support kind {support!r}")

    if n_coils == 1:
        maps = sup.astype(np.complex128)[None]
        return CoilMaps(maps=maps, support=sup)

    rng = np.random.default_rng(seed)
    # low-pass filter white noise in k-space for smooth complex fields
    ki = (np.arange(h) - h // 2) / max(h / smoothness, 1.0)
    kj = (np.arange(w) - w // 2) / max(w / smoothness, 1.0)
    lowpass = np.exp(-0.5 * (ki[:, None] ** 2 + kj[None, :] ** 2))
    spec = (rng.standard_normal((n_coils, h, w)) + 1j * rng.standard_normal((n_coils, h, w)))
    fields = idft2(kspace_uncenter(spec * lowpass))
    # deterministic per-coil offset keeps the sum-of-squares away from zero
    fields += 0.25 * np.exp(2j * np.pi * np.arange(n_coils) / n_coils)[:, None, None]
    norm = np.sqrt(np.sum(np.abs(fields) ** 2, axis=0))
    maps = np.where(sup, fields / norm, 0.0)
    return CoilMaps(maps=maps, support=sup)


def apply_A(x, fm):
    """Pixel image(s) (..., H, W) -> measurement vector(s) (..., C*M)."""
    x = np.asarray(x, dtype=np.complex128)
    if x.shape[-2:] != fm.shape:
        raise ForwardModelError(f"image shape {x.shape[-2:]} vs model {fm.shape}")
    z = x[..., None, :, :] * fm.coils.maps
    k = kspace_center(dft2(z))
    y = k[..., fm.mask.sampled]
    return y.reshape(x.shape[:-2] + (-1,))


def apply_AH(y, fm):
    """Adjoint of apply_A: (..., C*M) -> (..., H, W)."""
    y = np.asarray(y, dtype=np.complex128)
    c, m = fm.coils.n_coils, fm.mask.n_sampled
    if y.shape[-1] != c * m:
        raise ForwardModelError(f"measurement length {y.shape[-1]} vs expected {c * m}")
    k = np.zeros(y.shape[:-1] + (c,) + fm.shape, dtype=np.complex128)
    k[..., fm.mask.sampled] = y.reshape(y.shape[:-1] + (c, m))
    z = idft2(kspace_uncenter(k))
    return np.sum(np.conj(fm.coils.maps) * z, axis=-3)


def apply_B(pyr, fm):
    """Wavelet-domain operator: coefficients (..., N) -> measurements."""
    return apply_A(idwt2_haar(pyr), fm)


def apply_BH(y, fm):
    """Adjoint of apply_B: measurements -> WaveletPyramid."""
    return dwt2_haar(apply_AH(y, fm), fm.layout.depth, fm.layout)


def simulate_measurements(x0, fm, snr_db, seed=0):
    """y = A x0 + w with w scaled to hit the requested SNR in expectation.

    SNR is defined as ||A x0||^2 / ||w||^2; snr_db = +inf produces w = 0 and
    the sentinel precision GAMMA_W_NOISELESS.
    """
    clean = apply_A(x0, fm)
    energy = float(np.sum(np.abs(clean) ** 2))
    if energy == 0.0:
        raise ForwardModelError("zero-energy image, SNR undefined")
    if math.isinf(snr_db):
        return MeasurementSet(y=clean, gamma_w=GAMMA_W_NOISELESS,
                              snr_db=float("inf"), seed=seed)
    if not math.isfinite(snr_db):
        raise ForwardModelError(f"invalid snr_db {snr_db}")
    p = clean.shape[-1]
    sigma2 = energy / (p * 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    w = np.sqrt(sigma2 / 2.0) * (rng.standard_normal(p) + 1j * rng.standard_normal(p))
    return MeasurementSet(y=clean + w, gamma_w=1.0 / sigma2, snr_db=snr_db, seed=seed)


def ground_truth_from_full(y_full, coils):
    """Least-squares ground truth from fully sampled data: A_full^H y_full.

    Valid because unit coil normalization makes A_full^H A_full the support
    projector, so the pseudo-inverse solve collapses to the adjoint.
    """
    shape = coils.support.shape
    fm = ForwardModel(mask=full_mask(shape), coils=coils,
                      layout=_layout_for(shape))
    return apply_AH(y_full, fm)


def _layout_for(shape):
    depth = 4
    while depth > 1 and (shape[0] % (1 << depth) or shape[1] % (1 << depth)):
        depth -= 1
    return make_layout(shape, depth)


# modified Shepp-Logan ellipses: (intensity, a, b, x0, y0, angle_deg)
_SHEPP_LOGAN = (
    (1.00, 0.69, 0.92, 0.0, 0.0, 0),
    (-0.80, 0.6624, 0.874, 0.0, -0.0184, 0),
    (-0.20, 0.11, 0.31, 0.22, 0.0, -18),
    (-0.20, 0.16, 0.41, -0.22, 0.0, 18),
    (0.10, 0.21, 0.25, 0.0, 0.35, 0),
    (0.10, 0.046, 0.046, 0.0, 0.1, 0),
    (0.10, 0.046, 0.046, 0.0, -0.1, 0),
    (0.10, 0.046, 0.023, -0.08, -0.605, 0),
    (0.10, 0.023, 0.023, 0.0, -0.606, 0),
    (0.10, 0.023, 0.046, 0.06, -0.605, 0),
)


def _shepp_logan(shape):
    h, w = shape
    y = np.linspace(-1, 1, h)[:, None]
    x = np.linspace(-1, 1, w)[None, :]
    img = np.zeros(shape)
    for inten, a, b, cx, cy, ang in _SHEPP_LOGAN:
        th = np.deg2rad(ang)
        xr = (x - cx) * np.cos(th) + (y - cy) * np.sin(th)
        yr = -(x - cx) * np.sin(th) + (y - cy) * np.cos(th)
        img += inten * ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0)
    return np.clip(img, 0.0, None)


def _smooth_field(shape, rng, cutoff):
    h, w = shape
    ki = (np.arange(h) - h // 2) / max(h / cutoff, 1.0)
    kj = (np.arange(w) - w // 2) / max(w / cutoff, 1.0)
    lowpass = np.exp(-0.5 * (ki[:, None] ** 2 + kj[None, :] ** 2))
    spec = rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
    return idft2(kspace_uncenter(spec * lowpass))


def generate_phantom(shape, kind="shepp_logan", seed=0, sparsity=0.05):
    """Deterministic synthetic test image, scaled so q98(|pixels|) = 1.

    kinds: "shepp_logan" (real, nonnegative), "piecewise_smooth" (complex:
    smooth blobs and plateaus with a smooth phase), "random_wavelet_sparse"
    (complex, sparse Haar coefficients; sparsity is the nonzero fraction).
    """
    rng = np.random.default_rng(seed)
    if kind == "shepp_logan":
        img = _shepp_logan(shape).astype(np.complex128)
    elif kind == "piecewise_smooth":
        h, w = shape
        y = np.linspace(-1, 1, h)[:, None]
        x = np.linspace(-1, 1, w)[None, :]
        mag = np.abs(_smooth_field(shape, rng, 6.0)) * 0.4
        for _ in range(4):
            cx, cy = rng.uniform(-0.6, 0.6, size=2)
            a, b = rng.uniform(0.15, 0.5, size=2)
            mag += rng.uniform(0.3, 1.0) * (((x - cx) / a) ** 2 + ((y - cy) / b) ** 2 <= 1.0)
        phase = np.real(_smooth_field(shape, rng, 3.0))
        phase *= 0.5 / max(np.max(np.abs(phase)), 1e-12)
        img = mag * np.exp(1j * np.pi * phase)
    elif kind == "random_wavelet_sparse":
        layout = _layout_for(shape)
        n = layout.size
        coeffs = np.zeros(n, dtype=np.complex128)
        k = int(round(sparsity * n))
        if k:
            idx = rng.choice(n, size=k, replace=False)
            coeffs[idx] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        img = idwt2_haar(WaveletPyramid(layout, coeffs))
    else:
        raise ForwardModelError(f"unknown phantom kind {kind!r}")

    q98 = float(np.quantile(np.abs(img), 0.98))
    if q98 > 0:
        img = img / q98
    return img
