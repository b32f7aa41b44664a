"""Subband-aware denoisers with analytic divergences, and the client side of
the external-denoiser contract.

Divergence convention: the Jacobian trace is taken over real/imaginary pairs
and normalized per complex coefficient (divide by 2), so the identity map has
per-subband divergence exactly 1.  For the complex soft threshold with
per-coefficient threshold t, a coefficient with |r| > t contributes
1 - t/(2|r|), otherwise 0.  Monte-Carlo probing with circular complex unit
noise estimates the same quantity (see gec.mc_subband_trace).
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .transforms import SubbandLayout, WaveletPyramid, dwt2_haar, idwt2_haar


class DenoiserError(ValueError):
    """Invalid denoiser parameters."""


@dataclass
class PrecisionVector:
    """One positive precision per wavelet subband."""

    layout: SubbandLayout
    gammas: np.ndarray    # (L,) float

    def __post_init__(self):
        self.gammas = np.asarray(self.gammas, dtype=float)
        if self.gammas.shape != (self.layout.n_subbands,):
            raise DenoiserError(
                f"expected {self.layout.n_subbands} precisions, got {self.gammas.shape}")
        if not np.all(np.isfinite(self.gammas)) or np.any(self.gammas <= 0):
            raise DenoiserError("precisions must be positive and finite")

    def expand(self):
        """Per-coefficient length-N precision vector (block-constant)."""
        return self.layout.expand(self.gammas)

    def sds(self):
        return 1.0 / np.sqrt(self.gammas)


@dataclass
class DenoiserResult:
    estimate: WaveletPyramid
    subband_divergence: Optional[np.ndarray] = None   # (L,) when analytic


def lambda_from_global(lam, gamma):
    """Per-subband l1 weights making the threshold lam times the subband SD.

    The prox threshold is lambda_ell / gamma_ell, so lambda_ell =
    lam * sqrt(gamma_ell) yields threshold lam / sqrt(gamma_ell).
    """
    if lam < 0:
        raise DenoiserError(f"lambda must be >= 0, got {lam}")
    return lam * np.sqrt(gamma.gammas)


SURE_THRESHOLD_FLOOR = 0.5   # in units of the subband noise SD


def sure_lambda(r2, gamma2, floor=SURE_THRESHOLD_FLOOR):
    """Per-subband l1 weights whose thresholds minimize the unbiased risk
    estimate of complex soft thresholding under CN(0, 1/gamma_ell) noise.

    For threshold t on a subband with noise variance s2 per complex
    coefficient, the risk estimate is
        sum min(|r|, t)^2 - N s2 + 2 s2 sum_{|r|>t} (1 - t / (2|r|)),
    minimized exactly over the candidate set {floor*sd} u {|r_i|} with prefix
    sums.  Thresholds are floored at a fraction of the claimed noise SD: the
    risk estimate is only trustworthy when the claimed noise level is, and an
    unfloored minimizer under a misstated noise level can collapse to the
    identity map.
    """
    layout = r2.layout
    coeffs = np.asarray(r2.coeffs)
    lam = np.empty(layout.n_subbands)
    for ell, band in enumerate(layout.subbands):
        mag = np.sort(np.abs(coeffs[band.start:band.stop]))
        n = mag.size
        s2 = 1.0 / gamma2.gammas[ell]
        t_min = floor * math.sqrt(s2)
        pref2 = np.concatenate([[0.0], np.cumsum(mag ** 2)])
        prefinv = np.concatenate([[0.0], np.cumsum(1.0 / np.maximum(mag, 1e-300))])
        cands = np.concatenate([[t_min], np.clip(mag, t_min, None)])
        ks = np.searchsorted(mag, cands, side="right")
        above = n - ks
        below2 = pref2[ks]
        invsum = prefinv[n] - prefinv[ks]
        risk = below2 + cands ** 2 * above - n * s2 \
            + 2.0 * s2 * (above - 0.5 * cands * invsum)
        lam[ell] = cands[np.argmin(risk)] * gamma2.gammas[ell]
    return lam


def subband_soft_threshold(r2, gamma2, lam):
    """Per-subband complex soft threshold (the weighted-l1 prox) with its
    exact divergence.

    lam holds L nonnegative l1 weights; the threshold in subband ell is
    lam_ell / gamma_ell.
    """
    lam = np.asarray(lam, dtype=float)
    layout = r2.layout
    if lam.shape != (layout.n_subbands,):
        raise DenoiserError(f"expected {layout.n_subbands} weights, got {lam.shape}")
    if np.any(lam < 0):
        raise DenoiserError("l1 weights must be nonnegative")
    thresholds = lam / gamma2.gammas
    coeffs = np.asarray(r2.coeffs, dtype=np.complex128)
    out = np.empty_like(coeffs)
    div = np.empty(layout.n_subbands)
    for ell, band in enumerate(layout.subbands):
        seg = np.ascontiguousarray(coeffs[band.start:band.stop])
        t = np.full(band.size, thresholds[ell])
        res, shrink, count = _kernels.soft_threshold_flat(seg, t)
        out[band.start:band.stop] = res
        div[ell] = (count - shrink) / band.size
    return DenoiserResult(estimate=WaveletPyramid(layout, out), subband_divergence=div)


def sample_correlated_noise(gamma2, seed):
    """Pixel-domain noise whose wavelet subbands are white with variance
    1/gamma_ell: draw per-subband circular complex Gaussian coefficients and
    invert the Haar transform."""
    layout = gamma2.layout
    rng = np.random.default_rng(seed)
    sd = np.sqrt(gamma2.layout.expand(1.0 / gamma2.gammas) / 2.0)
    n = layout.size
    coeffs = sd * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return idwt2_haar(WaveletPyramid(layout, coeffs))


class SoftThresholdDenoiser:
    """Wavelet-native weighted-l1 prox denoiser; the analytic workhorse.

    policy "sure" (default) minimizes the per-subband unbiased risk estimate,
    which keeps the threshold matched to each subband's signal-to-noise.
    policy "global" uses thresholds lam times the subband noise SD (see
    lambda_from_global); ll_weight scales the scaling-band threshold, which
    is best left at 0 for natural images whose coarse band is not sparse.
    """

    def __init__(self, lam=1.0, policy="sure", ll_weight=0.0):
        if lam < 0:
            raise DenoiserError(f"lambda must be >= 0, got {lam}")
        if policy not in ("sure", "global"):
            raise DenoiserError(f"unknown threshold policy {policy!r}")
        self.lam = lam
        self.policy = policy
        self.ll_weight = ll_weight

    def _lam_vec(self, pyr, gamma):
        if self.policy == "sure":
            return sure_lambda(pyr, gamma)
        lam = lambda_from_global(self.lam, gamma)
        lam[0] *= self.ll_weight
        return lam

    def begin_iteration(self, gamma, rng):
        pass

    def apply(self, coeffs, gamma):
        pyr = WaveletPyramid(gamma.layout, coeffs)
        return subband_soft_threshold(pyr, gamma, self._lam_vec(pyr, gamma)).estimate.coeffs

    def subband_divergence(self, coeffs, gamma):
        pyr = WaveletPyramid(gamma.layout, coeffs)
        return subband_soft_threshold(pyr, gamma, self._lam_vec(pyr, gamma)).subband_divergence


class IdentityDenoiser:
    def begin_iteration(self, gamma, rng):
        pass

    def apply(self, coeffs, gamma):
        return np.array(coeffs, copy=True)

    def subband_divergence(self, coeffs, gamma):
        return np.ones(gamma.layout.n_subbands)


class LinearShrinkageDenoiser:
    """Posterior mean under a zero-mean Gaussian iid prior with precision
    gamma0: f(r) = gamma2 r / (gamma0 + gamma2).  Used by fixed-point tests."""

    def __init__(self, gamma0):
        self.gamma0 = float(gamma0)

    def begin_iteration(self, gamma, rng):
        pass

    def apply(self, coeffs, gamma):
        g = gamma.expand()
        return coeffs * (g / (self.gamma0 + g))

    def subband_divergence(self, coeffs, gamma):
        return gamma.gammas / (self.gamma0 + gamma.gammas)


class ExternalDenoiser:
    """Client for a pixel-domain denoiser behind the wire protocol.

    Draws K correlated-noise channels per solver iteration (frozen across the
    probe evaluations within that iteration), converts wavelet coefficients to
    the pixel domain, round-trips through the endpoint, and converts back.
    Divergence is left to Monte-Carlo probing upstream.
    """

    def __init__(self, endpoint, k_channels=1):
        if k_channels < 1:
            raise DenoiserError(f"need K >= 1 noise channels, got {k_channels}")
        self.endpoint = endpoint
        self.k_channels = k_channels
        self._noises = None

    def begin_iteration(self, gamma, rng):
        seeds = rng.integers(0, 2 ** 63 - 1, size=self.k_channels)
        self._noises = [sample_correlated_noise(gamma, int(s)) for s in seeds]

    def apply(self, coeffs, gamma):
        if self._noises is None:
            raise DenoiserError("begin_iteration must run before apply")
        layout = gamma.layout
        u = idwt2_haar(WaveletPyramid(layout, coeffs))
        out = self.endpoint.denoise(u, self._noises, gamma.gammas)
        return dwt2_haar(out, layout.depth, layout).coeffs

    def subband_divergence(self, coeffs, gamma):
        return None


def external_denoise(u, gamma2, k, endpoint, seed):
    """One-shot pixel-domain call through the external-denoiser contract."""
    if k < 1:
        raise DenoiserError(f"need K >= 1 noise channels, got {k}")
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2 ** 63 - 1, size=k)
    noises = [sample_correlated_noise(gamma2, int(s)) for s in seeds]
    est = endpoint.denoise(u, noises, gamma2.gammas)
    layout = gamma2.layout
    return DenoiserResult(estimate=dwt2_haar(est, layout.depth, layout),
                          subband_divergence=None)
