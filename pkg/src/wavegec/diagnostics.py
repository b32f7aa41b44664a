"""Recovery metrics and per-subband error statistics.

Complex subband errors are tested as two real populations (real and
imaginary parts); the per-(subband, sample) zero-mean t-test pools both
parts into a single test so that one decision is made per subband, as in
the reported methodology.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, stats

PSNR_INF = float("inf")


class DiagnosticsError(ValueError):
    pass


def psnr(x_hat, x0):
    """10 log10( N max|x0|^2 / ||x_hat - x0||^2 ); +inf sentinel on zero error."""
    x_hat = np.asarray(x_hat)
    x0 = np.asarray(x0)
    if x_hat.shape != x0.shape:
        raise DiagnosticsError(f"shape mismatch {x_hat.shape} vs {x0.shape}")
    peak2 = float(np.max(np.abs(x0)) ** 2)
    if peak2 == 0.0:
        raise DiagnosticsError("reference image is identically zero")
    err2 = float(np.sum(np.abs(x_hat - x0) ** 2))
    if err2 == 0.0:
        return PSNR_INF
    return 10.0 * math.log10(x0.size * peak2 / err2)


def _gaussian_window_filter(img, sigma, truncate):
    return ndimage.gaussian_filter(img, sigma, mode="nearest", truncate=truncate)


def ssim(x_hat, x0, data_range=None):
    """Mean SSIM over an 11x11 Gaussian window (sigma 1.5), standard
    stabilizers C1=(0.01 L)^2, C2=(0.03 L)^2, on real-valued magnitude images.
    """
    a = np.abs(np.asarray(x_hat)).astype(float)
    b = np.abs(np.asarray(x0)).astype(float)
    if a.shape != b.shape:
        raise DiagnosticsError(f"shape mismatch {a.shape} vs {b.shape}")
    if data_range is None:
        data_range = float(b.max() - b.min())
        if data_range == 0.0:
            data_range = 1.0
    sigma, truncate = 1.5, 3.5
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    mu_a = _gaussian_window_filter(a, sigma, truncate)
    mu_b = _gaussian_window_filter(b, sigma, truncate)
    va = _gaussian_window_filter(a * a, sigma, truncate) - mu_a ** 2
    vb = _gaussian_window_filter(b * b, sigma, truncate) - mu_b ** 2
    cab = _gaussian_window_filter(a * b, sigma, truncate) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cab + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (va + vb + c2)
    smap = num / den
    pad = int(truncate * sigma + 0.5)
    core = smap[pad:smap.shape[0] - pad, pad:smap.shape[1] - pad]
    return float(core.mean())


def subband_support_masks(layout, support):
    """Per-subband boolean masks for support-restricted statistics.

    A coefficient at dyadic level d is kept only when its full 2^d x 2^d
    pixel footprint lies inside the support.  The level-0 (depth-0) band
    uses the support itself.
    """
    support = np.asarray(support, dtype=bool)
    if support.shape != layout.shape:
        raise DiagnosticsError("support shape does not match layout")
    masks = []
    for band in layout.subbands:
        d = band.level if band.level > 0 else layout.depth
        if layout.depth == 0:
            masks.append(support.ravel())
            continue
        s = 1 << d
        h, w = band.grid
        blocks = support[:h * s, :w * s].reshape(h, s, w, s)
        masks.append(blocks.all(axis=(1, 3)).ravel())
    return masks


@dataclass
class SubbandErrorReport:
    means: np.ndarray            # (L,) complex empirical means
    sds: np.ndarray              # (L,) empirical SDs (per complex coefficient)
    t_real: np.ndarray           # (L,) t statistics, real parts
    t_imag: np.ndarray           # (L,)
    p_values: np.ndarray         # (L,) pooled-test p-values
    reject: np.ndarray           # (L,) bool at the requested level
    counts: np.ndarray           # (L,) support-restricted sample counts
    alpha: float
    degenerate: np.ndarray       # (L,) bool, zero-variance subbands


def _t_stat(samples):
    n = samples.size
    if n < 2:
        return 0.0
    sd = samples.std(ddof=1)
    if sd == 0.0:
        return 0.0
    return float(samples.mean() / (sd / math.sqrt(n)))


def subband_error_report(r2, c0, layout, support=None, alpha=0.05):
    """Support-restricted per-subband statistics of the error r2 - c0.

    The zero-mean decision per subband pools real and imaginary parts into
    one two-sided one-sample t-test at level alpha.
    """
    err = np.asarray(r2) - np.asarray(c0)
    if err.shape != (layout.size,):
        raise DiagnosticsError(f"expected flat coefficients of length {layout.size}")
    if support is None:
        masks = [np.ones(b.size, dtype=bool) for b in layout.subbands]
    else:
        masks = subband_support_masks(layout, support)
    n_sub = layout.n_subbands
    means = np.zeros(n_sub, dtype=complex)
    sds = np.zeros(n_sub)
    t_re = np.zeros(n_sub)
    t_im = np.zeros(n_sub)
    pvals = np.ones(n_sub)
    reject = np.zeros(n_sub, dtype=bool)
    counts = np.zeros(n_sub, dtype=int)
    degenerate = np.zeros(n_sub, dtype=bool)
    for ell, band in enumerate(layout.subbands):
        seg = err[band.start:band.stop][masks[ell]]
        counts[ell] = seg.size
        if seg.size == 0:
            raise DiagnosticsError(f"empty support in subband {band.name}")
        means[ell] = seg.mean()
        sds[ell] = math.sqrt(float(np.mean(np.abs(seg - seg.mean()) ** 2)))
        pooled = np.concatenate([seg.real, seg.imag])
        if np.ptp(pooled) == 0.0:
            degenerate[ell] = True
            continue
        t_re[ell] = _t_stat(seg.real)
        t_im[ell] = _t_stat(seg.imag)
        t = _t_stat(pooled)
        pvals[ell] = 2.0 * stats.t.sf(abs(t), pooled.size - 1)
        reject[ell] = pvals[ell] < alpha
    return SubbandErrorReport(means=means, sds=sds, t_real=t_re, t_imag=t_im,
                              p_values=pvals, reject=reject, counts=counts,
                              alpha=alpha, degenerate=degenerate)


def qq_data(samples, n_quantiles=100):
    """(theoretical standard-normal quantile, standardized sample quantile)
    pairs for QQ plotting."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 2:
        raise DiagnosticsError("need at least two samples")
    sd = samples.std(ddof=1)
    if sd == 0.0:
        raise DiagnosticsError("zero-variance samples")
    z = (samples - samples.mean()) / sd
    probs = (np.arange(n_quantiles) + 0.5) / n_quantiles
    theo = stats.norm.ppf(probs)
    emp = np.quantile(z, probs)
    return np.column_stack([theo, emp])


def whiteness_score(field, support=None):
    """Mean of horizontal and vertical lag-1 sample autocorrelations.

    Near 0 for white noise; approaches 1 for heavily smoothed fields.
    Complex fields are scored on pooled real and imaginary parts.
    """
    field = np.asarray(field)
    if field.ndim != 2 or field.size < 4:
        raise DiagnosticsError("need a 2D field with at least 4 entries")
    if support is None:
        support = np.ones(field.shape, dtype=bool)

    def lag1(a, valid):
        vals = []
        for arr, ok in ((a.real, valid), (a.imag, valid)) if np.iscomplexobj(a) else ((a, valid),):
            x, y, m = arr[:, :-1], arr[:, 1:], ok[:, :-1] & ok[:, 1:]
            if np.count_nonzero(m) < 2:
                continue
            xs, ys = x[m], y[m]
            denom = xs.std() * ys.std()
            if denom > 0:
                vals.append(float(np.mean((xs - xs.mean()) * (ys - ys.mean())) / denom))
        return vals

    vals = lag1(field, support) + lag1(field.T, support.T)
    if not vals:
        raise DiagnosticsError("degenerate (constant) field")
    return float(np.mean(vals))


def write_csv(path, header, rows, float_fmt="%.17g"):
    """Deterministic CSV writer: fixed float formatting, '\n' line endings."""
    with open(path, "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([float_fmt % v if isinstance(v, float) else v for v in row])


def write_qq_csv(path, pairs):
    write_csv(path, ["theoretical", "empirical"], [(float(a), float(b)) for a, b in pairs])
