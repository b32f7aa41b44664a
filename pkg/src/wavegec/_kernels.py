"""Hot numeric kernels: one Haar analysis/synthesis level and complex soft-thresholding.

Two interchangeable backends are provided:

* a numba ``@njit`` backend (default when numba is importable), and
* a pure-numpy backend.

Set the environment variable ``WAVEGEC_DISABLE_NUMBA=1`` before import to force
the numpy backend.  ``USING_NUMBA`` records which backend is active, and
``benchmarks/bench_kernels.py`` compares the two.

All kernels operate on stacks shaped (B, h, w) or flat complex vectors in
complex128.  The two backends evaluate the same formulas; elementwise outputs
are bitwise identical, scalar reductions agree to accumulation order.
"""

import os

import numpy as np

_DISABLE = os.environ.get("WAVEGEC_DISABLE_NUMBA", "") == "1"

USING_NUMBA = False
if not _DISABLE:
    try:
        from numba import njit

        USING_NUMBA = True
    except ImportError:
        USING_NUMBA = False


def _haar_analysis_level_np(x):
    """One orthonormal Haar level on a stack (B, 2h, 2w) -> (ll, lh, hl, hh).

    With the 2x2 block [[a, b], [c, d]] (a = x[2i,2j], b = x[2i,2j+1], ...):
        ll = (a + b + c + d)/2      lh = (a - b + c - d)/2
        hl = (a + b - c - d)/2      hh = (a - b - c + d)/2
    lh is high-pass along axis 1, hl is high-pass along axis 0.
    """
    a = x[:, 0::2, 0::2]
    b = x[:, 0::2, 1::2]
    c = x[:, 1::2, 0::2]
    d = x[:, 1::2, 1::2]
    ll = (a + b + c + d) * 0.5
    lh = (a - b + c - d) * 0.5
    hl = (a + b - c - d) * 0.5
    hh = (a - b - c + d) * 0.5
    return ll, lh, hl, hh


def _haar_synthesis_level_np(ll, lh, hl, hh):
    """Inverse of one Haar level: (B, h, w) quadruple -> (B, 2h, 2w).

    The 4x4 butterfly is symmetric orthogonal, hence self-inverse.
    """
    bsz, h, w = ll.shape
    x = np.empty((bsz, 2 * h, 2 * w), dtype=ll.dtype)
    x[:, 0::2, 0::2] = (ll + lh + hl + hh) * 0.5
    x[:, 0::2, 1::2] = (ll - lh + hl - hh) * 0.5
    x[:, 1::2, 0::2] = (ll + lh - hl - hh) * 0.5
    x[:, 1::2, 1::2] = (ll - lh - hl + hh) * 0.5
    return x


def _soft_threshold_np(coeffs, thresholds):
    """Complex soft threshold with a per-coefficient threshold vector.

    Returns (out, shrink_sum, active_count).  A coefficient is active when
    |r| > t, or always when t == 0 (the map is then the identity there).
    Over active coefficients, shrink_sum accumulates t/(2|r|) and
    active_count counts them; the Jacobian trace of the map, normalized per
    complex coefficient, is active_count - shrink_sum.
    """
    mag = np.abs(coeffs)
    active = (mag > thresholds) | (thresholds == 0.0)
    safe = np.where(mag > 0.0, mag, 1.0)
    ratio = np.where(active, thresholds / safe, 0.0)
    out = coeffs * np.where(active, 1.0 - ratio, 0.0)
    shrink_sum = float(np.sum(ratio) * 0.5)
    return out, shrink_sum, int(np.count_nonzero(active))


if USING_NUMBA:

    @njit(cache=True)
    def _haar_analysis_level_nb(x):
        bsz, hh2, ww2 = x.shape
        h = hh2 // 2
        w = ww2 // 2
        ll = np.empty((bsz, h, w), dtype=x.dtype)
        lh = np.empty((bsz, h, w), dtype=x.dtype)
        hl = np.empty((bsz, h, w), dtype=x.dtype)
        hh = np.empty((bsz, h, w), dtype=x.dtype)
        for k in range(bsz):
            for i in range(h):
                for j in range(w):
                    a = x[k, 2 * i, 2 * j]
                    b = x[k, 2 * i, 2 * j + 1]
                    c = x[k, 2 * i + 1, 2 * j]
                    d = x[k, 2 * i + 1, 2 * j + 1]
                    ll[k, i, j] = (a + b + c + d) * 0.5
                    lh[k, i, j] = (a - b + c - d) * 0.5
                    hl[k, i, j] = (a + b - c - d) * 0.5
                    hh[k, i, j] = (a - b - c + d) * 0.5
        return ll, lh, hl, hh

    @njit(cache=True)
    def _haar_synthesis_level_nb(ll, lh, hl, hh):
        bsz, h, w = ll.shape
        x = np.empty((bsz, 2 * h, 2 * w), dtype=ll.dtype)
        for k in range(bsz):
            for i in range(h):
                for j in range(w):
                    pa = ll[k, i, j]
                    pb = lh[k, i, j]
                    pc = hl[k, i, j]
                    pd = hh[k, i, j]
                    x[k, 2 * i, 2 * j] = (pa + pb + pc + pd) * 0.5
                    x[k, 2 * i, 2 * j + 1] = (pa - pb + pc - pd) * 0.5
                    x[k, 2 * i + 1, 2 * j] = (pa + pb - pc - pd) * 0.5
                    x[k, 2 * i + 1, 2 * j + 1] = (pa - pb - pc + pd) * 0.5
        return x

    @njit(cache=True)
    def _soft_threshold_nb(coeffs, thresholds):
        n = coeffs.shape[0]
        out = np.empty_like(coeffs)
        shrink_sum = 0.0
        count = 0
        for i in range(n):
            r = coeffs[i]
            t = thresholds[i]
            mag = abs(r)
            if t == 0.0:
                out[i] = r
                count += 1
            elif mag > t:
                out[i] = r * (1.0 - t / mag)
                shrink_sum += t / (2.0 * mag)
                count += 1
            else:
                out[i] = 0.0
        return out, shrink_sum, count

    def haar_analysis_level(x):
        return _haar_analysis_level_nb(x)

    def haar_synthesis_level(ll, lh, hl, hh):
        return _haar_synthesis_level_nb(ll, lh, hl, hh)

    def soft_threshold_flat(coeffs, thresholds):
        out, s, c = _soft_threshold_nb(np.ascontiguousarray(coeffs), np.ascontiguousarray(thresholds))
        return out, float(s), int(c)

else:

    def haar_analysis_level(x):
        return _haar_analysis_level_np(x)

    def haar_synthesis_level(ll, lh, hl, hh):
        return _haar_synthesis_level_np(ll, lh, hl, hh)

    def soft_threshold_flat(coeffs, thresholds):
        return _soft_threshold_np(coeffs, thresholds)
