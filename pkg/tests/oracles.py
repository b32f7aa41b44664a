"""Independent dense reference implementations used as test oracles.

Everything here is deliberately built from explicit dense matrices and
textbook formulas, sharing no code with the package under test.
"""

import numpy as np


def dense_dft_matrix(h, w):
    """Unitary 2D DFT as an (h*w, h*w) matrix acting on row-major vec(X)."""
    def f1d(n):
        j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        return np.exp(-2j * np.pi * j * k / n) / np.sqrt(n)
    return np.kron(f1d(h), f1d(w))


def _haar_pair(n):
    """1D orthonormal Haar analysis matrices: lowpass (n/2, n) and highpass."""
    lo = np.zeros((n // 2, n))
    hi = np.zeros((n // 2, n))
    r = 1.0 / np.sqrt(2.0)
    for i in range(n // 2):
        lo[i, 2 * i] = r
        lo[i, 2 * i + 1] = r
        hi[i, 2 * i] = r
        hi[i, 2 * i + 1] = -r
    return lo, hi


def reference_haar_coeffs(x, depth):
    """Depth-D Haar coefficients of a 2D array via dense per-level matmuls.

    Subband order: LL at depth D, then (LH, HL, HH) per level d = D..1,
    each subband flattened row-major.  LH is high-pass along axis 1.
    """
    ll = np.asarray(x, dtype=complex)
    details = []
    for _ in range(depth):
        h, w = ll.shape
        lo_r, hi_r = _haar_pair(h)
        lo_c, hi_c = _haar_pair(w)
        lh = lo_r @ ll @ hi_c.T
        hl = hi_r @ ll @ lo_c.T
        hh = hi_r @ ll @ hi_c.T
        ll = lo_r @ ll @ lo_c.T
        details.append((lh, hl, hh))
    parts = [ll.ravel()]
    for d in range(depth, 0, -1):
        for block in details[d - 1]:
            parts.append(block.ravel())
    return np.concatenate(parts)


def dense_haar_matrix(shape, depth):
    """The (N, N) orthogonal analysis matrix Psi, built column by column."""
    h, w = shape
    n = h * w
    psi = np.zeros((n, n), dtype=complex)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        psi[:, j] = reference_haar_coeffs(e.reshape(h, w), depth)
    return psi.real


def cplx_inner(a, b):
    """<a, b> with conjugation on the first argument."""
    return np.vdot(np.asarray(a).ravel(), np.asarray(b).ravel())
