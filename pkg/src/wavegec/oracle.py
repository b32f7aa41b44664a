"""Dense numerical verification of the scalar-precision error analysis: the
one-step error recursion e2 = V D V^H e1 + u, the trace-zero property of D,
fourth-moment identities of Haar-random orthogonal matrices, and the
closed-form conditional variance of e2.

Everything here is dense and real-orthogonal on purpose: it shares no code
with the operator-based solver paths it see checks, and the moment identities
are only claimed for the real orthogonal group.
"""

import math
from dataclasses import dataclass

import numpy as np


class OracleError(RuntimeError):
    pass


def _haar_orthogonal_batch(n, count, rng):
    """Haar-distributed orthogonal matrices via QR with sign-corrected R."""
    g = rng.standard_normal((count, n, n))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.einsum("bii->bi", r))
    signs[signs == 0] = 1.0
    return q * signs[:, None, :]


def random_orthogonal(n, seed):
    """One Haar-distributed orthogonal matrix."""
    if n < 2:
        raise OracleError("need n >= 2")
    rng = np.random.default_rng(seed)
    return _haar_orthogonal_batch(n, 1, rng)[0]


@dataclass
class MomentReport:
    n: int
    trials: int
    empirical: np.ndarray      # the four cases, in order
    theoretical: np.ndarray
    rel_dev: np.ndarray


def fourth_moment_theory(n):
    """E[v_nj^2 v_mk^2] for the four index cases of a Haar orthogonal matrix:
    (n=m, j=k), (n=m, j!=k), (n!=m, j=k), (n!=m, j!=k)."""
    return np.array([
        3.0 / (n * (n + 2)),
        1.0 / (n * (n + 2)),
        1.0 / (n * (n + 2)),
        (n + 1.0) / (n * (n + 2) * (n - 1)),
    ])


def weingarten_moment_check(n, trials, seed, batch=4096):
    """Empirical fourth moments of Haar orthogonal entries vs closed forms.

    Averages run over every index pair of every sampled matrix; the row and
    column sums of the squared entries are exactly 1, so all four case
    averages reduce to functions of F = sum(v^4), computed per matrix.
    """
    rng = np.random.default_rng(seed)
    f_sum = 0.0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        v = _haar_orthogonal_batch(n, b, rng)
        a = v * v
        f_sum += float(np.sum(a * a))
        done += b
    f_mean = f_sum / trials
    case1 = f_mean / (n * n)
    case2 = (n - f_mean) / (n * n * (n - 1))
    case3 = case2
    case4 = (n * n - 2 * n + f_mean) / (n * n * (n - 1) ** 2)
    emp = np.array([case1, case2, case3, case4])
    theo = fourth_moment_theory(n)
    return MomentReport(n=n, trials=trials, empirical=emp, theoretical=theo,
                        rel_dev=np.abs(emp - theo) / theo)


@dataclass
class EcErrorModel:
    v: np.ndarray          # eigenvectors of gamma_w A^T A
    lam: np.ndarray        # eigenvalues (nonnegative)
    alpha: float
    d: np.ndarray          # diagonal of D
    sigma: np.ndarray      # diagonal of Sigma = I - D
    gamma1: float
    gamma_w: float


def build_ec_error_model(a, gamma1, gamma_w):
    """Eigendecompose gamma_w A^T A and assemble the one-step error model;
    asserts tr(D) = 0 and Sigma = I - D."""
    a = np.asarray(a, dtype=float)
    n = a.shape[1]
    c = gamma_w * (a.T @ a)
    lam, v = np.linalg.eigh(c)
    lam = np.clip(lam, 0.0, None)
    alpha = float(np.mean(lam / (lam + gamma1)))
    d = 1.0 - (1.0 / alpha) * lam / (lam + gamma1)
    sigma = (1.0 / alpha) * lam / (lam + gamma1)
    model = EcErrorModel(v=v, lam=lam, alpha=alpha, d=d, sigma=sigma,
                         gamma1=float(gamma1), gamma_w=float(gamma_w))
    if abs(float(np.sum(d))) > 1e-10 * n:
        raise OracleError(f"tr(D) = {np.sum(d):.3e}, expected 0")
    if np.max(np.abs(sigma - (1.0 - d))) > 1e-12:
        raise OracleError("Sigma != I - D")
    return model


def ec_recursion_equivalence(a, gamma1, gamma_w, e1, w, seed=0):
    """Run one dense measurement-fidelity half-step directly and compare its
    error against the V D V^T e1 + u form; returns the max abs deviation."""
    a = np.asarray(a, dtype=float)
    p, n = a.shape
    e1 = np.asarray(e1, dtype=float)
    w = np.asarray(w, dtype=float)
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(n)
    r1 = x0 + e1
    y = a @ x0 + w

    model = build_ec_error_model(a, gamma1, gamma_w)
    c = gamma_w * (a.T @ a)
    m = c + gamma1 * np.eye(n)

    # direct path: lines 4-7 with the exact linear-Gaussian estimator
    x1 = np.linalg.solve(m, gamma_w * (a.T @ y) + gamma1 * r1)
    alpha = model.alpha
    eta1 = gamma1 / (1.0 - alpha)
    gamma2 = eta1 - gamma1
    r2 = (eta1 * x1 - gamma1 * r1) / gamma2
    e2_direct = r2 - x0

    # recursion path
    u = (gamma_w / alpha) * np.linalg.solve(m, a.T @ w)
    e2_model = model.v @ (model.d * (model.v.T @ e1)) + u
    return float(np.max(np.abs(e2_direct - e2_model)))


def epsilon2_from_spectrum(lam, gamma1, e1_var):
    """Closed-form conditional variance of e2 given per-coordinate e1
    variance e1_var, in both the simplified and unsimplified forms."""
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    alpha = float(np.mean(lam / (lam + gamma1)))
    gamma2 = gamma1 * alpha / (1.0 - alpha)
    simplified = (e1_var - 1.0 / gamma1) * np.mean(
        ((1.0 - lam / gamma2) / (1.0 + lam / gamma1)) ** 2) + 1.0 / gamma2
    d = 1.0 - (1.0 / alpha) * lam / (lam + gamma1)
    sigma = 1.0 - d
    unsimplified = e1_var * np.mean(d ** 2) + np.mean(sigma ** 2 / lam)
    return float(simplified), float(unsimplified), float(gamma2)


@dataclass
class CovarianceReport:
    n: int
    trials: int
    epsilon2: float
    epsilon2_unsimplified: float
    diag_mean: float           # mean per-coordinate empirical variance
    diag_rel_dev: float        # |diag_mean/epsilon2 - 1|
    mean_zscore: float         # global mean of e2 in standard errors
    rms_offdiag: float         # sampling-noise-corrected RMS of off-diagonal cov


def epsilon2_covariance_check(lam, gamma1, gamma_w, e1_variance, n, trials,
                              seed, batch=2048):
    """Monte-Carlo check of the conditional law of e2 = V D V^T e1 + u over
    Haar-random V and Gaussian measurement noise, for one fixed e1.

    gamma_w only rescales the spectrum already given in lam (lam is the
    spectrum of gamma_w A^T A); it is accepted to keep the parameterization
    explicit.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (n,):
        raise OracleError(f"need {n} eigenvalues, got {lam.shape}")
    if np.any(lam <= 0):
        raise OracleError("spectrum must be positive for this check")
    rng = np.random.default_rng(seed)
    e1 = rng.standard_normal(n) * math.sqrt(e1_variance)
    alpha = float(np.mean(lam / (lam + gamma1)))
    d = 1.0 - (1.0 / alpha) * lam / (lam + gamma1)
    u_scale = (1.0 / alpha) * np.sqrt(lam) / (lam + gamma1)

    s1 = np.zeros(n)
    s2 = np.zeros((n, n))
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        v = _haar_orthogonal_batch(n, b, rng)
        z = rng.standard_normal((b, n))
        inner = d * np.einsum("bij,j->bi", np.transpose(v, (0, 2, 1)), e1) \
            + u_scale * z
        e2 = np.einsum("bij,bj->bi", v, inner)
        s1 += e2.sum(axis=0)
        s2 += e2.T @ e2
        done += b
    mean = s1 / trials
    cov = s2 / trials - np.outer(mean, mean)
    eps1 = float(np.mean(e1 ** 2))
    eps2, eps2_raw, _ = epsilon2_from_spectrum(lam, gamma1, eps1)

    diag = np.diag(cov)
    diag_mean = float(np.mean(diag))
    mean_z = float(np.mean(mean) / math.sqrt(diag_mean / (n * trials)))
    off = cov[~np.eye(n, dtype=bool)]
    # subtract the sampling variance of each covariance estimate
    noise_floor = float(np.mean(np.outer(diag, diag)[~np.eye(n, dtype=bool)])) / trials
    rms_off = math.sqrt(max(float(np.mean(off ** 2)) - noise_floor, 0.0))
    return CovarianceReport(n=n, trials=trials, epsilon2=eps2,
                            epsilon2_unsimplified=eps2_raw,
                            diag_mean=diag_mean,
                            diag_rel_dev=abs(diag_mean / eps2 - 1.0),
                            mean_zscore=mean_z, rms_offdiag=rms_off)
