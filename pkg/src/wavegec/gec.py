"""Expectation-consistent solvers with per-subband precision tracking.

Two message-passing halves alternate: a measurement-fidelity step (a
precision-weighted least-squares solve, run matrix-free with conjugate
gradients) and a denoising step.  After each half, the extrinsic precision of
the other half is updated from the block-averaged Jacobian diagonal of the
step just taken; block traces are either analytic (when the denoiser provides
them) or estimated with one Monte-Carlo probe per subband.

Bookkeeping conventions (documented once, used everywhere):

* Divergences are per complex coefficient, so the identity map has
  divergence 1.  Estimated divergences are clamped to [1e-9, 1] before the
  precision update; both estimation functions are nonexpansive in exact
  arithmetic, so the clamp only guards Monte-Carlo noise.
* Precision updates gamma_new = eta - gamma_old are clipped per subband into
  [1e-8 * eta, 0.999 * eta].
* Damping blends the denoiser-to-fidelity message across iterations:
  r linearly, and the precision as the matching variance of that blend for
  correlated errors (SDs blend linearly), which keeps precisions positive
  and calibrated to the blended message.
* All randomness derives from one master seed through fixed stream codes
  (see subseed), so runs are exactly reproducible.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .denoisers import PrecisionVector
from .diagnostics import psnr, subband_support_masks, write_csv
from .forward_model import GAMMA_W_NOISELESS, apply_B, apply_BH
from .transforms import WaveletPyramid, dwt2_haar, idwt2_haar

# stream codes for the seed split tree
STREAM_INIT = 1
STREAM_PROBE_F1 = 2
STREAM_PROBE_F2 = 3
STREAM_DENOISER = 4
STREAM_CALIB = 5


class SolverError(RuntimeError):
    """Measurement-fidelity or denoising step failed."""


def subseed(master_seed, *path):
    """Deterministic child RNG for a (stream, ...) path under a master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, path)]))


@dataclass
class SolverConfig:
    depth: int = 4
    max_iters: int = 20
    cg_iters: int = 10
    damping_rho: float = 0.3
    init_mode: str = "bhy_plus_noise"     # or "bhy_plain"
    init_inflation: float = 10.0
    # lower clip bounds the message amplification gamma_old/gamma_new; looser
    # floors let CG truncation noise blow up on unmeasured subbands
    gamma_clip_lo: float = 1e-3
    gamma_clip_hi: float = 0.999
    conv_tol: float = 1e-5
    master_seed: int = 0
    calib_images: int = 8                 # calibration-set size for the precision init
    # reserved: adaptive precision auto-tuning from the wider literature is
    # intentionally not implemented; the flag exists so configs can declare it
    auto_tune: bool = False

    def __post_init__(self):
        if self.cg_iters < 1:
            raise ValueError("cg_iters must be >= 1")
        if not 0.0 < self.damping_rho <= 1.0:
            raise ValueError("damping_rho must lie in (0, 1]")
        if self.init_mode not in ("bhy_plus_noise", "bhy_plain"):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")
        if self.auto_tune:
            raise NotImplementedError("precision auto-tuning is reserved, not implemented")


@dataclass
class GecState:
    r1: WaveletPyramid
    gamma1: PrecisionVector
    r2: Optional[WaveletPyramid] = None
    gamma2: Optional[PrecisionVector] = None
    eta1: Optional[PrecisionVector] = None
    eta2: Optional[PrecisionVector] = None
    c1_hat: Optional[WaveletPyramid] = None
    c2_hat: Optional[WaveletPyramid] = None
    iteration: int = 0


@dataclass
class IterationDiagnostics:
    layout_names: list
    iters: list = field(default_factory=list)
    psnrs: list = field(default_factory=list)
    predicted_sd: list = field(default_factory=list)    # (L,) per row
    empirical_sd: list = field(default_factory=list)    # (L,) per row or None
    residuals: list = field(default_factory=list)

    def append(self, it, psnr_db, pred, emp, resid):
        self.iters.append(it)
        self.psnrs.append(psnr_db)
        self.predicted_sd.append(np.asarray(pred, dtype=float))
        self.empirical_sd.append(None if emp is None else np.asarray(emp, dtype=float))
        self.residuals.append(resid)

    def n_rows(self):
        return len(self.iters)

    def to_csv(self, path):
        names = self.layout_names
        header = (["iter", "psnr", "residual"]
                  + [f"pred_sd_{n}" for n in names]
                  + [f"emp_sd_{n}" for n in names])
        rows = []
        for i in range(self.n_rows()):
            emp = self.empirical_sd[i]
            rows.append([self.iters[i], float(self.psnrs[i]), float(self.residuals[i])]
                        + [float(v) for v in self.predicted_sd[i]]
                        + (["" for _ in names] if emp is None else [float(v) for v in emp]))
        write_csv(path, header, rows)


@dataclass
class DgecProblem:
    y: np.ndarray
    fm: object                  # ForwardModel
    gamma_w: float
    x0: Optional[np.ndarray] = None   # ground-truth image, for diagnostics only


def gdiag_from_traces(traces, layout):
    """Expand per-subband block traces tr(Q_ll) into the block-constant
    length-N vector [d_1 1, ..., d_L 1] with d_l = tr(Q_ll)/N_l."""
    traces = np.asarray(traces, dtype=float)
    if traces.shape != (layout.n_subbands,):
        raise ValueError(f"expected {layout.n_subbands} traces, got {traces.shape}")
    if not np.all(np.isfinite(traces)):
        raise ValueError("non-finite block traces")
    sizes = np.array([b.size for b in layout.subbands], dtype=float)
    return layout.expand(traces / sizes)


def make_probe(layout, ell, rng):
    """Subband-supported probe: circular complex, unit variance per
    coefficient (real and imaginary parts each variance 1/2), zero elsewhere."""
    band = layout.subbands[ell]
    q = np.zeros(layout.size, dtype=np.complex128)
    scale = 1.0 / math.sqrt(2.0)
    q[band.start:band.stop] = scale * (rng.standard_normal(band.size)
                                       + 1j * rng.standard_normal(band.size))
    return q


PROBE_STEP_SCALE = 1e-3


def probe_step(coeffs, gamma, ell, scale=PROBE_STEP_SCALE):
    """Probe step size: min of the subband noise SD and the subband's mean
    absolute value, shrunk by `scale` so the secant tracks the local
    derivative, and floored away from zero."""
    band = gamma.layout.subbands[ell]
    seg = coeffs[band.start:band.stop]
    sd = 1.0 / math.sqrt(gamma.gammas[ell])
    delta = min(sd, float(np.mean(np.abs(seg)))) or sd
    return max(delta * scale, 1e-12)


def mc_subband_trace(f, coeffs, gamma, ell, seed, n_probes=1):
    """Monte-Carlo estimate of the subband-ell Jacobian block trace of f.

    f maps flat coefficient vectors to flat coefficient vectors and is
    evaluated at coeffs and at coeffs + delta * probe; the estimate is
    Re(q^H [f(r + delta q) - f(r)]) / delta, averaged over n_probes
    independent probes.  Deterministic given seed.
    """
    rng = np.random.default_rng(seed)
    layout = gamma.layout
    base = f(coeffs)
    delta = probe_step(coeffs, gamma, ell)
    est = 0.0
    for _ in range(n_probes):
        q = make_probe(layout, ell, rng)
        shifted = f(coeffs + delta * q)
        est += float(np.real(np.vdot(q, shifted - base))) / delta
    return est / n_probes


def _clip_gamma(eta, gamma_old, lo, hi):
    gamma_new = eta - gamma_old
    return np.clip(gamma_new, lo * eta, hi * eta)


class CgFidelity:
    """Matrix-free measurement-fidelity prox: solves
    (gamma_w B^H B + Diag(gamma)) c = gamma_w B^H y + Diag(gamma) r
    by warm-started conjugate gradients, batched over stacked right-hand
    sides.  Divergence is left to Monte-Carlo probing."""

    def __init__(self, y, fm, gamma_w, cg_iters):
        self.fm = fm
        self.gamma_w = float(gamma_w)
        self.cg_iters = int(cg_iters)
        self.bhy = apply_BH(y, fm).coeffs

    def _normal_op(self, coeffs, gamma_flat):
        pyr = WaveletPyramid(self.fm.layout, coeffs)
        bhb = apply_BH(apply_B(pyr, self.fm), self.fm).coeffs
        return self.gamma_w * bhb + gamma_flat * coeffs

    def apply(self, coeffs, gamma, cg_iters=None):
        """coeffs: (..., N) stacked inputs r; returns the stacked solves."""
        gamma_flat = gamma.expand()
        rhs = self.gamma_w * self.bhy + gamma_flat * coeffs
        return self._solve(rhs, np.array(coeffs, copy=True), gamma_flat, cg_iters)

    def probe_responses(self, probes, gamma, cg_iters=None):
        """Exact Jacobian action on probe vectors: the fidelity prox is linear
        in r with Jacobian M^{-1} Diag(gamma), so each response is solved
        directly (zero warm start), avoiding the cancellation of differencing
        two full solves."""
        gamma_flat = gamma.expand()
        rhs = gamma_flat * probes
        return self._solve(rhs, np.zeros_like(rhs), gamma_flat, cg_iters)

    def _solve(self, rhs, x, gamma_flat, cg_iters=None):
        r = rhs - self._normal_op(x, gamma_flat)
        p = r.copy()
        rz = np.real(np.sum(np.conj(r) * r, axis=-1))
        floor = 1e-30 * max(float(np.max(rz)), 1e-300)
        iters = self.cg_iters if cg_iters is None else cg_iters
        for _ in range(iters):
            live = rz > floor
            if not np.any(live):
                break
            ap = self._normal_op(p, gamma_flat)
            pap = np.real(np.sum(np.conj(p) * ap, axis=-1))
            # breakdown guard: freeze columns with vanishing curvature
            safe = live & (pap > 0)
            alpha = np.where(safe, rz / np.where(pap > 0, pap, 1.0), 0.0)
            x = x + alpha[..., None] * p
            r = r - alpha[..., None] * ap
            rz_new = np.real(np.sum(np.conj(r) * r, axis=-1))
            beta = np.where(safe, rz_new / np.where(rz > 0, rz, 1.0), 0.0)
            p = r + beta[..., None] * p
            rz = rz_new
        return x

    def subband_divergence(self, coeffs, gamma):
        return None


def f1_cg(r1, gamma1, y, fm, gamma_w, cg_iters):
    """Standalone measurement-fidelity prox on a WaveletPyramid (see
    CgFidelity for the system being solved)."""
    fid = CgFidelity(y, fm, gamma_w, cg_iters)
    return WaveletPyramid(r1.layout, fid.apply(np.asarray(r1.coeffs, dtype=np.complex128),
                                               gamma1))


class DenseFidelity:
    """Dense reference fidelity prox with exact per-subband divergences;
    for small problems and cross-checks only."""

    def __init__(self, y, b_matrix, gamma_w, layout):
        self.b = np.asarray(b_matrix)
        self.gamma_w = float(gamma_w)
        self.layout = layout
        self.bhb = self.b.conj().T @ self.b
        self.bhy = self.b.conj().T @ np.asarray(y)

    def apply(self, coeffs, gamma):
        gamma_flat = gamma.expand()
        m = self.gamma_w * self.bhb + np.diag(gamma_flat)
        rhs = self.gamma_w * self.bhy + gamma_flat * coeffs
        return np.linalg.solve(m, rhs[..., None])[..., 0] if rhs.ndim > 1 \
            else np.linalg.solve(m, rhs)

    def subband_divergence(self, coeffs, gamma):
        gamma_flat = gamma.expand()
        m = self.gamma_w * self.bhb + np.diag(gamma_flat)
        jac = np.linalg.solve(m, np.diag(gamma_flat))
        d = np.empty(self.layout.n_subbands)
        for ell, band in enumerate(self.layout.subbands):
            d[ell] = float(np.real(np.trace(jac[band.start:band.stop,
                                                band.start:band.stop]))) / band.size
        return d


def _f1_divergences_batched(f1, coeffs, gamma, rng):
    """Per-subband divergence of f1 by one probe per subband.

    The fidelity prox is linear in r, so the probe difference quotient of the
    trace estimator reduces exactly to the Jacobian action on the probe; when
    f1 exposes probe_responses the responses are solved directly in one batch
    together with the base solve, otherwise the generic two-point evaluation
    is used."""
    layout = gamma.layout
    n_sub = layout.n_subbands
    probes = [make_probe(layout, ell, rng) for ell in range(n_sub)]
    if hasattr(f1, "probe_responses"):
        base = f1.apply(coeffs, gamma)
        responses = f1.probe_responses(np.stack(probes), gamma)
        d = np.array([
            float(np.real(np.vdot(probes[ell], responses[ell]))) / layout.subbands[ell].size
            for ell in range(n_sub)])
        return base, d
    stack = np.empty((n_sub + 1, layout.size), dtype=np.complex128)
    stack[0] = coeffs
    deltas = np.empty(n_sub)
    for ell in range(n_sub):
        deltas[ell] = probe_step(coeffs, gamma, ell)
        stack[ell + 1] = coeffs + deltas[ell] * probes[ell]
    out = f1.apply(stack, gamma)
    base = out[0]
    d = np.array([
        float(np.real(np.vdot(probes[ell], out[ell + 1] - base))) / deltas[ell]
        / layout.subbands[ell].size for ell in range(n_sub)])
    return base, d


def _f2_divergences(denoiser, coeffs, gamma, rng):
    layout = gamma.layout
    base = denoiser.apply(coeffs, gamma)
    d = denoiser.subband_divergence(coeffs, gamma)
    if d is not None:
        return base, np.asarray(d, dtype=float)
    d = np.empty(layout.n_subbands)
    for ell, band in enumerate(layout.subbands):
        q = make_probe(layout, ell, rng)
        delta = probe_step(coeffs, gamma, ell)
        shifted = denoiser.apply(coeffs + delta * q, gamma)
        d[ell] = float(np.real(np.vdot(q, shifted - base))) / delta / band.size
    return base, d


def dgec_iterate(state, f1, denoiser, config):
    """One full iteration: measurement-fidelity half then denoising half.

    Damping (config.damping_rho < 1) blends the new (r1, gamma1) message with
    the incoming one.  Returns a new state; the input state is not modified.
    """
    layout = state.r1.layout
    it = state.iteration
    r1 = state.r1.coeffs
    gamma1 = state.gamma1

    # measurement fidelity
    rng1 = subseed(config.master_seed, STREAM_PROBE_F1, it)
    try:
        d1 = f1.subband_divergence(r1, gamma1)
        if d1 is None:
            c1_hat, d1 = _f1_divergences_batched(f1, r1, gamma1, rng1)
        else:
            c1_hat = f1.apply(r1, gamma1)
            d1 = np.asarray(d1, dtype=float)
    except Exception as exc:
        raise SolverError(f"measurement-fidelity step failed at iteration {it}: {exc}") from exc
    d1 = np.clip(d1, 1e-9, 1.0)
    eta1 = gamma1.gammas / d1
    gamma2 = _clip_gamma(eta1, gamma1.gammas, config.gamma_clip_lo, config.gamma_clip_hi)
    # extrinsic mean in the stable form c + (gamma/gamma_new)(c - r), exact
    # even when eta == gamma makes the textbook ratio 0/0
    g1x = gamma1.expand()
    g2x = layout.expand(gamma2)
    r2 = c1_hat + (g1x / g2x) * (c1_hat - r1)
    gamma2_pv = PrecisionVector(layout, gamma2)

    # denoising
    rng_d = subseed(config.master_seed, STREAM_DENOISER, it)
    rng2 = subseed(config.master_seed, STREAM_PROBE_F2, it)
    try:
        denoiser.begin_iteration(gamma2_pv, rng_d)
        c2_hat, d2 = _f2_divergences(denoiser, r2, gamma2_pv, rng2)
    except Exception as exc:
        raise SolverError(f"denoising step failed at iteration {it}: {exc}") from exc
    d2 = np.clip(d2, 1e-9, 1.0)
    eta2 = gamma2 / d2
    gamma1_new = _clip_gamma(eta2, gamma2, config.gamma_clip_lo, config.gamma_clip_hi)
    g1nx = layout.expand(gamma1_new)
    r1_new = c2_hat + (g2x / g1nx) * (c2_hat - r2)

    # damping of the denoiser-to-fidelity message: r blends linearly and the
    # claimed precision follows the variance of that blend, which keeps
    # gamma1 calibrated to r1.  On the first iteration the incoming message
    # is the init, whose injected noise is independent of the new message
    # (variances add); later messages share a trajectory and their errors are
    # treated as correlated (SDs add).
    rho = config.damping_rho
    if rho < 1.0:
        r1_new = rho * r1_new + (1.0 - rho) * r1
        if it == 0:
            var = rho ** 2 / gamma1_new + (1.0 - rho) ** 2 / gamma1.gammas
            gamma1_new = 1.0 / var
        else:
            sd = rho / np.sqrt(gamma1_new) + (1.0 - rho) / np.sqrt(gamma1.gammas)
            gamma1_new = 1.0 / sd ** 2

    return GecState(
        r1=WaveletPyramid(layout, r1_new),
        gamma1=PrecisionVector(layout, gamma1_new),
        r2=WaveletPyramid(layout, r2),
        gamma2=gamma2_pv,
        eta1=PrecisionVector(layout, eta1),
        eta2=PrecisionVector(layout, eta2),
        c1_hat=WaveletPyramid(layout, c1_hat),
        c2_hat=WaveletPyramid(layout, c2_hat),
        iteration=it + 1,
    )


def damp(new, old, rho):
    """Blend two states: r vectors linearly, precisions via linear SD mixing
    (the variance a linear blend has when the two errors are correlated),
    which keeps every blended precision positive."""
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")

    def mix_r(a, b):
        if a is None or b is None or rho == 1.0:
            return a
        return WaveletPyramid(a.layout, rho * a.coeffs + (1.0 - rho) * b.coeffs)

    def mix_g(a, b):
        if a is None or b is None or rho == 1.0:
            return a
        sd = rho / np.sqrt(a.gammas) + (1.0 - rho) / np.sqrt(b.gammas)
        return PrecisionVector(a.layout, 1.0 / sd ** 2)

    return GecState(r1=mix_r(new.r1, old.r1), gamma1=mix_g(new.gamma1, old.gamma1),
                    r2=mix_r(new.r2, old.r2), gamma2=mix_g(new.gamma2, old.gamma2),
                    eta1=new.eta1, eta2=new.eta2, c1_hat=new.c1_hat,
                    c2_hat=new.c2_hat, iteration=new.iteration)


def calibration_subband_variance(fm, gamma_w, images, master_seed=0):
    """Per-subband mean-square of (B^H y - c0) over a calibration set, with
    fresh measurement noise per image at precision gamma_w."""
    layout = fm.layout
    acc = np.zeros(layout.n_subbands)
    if len(images) == 0:
        raise SolverError("empty calibration set")
    for i, img in enumerate(images):
        y = apply_B(dwt2_haar(img, layout.depth, layout), fm)
        if math.isfinite(gamma_w) and gamma_w < GAMMA_W_NOISELESS:
            rng = subseed(master_seed, STREAM_CALIB, i)
            sigma = math.sqrt(1.0 / gamma_w / 2.0)
            y = y + sigma * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
        err = apply_BH(y, fm).coeffs - dwt2_haar(img, layout.depth, layout).coeffs
        for ell, band in enumerate(layout.subbands):
            acc[ell] += float(np.mean(np.abs(err[band.start:band.stop]) ** 2))
    return acc / len(images)


def init_state(y, fm, config, calib_var=None):
    """Initial (r1, gamma1): r1 = B^H y, optionally plus per-subband white
    noise at init_inflation times the calibration variance; gamma1 set to the
    precision of the total initial error."""
    layout = fm.layout
    r1 = apply_BH(y, fm).coeffs
    if calib_var is None:
        raise SolverError(f"init mode {config.init_mode!r} needs calibration statistics")
    calib_var = np.asarray(calib_var, dtype=float)
    if calib_var.shape != (layout.n_subbands,):
        raise SolverError(f"expected {layout.n_subbands} calibration variances")
    calib_var = np.maximum(calib_var, 1e-30)
    if config.init_mode == "bhy_plus_noise":
        rng = subseed(config.master_seed, STREAM_INIT)
        sd = np.sqrt(layout.expand(config.init_inflation * calib_var) / 2.0)
        r1 = r1 + sd * (rng.standard_normal(layout.size)
                        + 1j * rng.standard_normal(layout.size))
        gamma1 = 1.0 / ((1.0 + config.init_inflation) * calib_var)
    else:
        gamma1 = 1.0 / calib_var
    return GecState(r1=WaveletPyramid(layout, r1),
                    gamma1=PrecisionVector(layout, gamma1))


def run_dgec(problem, config, denoiser, calib_images=None, calib_var=None):
    """Full recovery: init, iterate to convergence, zero the off-support
    region, and record one diagnostics row per iteration."""
    fm = problem.fm
    layout = fm.layout
    if calib_var is None:
        if calib_images is None:
            raise SolverError("run_dgec needs calib_images or calib_var")
        calib_var = calibration_subband_variance(fm, problem.gamma_w, calib_images,
                                                 master_seed=config.master_seed)
    state = init_state(problem.y, fm, config, calib_var=calib_var)
    f1 = CgFidelity(problem.y, fm, problem.gamma_w, config.cg_iters)

    c0 = None
    support = fm.coils.support
    masks = None
    if problem.x0 is not None:
        c0 = dwt2_haar(problem.x0, layout.depth, layout).coeffs
        masks = subband_support_masks(layout, support)

    diag = IterationDiagnostics(layout_names=[b.name for b in layout.subbands])
    x_prev = None
    x_hat = None
    for _ in range(config.max_iters):
        state = dgec_iterate(state, f1, denoiser, config)
        x_hat = idwt2_haar(state.c2_hat)
        x_hat = np.where(support, x_hat, 0.0)
        resid = (np.linalg.norm(x_hat - x_prev) / max(np.linalg.norm(x_hat), 1e-300)
                 if x_prev is not None else math.inf)
        pred_sd = state.gamma2.sds()
        emp_sd = None
        psnr_db = math.nan
        if c0 is not None:
            err = state.r2.coeffs - c0
            emp_sd = np.array([
                math.sqrt(float(np.mean(np.abs(err[b.start:b.stop][masks[ell]]) ** 2)))
                for ell, b in enumerate(layout.subbands)])
            psnr_db = psnr(x_hat, np.where(support, problem.x0, 0.0))
        diag.append(state.iteration, psnr_db, pred_sd, emp_sd, resid)
        if x_prev is not None and resid < config.conv_tol:
            break
        x_prev = x_hat
    return x_hat, diag


# scalar-precision reference (the L = 1 special case, separate code path)

@dataclass
class EcState:
    r1: np.ndarray
    gamma1: float
    r2: Optional[np.ndarray] = None
    gamma2: Optional[float] = None
    eta1: Optional[float] = None
    eta2: Optional[float] = None
    x1: Optional[np.ndarray] = None
    x2: Optional[np.ndarray] = None
    iteration: int = 0


def ec_iterate(state, f1, f2, clip_lo=1e-8, clip_hi=0.999):
    """One scalar-precision iteration.  f1 and f2 map (r, gamma) to
    (estimate, divergence) with the divergence normalized per coefficient."""
    r1, gamma1 = state.r1, state.gamma1
    x1, d1 = f1(r1, gamma1)
    d1 = min(max(float(d1), 1e-9), 1.0)
    eta1 = gamma1 / d1
    gamma2 = min(max(eta1 - gamma1, clip_lo * eta1), clip_hi * eta1)
    r2 = x1 + (gamma1 / gamma2) * (x1 - r1)
    x2, d2 = f2(r2, gamma2)
    d2 = min(max(float(d2), 1e-9), 1.0)
    eta2 = gamma2 / d2
    gamma1_new = min(max(eta2 - gamma2, clip_lo * eta2), clip_hi * eta2)
    r1_new = x2 + (gamma2 / gamma1_new) * (x2 - r2)
    return EcState(r1=r1_new, gamma1=gamma1_new, r2=r2, gamma2=gamma2,
                   eta1=eta1, eta2=eta2, x1=x1, x2=x2,
                   iteration=state.iteration + 1)
