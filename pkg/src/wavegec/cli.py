"""Command-line interface: mask generation, measurement simulation, recovery
runs, verification suites, and denoiser-protocol conformance tests.

Exit codes: 0 success; 2 config error; 3 missing file; 4 solver failure;
5 protocol error; 6 bad arguments; 1 verification-suite failure.
"""

import argparse
import math
import os
import sys

import numpy as np

from . import baselines as bl
from . import denoisers as dn
from . import fileio
from . import forward_model as fwd
from . import gec
from . import oracle as orc
from . import protocol as proto
from . import transforms as tr
from .config import ConfigError, load_config
from .diagnostics import psnr

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_SOLVER = 4
EXIT_PROTOCOL = 5
EXIT_USAGE = 6

# stream codes appended to the master seed (see gec.subseed)
SEED_MASK = 101
SEED_PHANTOM = 102
SEED_NOISE = 103
SEED_COILS = 104
SEED_CALIB_IMAGES = 105


def _seed_int(rng):
    return int(rng.integers(0, 2 ** 62))


def build_problem(cfg, seed):
    shape = (cfg.height, cfg.width)
    mask_seed = _seed_int(gec.subseed(seed, SEED_MASK))
    if cfg.mask == "point2d":
        mask = fwd.make_point_mask(shape, cfg.acceleration, cfg.density_exponent,
                                   cfg.calib_size, seed=mask_seed)
    else:
        mask = fwd.make_line_mask(shape, cfg.acceleration, cfg.density_exponent,
                                  cfg.calib_size, seed=mask_seed)
    coils = fwd.generate_coil_maps(shape, cfg.coils,
                                   seed=_seed_int(gec.subseed(seed, SEED_COILS)),
                                   support=cfg.coil_support)
    fm = fwd.ForwardModel(mask=mask, coils=coils,
                          layout=tr.make_layout(shape, cfg.depth))
    x0 = fwd.generate_phantom(shape, cfg.phantom,
                              seed=_seed_int(gec.subseed(seed, SEED_PHANTOM)),
                              sparsity=cfg.phantom_sparsity)
    ms = fwd.simulate_measurements(x0, fm, cfg.snr_db,
                                   seed=_seed_int(gec.subseed(seed, SEED_NOISE)))
    return fm, x0, ms


def calib_set(cfg, seed, shape):
    rng = gec.subseed(seed, SEED_CALIB_IMAGES)
    return [fwd.generate_phantom(shape, cfg.phantom, seed=_seed_int(rng),
                                 sparsity=cfg.phantom_sparsity)
            for _ in range(cfg.calib_images)]


def make_denoiser(cfg, endpoint_spec=None):
    if cfg.denoiser == "identity":
        return dn.IdentityDenoiser()
    if cfg.denoiser == "external":
        spec = endpoint_spec or cfg.endpoint
        return dn.ExternalDenoiser(proto.DenoiserEndpoint(spec),
                                   k_channels=cfg.k_channels)
    return dn.SoftThresholdDenoiser(lam=cfg.lam, policy=cfg.threshold_policy,
                                    ll_weight=cfg.ll_weight)


class _OperatorA:
    """Adapter presenting a ForwardModel as a flat-vector operator for the
    pixel-domain baselines."""

    def __init__(self, fm):
        self.fm = fm
        h, w = fm.shape
        self.shape = (fm.n_measurements, h * w)
        # per-coil row energy M/N per unit coil weight
        m = fm.mask.n_sampled
        sum_s2 = float(np.sum(np.abs(fm.coils.maps) ** 2))
        self.frobenius = math.sqrt(m / (h * w) * sum_s2)

    def mv(self, x):
        return fwd.apply_A(x.reshape(self.fm.shape), self.fm)

    def rmv(self, y):
        return fwd.apply_AH(y, self.fm).ravel()


class _WaveletImageDenoiser:
    """Pixel-domain wrapper of the subband soft threshold for the baselines:
    white effective noise of variance tau on pixels is white with the same
    variance in each subband of the orthogonal transform."""

    def __init__(self, layout, policy="sure", lam=1.0, ll_weight=0.0):
        self.layout = layout
        self.policy = policy
        self.lam = lam
        self.ll_weight = ll_weight

    def __call__(self, x_flat, tau):
        layout = self.layout
        tau = max(float(tau), 1e-300)
        gamma = dn.PrecisionVector(layout, np.full(layout.n_subbands, 1.0 / tau))
        pyr = tr.dwt2_haar(x_flat.reshape(layout.shape), layout.depth, layout)
        if self.policy == "sure":
            lam = dn.sure_lambda(pyr, gamma)
        else:
            lam = dn.lambda_from_global(self.lam, gamma)
            lam[0] *= self.ll_weight
        res = dn.subband_soft_threshold(pyr, gamma, lam)
        sizes = np.array([b.size for b in layout.subbands], dtype=float)
        div = float(np.sum(res.subband_divergence * sizes) / layout.size)
        return tr.idwt2_haar(res.estimate).ravel(), div


def _amp_like_operator_iterate(state, y, op, denoiser, onsager=True):
    p, n = op.shape
    beta = state.beta
    v = beta * (y - op.mv(state.x))
    if onsager and state.iteration > 0:
        v = v + (n / p) * state.v * state.div_prev
    tau = float(np.real(np.vdot(v, v))) / p
    r = state.x + beta * op.rmv(v)
    x, div = denoiser(r, tau)
    return bl.AmpState(v=v, x=x, tau=tau, beta=beta, div_prev=float(div),
                       iteration=state.iteration + 1)


def run_recovery(cfg, seed, endpoint_spec=None):
    """Self-contained recovery: phantom, mask, measurements, and solve are all
    derived from (config, seed).  Returns (x_hat, x0, diagnostics rows)."""
    fm, x0, ms = build_problem(cfg, seed)
    layout = fm.layout
    support = fm.coils.support
    rows = []

    if cfg.algorithm in ("dgec", "ec"):
        depth = cfg.depth if cfg.algorithm == "dgec" else 0
        if cfg.algorithm == "ec":
            layout = tr.make_layout(fm.shape, 0)
            fm = fwd.ForwardModel(mask=fm.mask, coils=fm.coils, layout=layout)
        solver_cfg = gec.SolverConfig(
            depth=depth, max_iters=cfg.max_iters, cg_iters=cfg.cg_iters,
            damping_rho=cfg.damping_rho, init_mode=cfg.init_mode,
            init_inflation=cfg.init_inflation, gamma_clip_lo=cfg.gamma_clip_lo,
            gamma_clip_hi=cfg.gamma_clip_hi, conv_tol=cfg.conv_tol,
            master_seed=seed)
        problem = gec.DgecProblem(y=ms.y, fm=fm, gamma_w=ms.gamma_w, x0=x0)
        denoiser = make_denoiser(cfg, endpoint_spec)
        x_hat, diag = gec.run_dgec(problem, solver_cfg, denoiser,
                                   calib_images=calib_set(cfg, seed, fm.shape))
        return x_hat, x0, diag

    # pixel-domain baselines share the diagnostics row shape
    op = _OperatorA(fm)
    den = _WaveletImageDenoiser(tr.make_layout(fm.shape, cfg.depth),
                                policy=cfg.threshold_policy, lam=cfg.lam,
                                ll_weight=cfg.ll_weight)
    diag = gec.IterationDiagnostics(layout_names=[])
    x_prev = None
    if cfg.algorithm == "amp":
        beta = cfg.amp_beta_scale * math.sqrt(op.shape[1]) / op.frobenius
        st = bl.AmpState(v=np.zeros(op.shape[0], dtype=complex),
                         x=np.zeros(op.shape[1], dtype=complex), beta=beta)
        for _ in range(cfg.max_iters):
            st = _amp_like_operator_iterate(st, ms.y, op, den)
            x_hat = np.where(support, st.x.reshape(fm.shape), 0.0)
            resid = (np.linalg.norm(x_hat - x_prev) / max(np.linalg.norm(x_hat), 1e-300)
                     if x_prev is not None else math.inf)
            diag.append(st.iteration, psnr(x_hat, np.where(support, x0, 0.0)), [], None, resid)
            x_prev = x_hat
    elif cfg.algorithm == "pnp_pgd":
        # unit coil normalization keeps ||A||_2 <= 1, so 0.9 is a safe step
        mu = cfg.pgd_mu if cfg.pgd_mu > 0 else 0.9
        st = bl.PgdState(x=np.zeros(op.shape[1], dtype=complex))
        tau_like = 1.0 / ms.gamma_w * op.shape[0] / op.shape[1]
        for _ in range(cfg.max_iters):
            grad = op.rmv(op.mv(st.x) - ms.y)
            x1 = st.x - mu * grad
            x2, _ = den(x1, max(mu * tau_like, 1e-12))
            st = bl.PgdState(x=x2, iteration=st.iteration + 1)
            x_hat = np.where(support, st.x.reshape(fm.shape), 0.0)
            resid = (np.linalg.norm(x_hat - x_prev) / max(np.linalg.norm(x_hat), 1e-300)
                     if x_prev is not None else math.inf)
            diag.append(st.iteration, psnr(x_hat, np.where(support, x0, 0.0)), [], None, resid)
            x_prev = x_hat
    elif cfg.algorithm == "pr_admm":
        gamma = cfg.admm_gamma
        fid = gec.CgFidelity(ms.y, fm, ms.gamma_w, cfg.cg_iters)
        gamma_pv = dn.PrecisionVector(fm.layout, np.full(fm.layout.n_subbands, gamma))

        def prox1(r_img):
            pyr = tr.dwt2_haar(r_img.reshape(fm.shape), fm.layout.depth, fm.layout)
            out = fid.apply(pyr.coeffs, gamma_pv)
            return tr.idwt2_haar(tr.WaveletPyramid(fm.layout, out)).ravel()

        def prox2(r_img):
            out, _ = den(r_img, 1.0 / gamma)
            return out

        n = fm.shape[0] * fm.shape[1]
        st = bl.PrAdmmState(x1=np.zeros(n, dtype=complex),
                            x2=op.rmv(ms.y), u=np.zeros(n, dtype=complex))
        for _ in range(cfg.max_iters):
            st = bl.pr_admm_iterate(st, prox1, prox2)
            x_hat = np.where(support, st.x2.reshape(fm.shape), 0.0)
            resid = (np.linalg.norm(x_hat - x_prev) / max(np.linalg.norm(x_hat), 1e-300)
                     if x_prev is not None else math.inf)
            diag.append(st.iteration, psnr(x_hat, np.where(support, x0, 0.0)), [], None, resid)
            x_prev = x_hat
    else:
        raise ConfigError(f"unhandled algorithm {cfg.algorithm!r}")
    return x_hat, x0, diag


def cmd_mask_gen(args):
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    shape = (cfg.height, cfg.width)
    mask_seed = _seed_int(gec.subseed(seed, SEED_MASK))
    if cfg.mask == "point2d":
        mask = fwd.make_point_mask(shape, cfg.acceleration, cfg.density_exponent,
                                   cfg.calib_size, seed=mask_seed)
    else:
        mask = fwd.make_line_mask(shape, cfg.acceleration, cfg.density_exponent,
                                  cfg.calib_size, seed=mask_seed)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "mask.msk")
    fileio.write_mask(path, mask)
    print(f"wrote {path}: {mask.kind} {shape[0]}x{shape[1]} "
          f"{mask.n_sampled}/{shape[0] * shape[1]} sampled (R = {mask.acceleration})")
    return EXIT_OK


def cmd_simulate(args):
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    fm, x0, ms = build_problem(cfg, seed)
    os.makedirs(args.out, exist_ok=True)
    fileio.write_image(os.path.join(args.out, "ground_truth.cim"), x0)
    c = fm.coils.n_coils
    fileio.write_image(os.path.join(args.out, "measurements.cim"),
                       ms.y.reshape(c, -1))
    fileio.write_mask(os.path.join(args.out, "mask.msk"), fm.mask)
    with open(os.path.join(args.out, "meta.txt"), "w") as f:
        f.write(f"gamma_w = {ms.gamma_w!r}\nsnr_db = {ms.snr_db!r}\nseed = {seed}\n"
                f"coils = {c}\n")
    print(f"wrote ground_truth.cim, measurements.cim, mask.msk, meta.txt to {args.out}")
    return EXIT_OK


def cmd_recover(args):
    cfg = load_config(args.config)
    base_seed = cfg.seed if args.seed is None else args.seed
    os.makedirs(args.out, exist_ok=True)
    seeds = [base_seed + k for k in range(args.trials)]
    for k, seed in enumerate(seeds):
        x_hat, x0, diag = run_recovery(cfg, seed, endpoint_spec=args.endpoint or None)
        tag = "" if args.trials == 1 else f"_{k}"
        fileio.write_image(os.path.join(args.out, f"recovered{tag}.cim"), x_hat)
        diag.to_csv(os.path.join(args.out, f"diagnostics{tag}.csv"))
        final = diag.psnrs[-1] if diag.psnrs else float("nan")
        print(f"seed {seed}: {diag.n_rows()} iterations, final PSNR {final:.2f} dB")
    return EXIT_OK


def _verify_transforms(report):
    rng = np.random.default_rng(0)
    worst_dft = worst_dwt = 0.0
    for _ in range(100):
        h = int(rng.choice([8, 16, 32]))
        x = rng.standard_normal((h, h)) + 1j * rng.standard_normal((h, h))
        worst_dft = max(worst_dft,
                        np.linalg.norm(tr.idft2(tr.dft2(x)) - x) / np.linalg.norm(x),
                        abs(np.linalg.norm(tr.dft2(x)) / np.linalg.norm(x) - 1.0))
        pyr = tr.dwt2_haar(x, 2)
        worst_dwt = max(worst_dwt,
                        np.linalg.norm(tr.idwt2_haar(pyr) - x) / np.linalg.norm(x),
                        abs(np.linalg.norm(pyr.coeffs) / np.linalg.norm(x) - 1.0))
    report("transforms.round_trip_dft", worst_dft <= 1e-12, f"worst {worst_dft:.2e}")
    report("transforms.round_trip_dwt", worst_dwt <= 1e-12, f"worst {worst_dwt:.2e}")

    # dense equivalence at 8x8
    from .transforms import WaveletPyramid
    x = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    f1d = np.exp(-2j * np.pi * np.outer(np.arange(8), np.arange(8)) / 8) / np.sqrt(8)
    dense = np.kron(f1d, f1d) @ x.ravel()
    dev = float(np.max(np.abs(tr.dft2(x).ravel() - dense)))
    report("transforms.dense_dft", dev <= 1e-10, f"max dev {dev:.2e}")


def _verify_appendix(report):
    rng = np.random.default_rng(1)
    worst = 0.0
    for k in range(20):
        n = int(rng.integers(8, 65))
        a = rng.standard_normal((n, n))
        e1 = rng.standard_normal(n)
        w = rng.standard_normal(n) * 0.3
        worst = max(worst, orc.ec_recursion_equivalence(
            a, float(rng.uniform(0.3, 2.0)), float(rng.uniform(0.5, 3.0)), e1, w, seed=k))
    report("appendix.error_recursion", worst <= 1e-10, f"max dev {worst:.2e}")

    rep = orc.weingarten_moment_check(8, 100_000, seed=2)
    report("appendix.fourth_moments", bool(np.all(rep.rel_dev <= 0.05)),
           f"max rel dev {np.max(rep.rel_dev):.3f}")

    lam = np.concatenate([np.full(64, 0.2), np.full(64, 5.0)])
    cov = orc.epsilon2_covariance_check(lam, 1.0, 1.0, e1_variance=10.0,
                                        n=128, trials=20_000, seed=3)
    report("appendix.epsilon2_diag", cov.diag_rel_dev <= 0.05,
           f"rel dev {cov.diag_rel_dev:.3f}")


def _verify_solver(report):
    from .denoisers import PrecisionVector
    rng = np.random.default_rng(4)
    layout = tr.make_layout((64, 64), 1)
    gamma = PrecisionVector(layout, rng.uniform(0.5, 2.0, 4))
    lam = rng.uniform(0.1, 0.6, 4)
    coeffs = rng.standard_normal(layout.size) + 1j * rng.standard_normal(layout.size)

    def f(c):
        return dn.subband_soft_threshold(tr.WaveletPyramid(layout, c), gamma, lam).estimate.coeffs

    analytic = dn.subband_soft_threshold(tr.WaveletPyramid(layout, coeffs),
                                         gamma, lam).subband_divergence
    worst = 0.0
    for ell, band in enumerate(layout.subbands):
        est = gec.mc_subband_trace(f, coeffs, gamma, ell, seed=10 + ell,
                                   n_probes=16) / band.size
        worst = max(worst, abs(est - analytic[ell]) / analytic[ell])
    report("solver.mc_divergence", worst <= 0.05, f"worst rel dev {worst:.3f}")


def cmd_verify(args):
    failures = []

    def report(name, ok, detail=""):
        print(f"{'PASS' if ok else 'FAIL'} {name}" + (f" ({detail})" if detail else ""))
        if not ok:
            failures.append(name)

    suites = {"transforms": [_verify_transforms], "appendix": [_verify_appendix],
              "solver": [_verify_solver]}
    suites["all"] = suites["transforms"] + suites["appendix"] + suites["solver"]
    for fn in suites[args.suite]:
        fn(report)
    if failures:
        print(f"{len(failures)} check(s) failed")
        return EXIT_VERIFY_FAIL
    print("all checks passed")
    return EXIT_OK


def _denoise_test(endpoint_spec):
    rng = np.random.default_rng(0)
    u = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    noise = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    failures = []
    with proto.DenoiserEndpoint(endpoint_spec) as ep:
        out = ep.denoise(u, [noise], np.ones(4))
        ok = out.shape == u.shape and np.all(np.isfinite(out))
        print(f"{'PASS' if ok else 'FAIL'} protocol.denoise_roundtrip")
        if not ok:
            failures.append("roundtrip")
        resp = ep.roundtrip(b"NOT-A-VALID-FRAME")
        try:
            proto.decode_response(resp, 16, 16)
            status_ok = False
        except proto.ServerReportedError as exc:
            status_ok = exc.status == proto.STATUS_SHAPE
        except proto.ProtocolError:
            status_ok = False
        print(f"{'PASS' if status_ok else 'FAIL'} protocol.malformed_frame_status")
        if not status_ok:
            failures.append("malformed")
        out = ep.denoise(u, [noise], np.ones(4))
        alive = out.shape == u.shape
        print(f"{'PASS' if alive else 'FAIL'} protocol.connection_survives")
        if not alive:
            failures.append("connection")
    return EXIT_OK if not failures else EXIT_VERIFY_FAIL


def main(argv=None):
    ap = argparse.ArgumentParser(prog="wavegec",
                                 description="wavelet-domain EC recovery toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mask-gen", help="generate and store a sampling mask")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="generate phantom + noisy measurements")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("recover", help="run a recovery experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--endpoint", default="")

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=["appendix", "transforms", "solver", "all"])

    p = sub.add_parser("denoise-test", help="denoiser endpoint conformance")
    p.add_argument("--endpoint", required=True)

    args = ap.parse_args(argv)
    try:
        if args.command == "mask-gen":
            return cmd_mask_gen(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "recover":
            return cmd_recover(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "denoise-test":
            return _denoise_test(args.endpoint)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (proto.ProtocolError,) as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (gec.SolverError, fwd.ForwardModelError, bl.BaselineError,
            tr.TransformError, dn.DenoiserError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
