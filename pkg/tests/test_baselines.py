import numpy as np
import pytest

from wavegec import baselines as bl


def identity_denoiser(r, tau):
    return np.array(r, copy=True), 1.0


class TestBgDenoiser:
    def test_edge_priors(self):
        den0 = bl.BernoulliGaussianDenoiser(0.0, 1.0)
        x, d = den0(np.array([1.0, -2.0]), 0.5)
        assert np.all(x == 0) and d == 0.0
        den1 = bl.BernoulliGaussianDenoiser(1.0, 2.0)
        x, d = den1(np.array([1.0, -2.0]), 0.5)
        assert np.allclose(x, np.array([1.0, -2.0]) * 2.0 / 2.5)
        assert d == pytest.approx(2.0 / 2.5, rel=1e-12)

    def test_divergence_matches_finite_difference(self):
        den = bl.BernoulliGaussianDenoiser(0.2, 1.5)
        rng = np.random.default_rng(0)
        r = rng.standard_normal(200)
        tau = 0.3
        _, d = den(r, tau)
        eps = 1e-6
        fd = np.mean([(den(np.array([ri + eps]), tau)[0][0]
                       - den(np.array([ri - eps]), tau)[0][0]) / (2 * eps) for ri in r])
        assert abs(d - fd) <= 1e-6

    def test_mse_matches_monte_carlo(self):
        den = bl.BernoulliGaussianDenoiser(0.1, 10.0)
        tau = 0.5
        rng = np.random.default_rng(1)
        n = 2_000_000
        x = (rng.random(n) < 0.1) * rng.normal(0, np.sqrt(10.0), n)
        r = x + rng.normal(0, np.sqrt(tau), n)
        f, _ = den(r, tau)
        mc = np.mean((f - x) ** 2)
        assert abs(den.mse(tau) - mc) <= 0.02 * mc

    def test_rho_validation(self):
        with pytest.raises(bl.BaselineError):
            bl.BernoulliGaussianDenoiser(1.5, 1.0)


class TestAmp:
    def test_hand_checked_identity_iterations(self):
        # 2x2 system, identity denoiser: recursion is
        # v_{t+1} = beta (y - A x_t) + (N/M) v_t d_{t-1}, x_{t+1} = x_t + beta A^T v_{t+1}
        a = np.array([[1.0, 0.5], [0.25, -1.0]])
        y = np.array([1.0, -0.5])
        beta = np.sqrt(2.0) / np.linalg.norm(a)
        st = bl.amp_init(y, a)
        st = bl.amp_iterate(st, y, a, identity_denoiser)
        v1 = beta * y
        x1 = beta * (a.T @ v1)
        assert np.allclose(st.v, v1, atol=1e-15)
        assert np.allclose(st.x, x1, atol=1e-15)
        st = bl.amp_iterate(st, y, a, identity_denoiser)
        v2 = beta * (y - a @ x1) + (2 / 2) * v1 * 1.0
        x2 = x1 + beta * (a.T @ v2)
        assert np.allclose(st.v, v2, atol=1e-14)
        assert np.allclose(st.x, x2, atol=1e-14)

    def test_zero_measurement_stays_zero(self):
        a = np.eye(4)
        y = np.zeros(4)
        st = bl.amp_init(y, a)
        for _ in range(3):
            st = bl.amp_iterate(st, y, a, identity_denoiser)
        assert np.all(st.x == 0) and np.all(st.v == 0) and st.tau == 0.0

    def test_onsager_off_equals_pgd(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((12, 24)) / np.sqrt(12)
        x0 = rng.standard_normal(24) * (rng.random(24) < 0.3)
        y = a @ x0 + 0.01 * rng.standard_normal(12)
        den = bl.BernoulliGaussianDenoiser(0.3, 1.0)
        fixed_tau = lambda r, t: den(r, 0.1)
        amp = bl.amp_init(y, a)
        mu = amp.beta ** 2
        pgd = bl.PgdState(x=np.zeros(24))
        for _ in range(5):
            amp = bl.amp_iterate(amp, y, a, fixed_tau, onsager=False)
            pgd = bl.pnp_pgd_iterate(pgd, y, a, mu, fixed_tau)
        assert np.max(np.abs(amp.x - pgd.x)) <= 1e-12

    def test_state_evolution_tracks_amp(self):
        # scaled-down version of the acceptance check; gentle-descent regime
        p, n = 256, 512
        rho, s2, tau_w = 0.2, 5.0, 0.1
        den = bl.BernoulliGaussianDenoiser(rho, s2)
        iters = 6
        se = bl.amp_state_evolution(den.mse, tau_w, n, p, den.second_moment(), iters)
        taus = np.zeros(iters)
        trials = 10
        for seed in range(trials):
            rng = np.random.default_rng(seed)
            a = rng.standard_normal((p, n)) / np.sqrt(p)
            x0 = (rng.random(n) < rho) * rng.normal(0, np.sqrt(s2), n)
            y = a @ x0 + rng.normal(0, np.sqrt(tau_w), p)
            st = bl.amp_init(y, a)
            for t in range(iters):
                st = bl.amp_iterate(st, y, a, lambda r, tau: den(r, tau))
                taus[t] += st.tau
        taus /= trials
        rel = np.abs(taus - np.array(se.taus)) / np.array(se.taus)
        assert np.all(rel <= 0.15)


class TestStateEvolution:
    def test_zero_prior(self):
        den = bl.BernoulliGaussianDenoiser(0.0, 1.0)
        se = bl.amp_state_evolution(den.mse, 0.25, 100, 50, den.second_moment(), 5)
        assert np.allclose(se.mses, 0.0)
        assert np.allclose(se.taus, 0.25)

    def test_gaussian_prior_fixed_point(self):
        # rho = 1: Wiener mse(tau) = s2 tau / (s2 + tau); fixed point solves
        # E = s2 (tau_w + rE) / (s2 + tau_w + rE) with r = N/P
        s2, tau_w, n, p = 2.0, 0.1, 400, 200
        den = bl.BernoulliGaussianDenoiser(1.0, s2)
        se = bl.amp_state_evolution(den.mse, tau_w, n, p, s2, 400)
        r = n / p
        # quadratic: r E^2 + (s2 + tau_w - r s2) E - s2 tau_w = 0
        bq = s2 + tau_w - r * s2
        e_star = (-bq + np.sqrt(bq ** 2 + 4 * r * s2 * tau_w)) / (2 * r)
        assert abs(se.mses[-1] - e_star) <= 1e-8

    def test_bg_monotone(self):
        den = bl.BernoulliGaussianDenoiser(0.1, 10.0)
        se = bl.amp_state_evolution(den.mse, 0.01, 1000, 500, den.second_moment(), 15)
        diffs = np.diff(se.mses)
        assert np.all(diffs <= 1e-12)


class TestPgd:
    def test_converges_to_least_squares(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((20, 8))
        y = rng.standard_normal(20)
        mu = 0.9 / np.linalg.norm(a, 2) ** 2
        st = bl.PgdState(x=np.zeros(8))
        for _ in range(3000):
            st = bl.pnp_pgd_iterate(st, y, a, mu, identity_denoiser)
        ls = np.linalg.lstsq(a, y, rcond=None)[0]
        assert np.max(np.abs(st.x - ls)) <= 1e-8

    def test_stationary_at_solution(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((6, 6))
        x0 = rng.standard_normal(6)
        st = bl.PgdState(x=x0.copy())
        st = bl.pnp_pgd_iterate(st, a @ x0, a, 0.1 / np.linalg.norm(a, 2) ** 2,
                                identity_denoiser)
        assert np.max(np.abs(st.x - x0)) <= 1e-12

    def test_zero_step_freezes(self):
        a = np.eye(3)
        st = bl.PgdState(x=np.ones(3))
        st = bl.pnp_pgd_iterate(st, np.zeros(3), a, 0.0, identity_denoiser)
        assert np.array_equal(st.x, np.ones(3))


class TestPrAdmm:
    def test_identity_proxes(self):
        rng = np.random.default_rng(5)
        x2 = rng.standard_normal(6)
        st = bl.PrAdmmState(x1=np.zeros(6), x2=x2, u=np.zeros(6))
        ident = lambda r: r
        st = bl.pr_admm_iterate(st, ident, ident)
        assert np.array_equal(st.u, np.zeros(6))
        assert np.array_equal(st.x1, st.x2)

    def test_quadratic_fixed_point(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((10, 6))
        y = rng.standard_normal(10)
        q = np.diag(rng.uniform(0.5, 2.0, 6))
        b = rng.standard_normal(6)
        gamma_w, gamma = 2.0, 1.3
        prox1 = bl.quadratic_data_prox(a, y, gamma_w, gamma)

        minv = np.linalg.inv(q + gamma * np.eye(6))

        def prox2(r):
            return minv @ (q @ b + gamma * r)

        st = bl.PrAdmmState(x1=np.zeros(6), x2=np.zeros(6), u=np.zeros(6))
        for _ in range(400):
            st = bl.pr_admm_iterate(st, prox1, prox2)
        ref = np.linalg.solve(gamma_w * a.T @ a + q, gamma_w * a.T @ y + q @ b)
        assert np.max(np.abs(st.x2 - ref)) <= 1e-8

    def test_matches_frozen_precision_ec(self):
        # EC with both divergences claimed as 1/2 freezes gamma1 = gamma2,
        # reproducing the symmetric-ADMM trajectory exactly
        from wavegec import gec

        rng = np.random.default_rng(7)
        a = rng.standard_normal((8, 8)) + 0.5 * np.eye(8)
        y = rng.standard_normal(8)
        gamma = 1.7
        prox1 = bl.quadratic_data_prox(a, y, 1.0, gamma)
        soft = lambda r: np.sign(r) * np.maximum(np.abs(r) - 0.1 / gamma, 0)

        def f1(r, g):
            return prox1(r), 0.5

        def f2(r, g):
            return soft(r), 0.5

        r1_init = rng.standard_normal(8)
        ec = gec.EcState(r1=r1_init.copy(), gamma1=gamma)
        # PR-ADMM variables mapped from the EC message: r1 = x2 - u
        admm = bl.PrAdmmState(x1=np.zeros(8), x2=r1_init.copy(), u=np.zeros(8))
        for _ in range(10):
            ec = gec.ec_iterate(ec, f1, f2, clip_lo=0.0, clip_hi=1.0)
            admm = bl.pr_admm_iterate(admm, prox1, soft)
            assert np.max(np.abs(ec.x1 - admm.x1)) <= 1e-10
            assert np.max(np.abs(ec.x2 - admm.x2)) <= 1e-10
            assert ec.gamma2 == pytest.approx(gamma, rel=1e-14)
