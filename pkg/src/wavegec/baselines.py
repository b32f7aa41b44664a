"""Reference iterative recovery algorithms for comparison runs: AMP with
Onsager correction and its scalar state evolution, plug-and-play proximal
gradient descent, and Peaceman-Rachford (symmetric) ADMM.

These operate on generic dense operators (real or complex ndarrays); scalar
denoisers follow the callable protocol f(r, tau) -> (estimate, divergence)
with the divergence normalized per coefficient.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss


class BaselineError(ValueError):
    pass


@dataclass
class AmpState:
    v: np.ndarray               # residual, length P
    x: np.ndarray               # estimate, length N
    tau: float = 0.0
    beta: float = 1.0
    div_prev: float = 0.0       # divergence at the input that produced x
    iteration: int = 0


def amp_init(y, a, beta=None):
    """Zero-initialized AMP state; beta defaults to sqrt(N)/||A||_F."""
    p, n = a.shape
    if beta is None:
        beta = math.sqrt(n) / np.linalg.norm(a)
    return AmpState(v=np.zeros(p, dtype=a.dtype), x=np.zeros(n, dtype=a.dtype),
                    tau=0.0, beta=float(beta))


def amp_iterate(state, y, a, denoiser, onsager=True):
    """One AMP iteration: residual with Onsager correction, noise-variance
    estimate tau = ||v||^2 / M, then denoising of x + beta A^H v.

    The correction uses the divergence at the previous denoiser input; it is
    zero on the first iteration (zero-initialized state).  With onsager=False
    the recursion reduces to proximal gradient descent with step beta^2.
    """
    p, n = a.shape
    beta = state.beta
    v = beta * (y - a @ state.x)
    if onsager and state.iteration > 0:
        v = v + (n / p) * state.v * state.div_prev
    tau = float(np.real(np.vdot(v, v))) / p
    r = state.x + beta * (a.conj().T @ v)
    x, div = denoiser(r, tau)
    return AmpState(v=v, x=x, tau=tau, beta=beta, div_prev=float(div),
                    iteration=state.iteration + 1)


@dataclass
class SeTrace:
    taus: list = field(default_factory=list)
    mses: list = field(default_factory=list)


def amp_state_evolution(mse_fn, tau_w, n, p, e0, iters):
    """Scalar state evolution: tau_t = tau_w + (N/P) E_t,
    E_{t+1} = mse_fn(tau_t), starting from E_0 = e0."""
    trace = SeTrace()
    e = float(e0)
    for _ in range(iters):
        tau = tau_w + (n / p) * e
        trace.taus.append(tau)
        trace.mses.append(e)
        e = float(mse_fn(tau))
        if not math.isfinite(e):
            raise BaselineError("state evolution diverged")
    return trace


class BernoulliGaussianDenoiser:
    """Scalar MMSE denoiser (posterior mean) for the spike-and-slab prior
    x = B * G with P(B=1) = rho and G ~ N(0, sigma2), observed through AWGN
    of variance tau.  Provides the analytic divergence and the exact MSE
    function (by Gauss-Hermite quadrature) used by the state evolution."""

    def __init__(self, rho, sigma2, gh_nodes=61):
        if not 0.0 <= rho <= 1.0:
            raise BaselineError(f"rho must lie in [0, 1], got {rho}")
        self.rho = float(rho)
        self.sigma2 = float(sigma2)
        nodes, weights = hermegauss(gh_nodes)    # weight exp(-z^2/2)
        self._z = nodes
        self._w = weights / math.sqrt(2.0 * math.pi)

    def second_moment(self):
        return self.rho * self.sigma2

    def _posterior(self, r, tau):
        s2, rho = self.sigma2, self.rho
        if rho == 0.0:
            return np.zeros_like(r), np.zeros_like(r)
        shrink = s2 / (s2 + tau)
        if rho == 1.0:
            return np.full_like(r, 1.0), shrink * r
        # log odds of the nonzero component
        log_odds = (math.log(rho / (1.0 - rho))
                    + 0.5 * math.log(tau / (s2 + tau))
                    + 0.5 * r * r * (1.0 / tau - 1.0 / (s2 + tau)))
        prob = 1.0 / (1.0 + np.exp(-np.clip(log_odds, -700, 700)))
        return prob, shrink * r

    def __call__(self, r, tau):
        r = np.asarray(r, dtype=float)
        tau = max(float(tau), 1e-300)
        prob, mean = self._posterior(r, tau)
        x = prob * mean
        if self.rho == 0.0:
            return x, 0.0
        shrink = self.sigma2 / (self.sigma2 + tau)
        dlogodds = r * (1.0 / tau - 1.0 / (self.sigma2 + tau))
        deriv = prob * shrink + prob * (1.0 - prob) * dlogodds * mean
        return x, float(np.mean(deriv))

    def mse(self, tau):
        """E[(f(x + sqrt(tau) z) - x)^2] by nested Gauss-Hermite quadrature."""
        tau = max(float(tau), 1e-300)
        z = self._z
        wz = self._w
        sd = math.sqrt(tau)
        # zero-signal component
        f0, _ = self.__call__(sd * z, tau)
        mse0 = float(np.sum(wz * f0 ** 2))
        if self.rho == 0.0:
            return 0.0
        # nonzero component: x = sqrt(sigma2) u, u ~ N(0,1)
        su = math.sqrt(self.sigma2)
        x = su * self._z[:, None]
        r = x + sd * z[None, :]
        prob, mean = self._posterior(r, tau)
        err2 = (prob * mean - x) ** 2
        mse1 = float(self._w @ err2 @ wz)
        return (1.0 - self.rho) * mse0 + self.rho * mse1


@dataclass
class PgdState:
    x: np.ndarray
    iteration: int = 0


def pnp_pgd_iterate(state, y, a, mu, denoiser):
    """Gradient step on the data term, then denoise:
    x <- f2( x - mu A^H (A x - y) )."""
    if mu < 0:
        raise BaselineError("step size must be >= 0")
    grad = a.conj().T @ (a @ state.x - y)
    x1 = state.x - mu * grad
    x2, _ = denoiser(x1, mu)
    return PgdState(x=x2, iteration=state.iteration + 1)


@dataclass
class PrAdmmState:
    x1: np.ndarray
    x2: np.ndarray
    u: np.ndarray
    iteration: int = 0


def pr_admm_iterate(state, prox1, prox2):
    """Symmetric (Peaceman-Rachford) ADMM: two prox steps with a dual update
    after each."""
    x1 = prox1(state.x2 - state.u)
    u = state.u + x1 - state.x2
    x2 = prox2(x1 + u)
    u = u + x1 - x2
    return PrAdmmState(x1=x1, x2=x2, u=u, iteration=state.iteration + 1)


def quadratic_data_prox(a, y, gamma_w, gamma):
    """prox of (gamma_w/2)||A x - y||^2 with quadratic weight gamma:
    (gamma_w A^H A + gamma I)^{-1} (gamma_w A^H y + gamma r), precomputed."""
    n = a.shape[1]
    m = gamma_w * a.conj().T @ a + gamma * np.eye(n)
    bhy = gamma_w * a.conj().T @ y
    lu = np.linalg.inv(m)

    def prox(r):
        return lu @ (bhy + gamma * r)
    return prox
