"""PSBP-MM: truncated probit stick-breaking mixture of regressions.

Stick ``k`` at covariate profile ``x`` breaks with probability
``Phi(xi_k . x)``; the last stick absorbs the remaining mass.  Each
covariate ``d`` of each component carries one indicator ``gamma_kd`` that
switches both the stick coefficient ``xi_kd`` and the regression coefficient
``theta_kd`` on or off together.  Sampling is blocked Gibbs with truncated
normal latents for the probit sticks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .config import HyperConfig
from .data import Dataset
from .randist import (
    coeff_posterior,
    gamma_rate,
    log_beta_fn,
    log_ndtr,
    log_norm_pdf,
    normal_prec,
    sample_log_weights,
    slab_log_bf,
    trunc_norm,
)
from .rpms import member_index

H_A_KAPPA, H_B_KAPPA, H_A_TAU, H_B_TAU, H_MU_XI, H_TAU_XI, H_A_LAM, H_B_LAM = range(8)


def hyper_vector(h: HyperConfig):
    return np.array(
        [h.a_kappa, h.b_kappa, h.psbp_a_tau, h.psbp_b_tau, h.mu_xi, h.tau_xi, h.a_lambda, h.b_lambda],
        dtype=float,
    )


@dataclass
class PsbpState:
    K: int
    xi: np.ndarray  # K x D
    gamma: np.ndarray  # K x D
    kappa: np.ndarray
    u: np.ndarray
    theta: np.ndarray  # K x P (intercept first when present)
    tau: np.ndarray  # P
    scal: np.ndarray  # [lambda]
    alloc: np.ndarray
    latents: np.ndarray  # n x (K-1); entry (i, j) meaningful for j <= alloc[i]

    @property
    def lam(self):
        return float(self.scal[0])

    @property
    def offset(self):
        return self.theta.shape[1] - self.xi.shape[1]

    def linkage_holds(self):
        off = self.offset
        off_ = self.gamma == 0
        return bool(np.all(self.xi[off_] == 0) and np.all(self.theta[:, off:][off_] == 0))

    def copy(self):
        return PsbpState(self.K, self.xi.copy(), self.gamma.copy(), self.kappa.copy(), self.u.copy(),
                         self.theta.copy(), self.tau.copy(), self.scal.copy(), self.alloc.copy(),
                         self.latents.copy())


def initial_state(n, D, P, K):
    """All components switched on with zero coefficients, everyone in component 0."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return PsbpState(
        K=K,
        xi=np.zeros((K, D)),
        gamma=np.ones((K, D), dtype=np.int64),
        kappa=np.full(D, 0.5),
        u=np.ones(D, dtype=np.int64),
        theta=np.zeros((K, P)),
        tau=np.ones(P),
        scal=np.array([1.0]),
        alloc=np.zeros(n, dtype=np.int64),
        latents=np.zeros((n, max(K - 1, 1))),
    )


# --------------------------------------------------------------------------
# stick weights
# --------------------------------------------------------------------------


@njit
def probit_log_weights_row(xi, x, out):
    K = xi.shape[0]
    acc = 0.0
    for k in range(K - 1):
        nu = 0.0
        for d in range(x.size):
            nu += xi[k, d] * x[d]
        out[k] = acc + log_ndtr(nu)
        acc += log_ndtr(-nu)
    out[K - 1] = acc


def probit_weights(xi, x):
    """Stick-breaking weights ``psi_k(x)``, k = 1..K, summing to one."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    x = np.asarray(x, dtype=float).ravel()
    if xi.shape[1] != x.size:
        raise ValueError("xi columns must match the covariate vector")
    out = np.empty(xi.shape[0])
    probit_log_weights_row(xi, x, out)
    w = np.exp(out)
    # the last weight is the remainder, so the sum is 1 up to rounding
    return w / w.sum()


# --------------------------------------------------------------------------
# sweep pieces
# --------------------------------------------------------------------------


@njit
def alloc_kernel(rng, y, Xr, Xs, xi, theta, lam, alloc):
    K = xi.shape[0]
    logw = np.empty(K)
    for i in range(y.size):
        probit_log_weights_row(xi, Xs[i], logw)
        for k in range(K):
            mu = 0.0
            for p in range(Xr.shape[1]):
                mu += Xr[i, p] * theta[k, p]
            logw[k] += log_norm_pdf(y[i], mu, lam)
        alloc[i] = sample_log_weights(rng, logw, K)


@njit
def latent_kernel(rng, Xs, xi, alloc, W):
    K = xi.shape[0]
    for i in range(alloc.size):
        z = alloc[i]
        top = z if z < K - 1 else K - 2
        for j in range(top + 1):
            nu = 0.0
            for d in range(Xs.shape[1]):
                nu += xi[j, d] * Xs[i, d]
            W[i, j] = trunc_norm(rng, nu, 1.0, j == z)


@njit
def _xi_stats(k, d, Xs, xi, alloc, W):
    sxx = 0.0
    sxr = 0.0
    for i in range(alloc.size):
        if alloc[i] >= k:
            r = W[i, k]
            for e in range(Xs.shape[1]):
                if e != d:
                    r -= xi[k, e] * Xs[i, e]
            x = Xs[i, d]
            sxx += x * x
            sxr += x * r
    return sxx, sxr


@njit
def _theta_stats(k, c, order, lo, hi, y, Xr, theta):
    sxx = 0.0
    sxr = 0.0
    for t in range(lo, hi):
        i = order[t]
        r = y[i]
        for p in range(Xr.shape[1]):
            if p != c:
                r -= Xr[i, p] * theta[k, p]
        x = Xr[i, c]
        sxx += x * x
        sxr += x * r
    return sxx, sxr


@njit
def xi_gamma_kernel(rng, y, Xr, Xs, alloc, W, xi, gamma, kappa, theta, tau, lam, hp):
    """Joint draw of (gamma_kd, xi_kd, theta_kd) with both coefficients integrated out of the odds."""
    K = xi.shape[0]
    D = xi.shape[1]
    off = Xr.shape[1] - D
    mu_xi = hp[H_MU_XI]
    tau_xi = hp[H_TAU_XI]
    order, start = member_index(alloc, K)
    for k in range(K):
        lo = start[k]
        hi = start[k + 1]
        for c in range(off):
            sxx, sxr = _theta_stats(k, c, order, lo, hi, y, Xr, theta)
            pm, pp = coeff_posterior(0.0, tau[c], lam, sxx, sxr)
            theta[k, c] = normal_prec(rng, pm, pp)
        for d in range(D):
            c = off + d
            has_stick = k < K - 1
            if has_stick:
                xs, xr = _xi_stats(k, d, Xs, xi, alloc, W)
            else:
                xs, xr = 0.0, 0.0
            xm, xp = coeff_posterior(mu_xi, tau_xi, 1.0, xs, xr)
            ts, tr = _theta_stats(k, c, order, lo, hi, y, Xr, theta)
            tm, tp = coeff_posterior(0.0, tau[c], lam, ts, tr)
            if kappa[d] <= 0.0:
                g = 0
            elif kappa[d] >= 1.0:
                g = 1
            else:
                lo_in = (math.log(kappa[d]) - math.log1p(-kappa[d])
                         + slab_log_bf(mu_xi, tau_xi, xm, xp) + slab_log_bf(0.0, tau[c], tm, tp))
                if lo_in > 0.0:
                    p_in = 1.0 / (1.0 + math.exp(-lo_in))
                else:
                    e = math.exp(lo_in)
                    p_in = e / (1.0 + e)
                g = 1 if rng.random() < p_in else 0
            gamma[k, d] = g
            if g == 1:
                xi[k, d] = normal_prec(rng, xm, xp)
                theta[k, c] = normal_prec(rng, tm, tp)
            else:
                xi[k, d] = 0.0
                theta[k, c] = 0.0


@njit
def kappa_u_kernel(rng, gamma, kappa, u, a_k, b_k):
    K = gamma.shape[0]
    for d in range(gamma.shape[1]):
        s = 0
        for k in range(K):
            s += gamma[k, d]
        if s > 0:
            u[d] = 1
        else:
            # u = 1 evidence of K zeros with kappa integrated out, against u = 0 evidence 1
            lb = log_beta_fn(a_k, b_k + K) - log_beta_fn(a_k, b_k)
            p1 = math.exp(lb) / (math.exp(lb) + 1.0)
            u[d] = 1 if rng.random() < p1 else 0
        if u[d] == 1:
            kappa[d] = rng.beta(a_k + s, b_k + K - s)
        else:
            kappa[d] = 0.0


@njit
def tau_lambda_kernel(rng, y, Xr, alloc, gamma, theta, tau, scal, hp):
    K = theta.shape[0]
    P = theta.shape[1]
    off = P - gamma.shape[1]
    for c in range(P):
        m = 0
        ss = 0.0
        for k in range(K):
            if c < off or gamma[k, c - off] == 1:
                m += 1
                ss += theta[k, c] * theta[k, c]
        tau[c] = gamma_rate(rng, hp[H_A_TAU] + 0.5 * m, hp[H_B_TAU] + 0.5 * ss)
    ssr = 0.0
    for i in range(y.size):
        r = y[i]
        for p in range(P):
            r -= Xr[i, p] * theta[alloc[i], p]
        ssr += r * r
    scal[0] = gamma_rate(rng, hp[H_A_LAM] + 0.5 * y.size, hp[H_B_LAM] + 0.5 * ssr)


@njit
def sweep_kernel(rng, y, Xr, Xs, alloc, W, xi, gamma, kappa, u, theta, tau, scal, hp):
    alloc_kernel(rng, y, Xr, Xs, xi, theta, scal[0], alloc)
    latent_kernel(rng, Xs, xi, alloc, W)
    xi_gamma_kernel(rng, y, Xr, Xs, alloc, W, xi, gamma, kappa, theta, tau, scal[0], hp)
    kappa_u_kernel(rng, gamma, kappa, u, hp[H_A_KAPPA], hp[H_B_KAPPA])
    tau_lambda_kernel(rng, y, Xr, alloc, gamma, theta, tau, scal, hp)


@njit
def prior_kernel(rng, y, Xr, Xs, alloc, W, xi, gamma, kappa, u, theta, tau, scal, hp):
    K = xi.shape[0]
    D = xi.shape[1]
    P = theta.shape[1]
    off = P - D
    for d in range(D):
        if rng.random() < 0.5:
            u[d] = 1
            kappa[d] = rng.beta(hp[H_A_KAPPA], hp[H_B_KAPPA])
        else:
            u[d] = 0
            kappa[d] = 0.0
    for c in range(P):
        tau[c] = gamma_rate(rng, hp[H_A_TAU], hp[H_B_TAU])
    scal[0] = gamma_rate(rng, hp[H_A_LAM], hp[H_B_LAM])
    for k in range(K):
        for c in range(off):
            theta[k, c] = normal_prec(rng, 0.0, tau[c])
        for d in range(D):
            g = 1 if rng.random() < kappa[d] else 0
            gamma[k, d] = g
            if g == 1:
                xi[k, d] = normal_prec(rng, hp[H_MU_XI], hp[H_TAU_XI])
                theta[k, off + d] = normal_prec(rng, 0.0, tau[off + d])
            else:
                xi[k, d] = 0.0
                theta[k, off + d] = 0.0
    lw = np.empty(K)
    for i in range(alloc.size):
        probit_log_weights_row(xi, Xs[i], lw)
        alloc[i] = sample_log_weights(rng, lw, K)
    latent_kernel(rng, Xs, xi, alloc, W)
    simulate_response_kernel(rng, y, Xr, alloc, theta, scal[0])


@njit
def simulate_response_kernel(rng, y, Xr, alloc, theta, lam):
    for i in range(y.size):
        mu = 0.0
        for p in range(Xr.shape[1]):
            mu += Xr[i, p] * theta[alloc[i], p]
        y[i] = normal_prec(rng, mu, lam)


# --------------------------------------------------------------------------
# python surface
# --------------------------------------------------------------------------


class PsbpSampler:
    """Blocked Gibbs sampler for the probit stick-breaking mixture.

    Parameters
    ----------
    dataset : Dataset
    hyper : HyperConfig
        Uses ``K``, ``a_kappa``, ``b_kappa``, ``psbp_a_tau``, ``psbp_b_tau``,
        ``mu_xi``, ``tau_xi`` (a precision), ``a_lambda`` and ``b_lambda``.
    intercept : bool
        Add an always-included regression intercept (the sticks never get one).
    """

    model = "psbp"

    def __init__(self, dataset: Dataset, hyper: HyperConfig = None, intercept=False):
        self.hyper = hyper or HyperConfig()
        self.y = dataset.y.copy()
        self.Xs = np.ascontiguousarray(dataset.X.astype(float))
        self.Xr = np.ascontiguousarray(dataset.design(intercept))
        self.intercept = intercept
        self.hp = hyper_vector(self.hyper)
        self.state = initial_state(self.y.size, self.Xs.shape[1], self.Xr.shape[1], self.hyper.K)
        self.column_names = (["(intercept)"] if intercept else []) + list(dataset.column_names)
        self.covariate_names = list(dataset.column_names)

    def _args(self):
        s = self.state
        return (self.y, self.Xr, self.Xs, s.alloc, s.latents, s.xi, s.gamma, s.kappa, s.u,
                s.theta, s.tau, s.scal, self.hp)

    def sweep(self, rng):
        sweep_kernel(rng, *self._args())

    def draw_prior(self, rng):
        prior_kernel(rng, *self._args())

    def resample_data(self, rng):
        s = self.state
        simulate_response_kernel(rng, self.y, self.Xr, s.alloc, s.theta, s.lam)

    # individual blocks, exposed for testing
    def allocation_update(self, rng):
        s = self.state
        alloc_kernel(rng, self.y, self.Xr, self.Xs, s.xi, s.theta, s.lam, s.alloc)
        return s.alloc

    def probit_augmentation_update(self, rng):
        s = self.state
        latent_kernel(rng, self.Xs, s.xi, s.alloc, s.latents)
        return s.latents

    def xi_gamma_update(self, rng):
        s = self.state
        xi_gamma_kernel(rng, self.y, self.Xr, self.Xs, s.alloc, s.latents, s.xi, s.gamma, s.kappa,
                        s.theta, s.tau, s.lam, self.hp)
        return s.xi, s.gamma

    def kappa_u_update(self, rng):
        s = self.state
        kappa_u_kernel(rng, s.gamma, s.kappa, s.u, self.hyper.a_kappa, self.hyper.b_kappa)
        return s.kappa, s.u

    # ------------------------------------------------------------ archive

    def archive_fields(self):
        f = {"iter": "int", "k": "int", "lambda": "float", "assign": "ivec", "alloc": "ivec",
             "theta": "fmat", "xi": "fmat", "gamma": "fmat", "kappa": "fvec", "u": "ivec",
             "tau": "fvec"}
        widths = {"theta": self.Xr.shape[1], "xi": self.Xs.shape[1], "gamma": self.Xs.shape[1]}
        return f, widths

    def archive_meta(self):
        return {"K": self.state.K, "intercept": bool(self.intercept),
                "column_names": self.column_names, "covariate_names": self.covariate_names}

    def record(self, it):
        s = self.state
        return {
            "iter": it,
            "k": int(np.unique(s.alloc).size),
            "lambda": s.lam,
            "assign": _first_appearance(s.alloc),
            "alloc": s.alloc.copy(),
            "theta": s.theta.copy(),
            "xi": s.xi.copy(),
            "gamma": s.gamma.astype(float),
            "kappa": s.kappa.copy(),
            "u": s.u.copy(),
            "tau": s.tau.copy(),
        }

    def functionals(self):
        s = self.state
        th = s.theta[s.alloc]
        return {
            "k": float(np.unique(s.alloc).size),
            "lambda": s.lam,
            "mean_theta": float(th.mean()),
            "mean_inclusion": float(s.gamma.mean()),
            "mean_kappa": float(s.kappa.mean()),
        }


def _first_appearance(labels):
    lookup = {}
    return np.array([lookup.setdefault(int(v), len(lookup)) for v in labels], dtype=np.int64)


def inclusion_probability(draws, d):
    """Fraction of retained draws in which some component includes covariate ``d``."""
    draws.require_nonempty()
    g = np.array([np.asarray(r["gamma"])[:, d] for r in draws.records])
    return float(np.mean(np.any(g != 0, axis=1)))


def predictive_density(draws, xt, grid, return_mean=False):
    """Posterior predictive density of y at covariate profile ``xt``."""
    draws.require_nonempty()
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    xt = np.asarray(xt, dtype=float)
    xr = np.concatenate(([1.0], xt)) if draws.meta.get("intercept") else xt
    dens = np.zeros_like(grid)
    mean_acc = 0.0
    for rec in draws.records:
        w = probit_weights(rec["xi"], xt)
        means = np.asarray(rec["theta"]) @ xr
        sd = 1.0 / math.sqrt(rec["lambda"])
        dens += (w[:, None] * np.exp(-0.5 * ((grid[None, :] - means[:, None]) / sd) ** 2)).sum(0) / (
            sd * math.sqrt(2 * math.pi)
        )
        mean_acc += float(w @ means)
    dens /= len(draws)
    if return_mean:
        return dens, mean_acc / len(draws)
    return dens
