"""RPMS and SSM: DP mixtures of spike-and-slab regressions.

RPMS clusters observations jointly on the response regression and a
covariate submodel (Bernoulli for binary columns, Normal mean with fixed
within-cluster precision for continuous ones).  SSM is the same sampler with
the covariate submodel switched off, so allocation never reads X beyond the
regression.  Reallocation uses auxiliary components drawn from the base
measure (Neal's algorithm 8); variable selection is encoded by exact zeros
in the cluster coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .config import HyperConfig
from .data import Dataset
from .dp_core import DpConcentration, Partition, alpha_kernel, crp_draw, relabel_last_into
from .randist import (
    coeff_posterior,
    gamma_rate,
    log_beta_fn,
    log_norm_pdf,
    normal_prec,
    sample_log_weights,
    slab_log_bf,
)

ZETA_EPS = 1e-12

# layout of the hyperparameter vector passed to kernels
H_A_PI, H_B_PI, H_A_OM, H_B_OM, H_A_TAU, H_B_TAU = 0, 1, 2, 3, 4, 5
H_A_LAM, H_B_LAM, H_A_ALPHA, H_B_ALPHA, H_A_ZETA, H_B_ZETA = 6, 7, 8, 9, 10, 11
H_DIRAC_AT = 12


def hyper_vector(h: HyperConfig):
    return np.array(
        [
            h.a_pi, h.b_pi, h.a_omega, h.b_omega, h.a_tau, h.b_tau,
            h.a_lambda, h.b_lambda, h.a_alpha, h.b_alpha, h.a_zeta, h.b_zeta,
            float(h.pi_dirac_at),
        ],
        dtype=float,
    )


@dataclass
class RpmsCluster:
    theta: np.ndarray
    zeta: np.ndarray = None


@dataclass
class RpmsHyper:
    pi: np.ndarray
    omega: np.ndarray
    tau: np.ndarray
    mu: np.ndarray
    lam: float
    conc: DpConcentration


@dataclass
class RpmsData:
    """Arrays the kernels read: response, regression design, covariates."""

    y: np.ndarray
    Xr: np.ndarray
    Xc: np.ndarray
    ctype: np.ndarray
    cmean: np.ndarray
    cprec: np.ndarray
    intercept: bool = False

    @classmethod
    def from_dataset(cls, ds: Dataset, intercept=False):
        mean, prec, _ = ds.column_stats()
        return cls(
            y=ds.y.copy(),
            Xr=np.ascontiguousarray(ds.design(intercept)),
            Xc=np.ascontiguousarray(ds.X.astype(float)),
            ctype=ds.type_codes(),
            cmean=mean,
            cprec=prec,
            intercept=intercept,
        )

    @property
    def n(self):
        return self.y.size


@dataclass
class RpmsState:
    assign: np.ndarray
    sizes: np.ndarray
    theta: np.ndarray
    zeta: np.ndarray
    k: int
    pi: np.ndarray
    omega: np.ndarray
    pi_dirac: np.ndarray
    tau: np.ndarray
    mu: np.ndarray
    scal: np.ndarray  # [lambda, alpha]
    mode: str = "rpms"

    @property
    def lam(self):
        return float(self.scal[0])

    @property
    def alpha(self):
        return float(self.scal[1])

    @property
    def use_cov(self):
        return self.mode == "rpms"

    @property
    def partition(self):
        return Partition(self.assign.copy())

    @property
    def hyper(self):
        return RpmsHyper(self.pi.copy(), self.omega.copy(), self.tau.copy(), self.mu.copy(), self.lam,
                         DpConcentration(self.alpha))

    @property
    def clusters(self):
        return [
            RpmsCluster(self.theta[j].copy(), self.zeta[j].copy() if self.use_cov else None)
            for j in range(self.k)
        ]

    def copy(self):
        return RpmsState(
            self.assign.copy(), self.sizes.copy(), self.theta.copy(), self.zeta.copy(), self.k,
            self.pi.copy(), self.omega.copy(), self.pi_dirac.copy(), self.tau.copy(),
            self.mu.copy(), self.scal.copy(), self.mode,
        )


def initial_state(data: RpmsData, hyper: HyperConfig, mode="rpms", m_aux=None) -> RpmsState:
    """One cluster, all coefficients zero, covariate parameters at 0.5."""
    if mode not in ("rpms", "ssm"):
        raise ValueError(f"mode must be 'rpms' or 'ssm', got {mode!r}")
    m_aux = hyper.m_aux if m_aux is None else m_aux
    n, P = data.Xr.shape
    D = data.Xc.shape[1]
    cap = n + m_aux + 1
    zeta = np.full((cap, D), 0.5)
    cont = data.ctype == 1
    zeta[:, cont] = data.cmean[cont]
    sizes = np.zeros(cap, dtype=np.int64)
    sizes[0] = n
    return RpmsState(
        assign=np.zeros(n, dtype=np.int64),
        sizes=sizes,
        theta=np.zeros((cap, P)),
        zeta=zeta,
        k=1 if n else 0,
        pi=np.full(P, 0.5),
        omega=np.full(P, 0.5),
        pi_dirac=np.zeros(P, dtype=np.int64),
        tau=np.ones(P),
        mu=np.full(P, hyper.mu_d),
        scal=np.array([1.0, 1.0]),
        mode=mode,
    )


# --------------------------------------------------------------------------
# likelihood pieces
# --------------------------------------------------------------------------


def response_loglik(y, x, cluster: RpmsCluster, lam):
    x = np.asarray(x, dtype=float)
    return float(log_norm_pdf(float(y), float(x @ np.asarray(cluster.theta, dtype=float)), lam))


def covariate_loglik(x, cluster: RpmsCluster, ctype=None, cprec=None):
    """Bernoulli (and optionally Normal) covariate log-likelihood for one row."""
    if cluster.zeta is None:
        raise ValueError("covariate likelihood is undefined in SSM mode")
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(cluster.zeta, dtype=float)
    ctype = np.zeros(x.size, dtype=np.int64) if ctype is None else np.asarray(ctype)
    cprec = np.ones(x.size) if cprec is None else np.asarray(cprec, dtype=float)
    return float(_cov_ll_row(x, zeta, ctype, cprec))


@njit
def _cov_ll_row(x, zeta, ctype, cprec):
    out = 0.0
    for d in range(x.size):
        if ctype[d] == 0:
            z = min(max(zeta[d], ZETA_EPS), 1.0 - ZETA_EPS)
            if x[d] > 0.5:
                out += math.log(z)
            else:
                out += math.log(1.0 - z)
        else:
            out += log_norm_pdf(x[d], zeta[d], cprec[d])
    return out


@njit
def _loglik(i, j, y, Xr, Xc, ctype, cprec, theta, zeta, lam, use_cov):
    mu = 0.0
    for p in range(Xr.shape[1]):
        mu += Xr[i, p] * theta[j, p]
    ll = log_norm_pdf(y[i], mu, lam)
    if use_cov:
        ll += _cov_ll_row(Xc[i], zeta[j], ctype, cprec)
    return ll


@njit
def _draw_g0(rng, slot, theta, zeta, pi, tau, mu, ctype, cmean, cprec, a_z, b_z, use_cov):
    for p in range(theta.shape[1]):
        if rng.random() < pi[p]:
            theta[slot, p] = 0.0
        else:
            theta[slot, p] = normal_prec(rng, mu[p], tau[p])
    if use_cov:
        for d in range(zeta.shape[1]):
            if ctype[d] == 0:
                zeta[slot, d] = rng.beta(a_z, b_z)
            else:
                zeta[slot, d] = normal_prec(rng, cmean[d], cprec[d])


@njit
def _copy_row(a, src, dst):
    for c in range(a.shape[1]):
        a[dst, c] = a[src, c]


@njit
def _swap_rows(a, r1, r2):
    for c in range(a.shape[1]):
        t = a[r1, c]
        a[r1, c] = a[r2, c]
        a[r2, c] = t


# --------------------------------------------------------------------------
# reallocation
# --------------------------------------------------------------------------


@njit
def realloc_one(rng, i, y, Xr, Xc, ctype, cmean, cprec, assign, sizes, theta, zeta, k,
                pi, tau, mu, lam, alpha, a_z, b_z, use_cov, m_aux, logw):
    c = assign[i]
    sizes[c] -= 1
    fresh_from = 0
    if sizes[c] == 0:
        # singleton: its parameters become the first auxiliary component
        last = k - 1
        assign[i] = -1
        if c != last:
            _swap_rows(theta, c, last)
            _swap_rows(zeta, c, last)
            sizes[c] = sizes[last]
            sizes[last] = 0
            relabel_last_into(assign, c, last)
        k -= 1
        fresh_from = 1
    for a in range(fresh_from, m_aux):
        _draw_g0(rng, k + a, theta, zeta, pi, tau, mu, ctype, cmean, cprec, a_z, b_z, use_cov)
    for j in range(k):
        logw[j] = math.log(sizes[j]) + _loglik(i, j, y, Xr, Xc, ctype, cprec, theta, zeta, lam, use_cov)
    la = math.log(alpha / m_aux)
    for a in range(m_aux):
        logw[k + a] = la + _loglik(i, k + a, y, Xr, Xc, ctype, cprec, theta, zeta, lam, use_cov)
    idx = sample_log_weights(rng, logw, k + m_aux)
    if idx >= k:
        if idx != k:
            _copy_row(theta, idx, k)
            _copy_row(zeta, idx, k)
        sizes[k] = 1
        assign[i] = k
        k += 1
    else:
        sizes[idx] += 1
        assign[i] = idx
    return k


@njit
def realloc_all(rng, y, Xr, Xc, ctype, cmean, cprec, assign, sizes, theta, zeta, k,
                pi, tau, mu, lam, alpha, a_z, b_z, use_cov, m_aux):
    logw = np.empty(y.size + m_aux + 1)
    for i in range(y.size):
        k = realloc_one(rng, i, y, Xr, Xc, ctype, cmean, cprec, assign, sizes, theta, zeta, k,
                        pi, tau, mu, lam, alpha, a_z, b_z, use_cov, m_aux, logw)
    return k


def reallocate_observation(rng, state: RpmsState, i, data: RpmsData, hyper: HyperConfig, m_aux=3):
    """Reassign observation ``i`` in place; returns the state."""
    if m_aux < 1:
        raise ValueError("m_aux must be >= 1")
    need = state.k + m_aux + 1
    if state.theta.shape[0] < need:
        raise ValueError("state capacity too small for m_aux")
    logw = np.empty(need)
    state.k = int(realloc_one(
        rng, i, data.y, data.Xr, data.Xc, data.ctype, data.cmean, data.cprec,
        state.assign, state.sizes, state.theta, state.zeta, state.k,
        state.pi, state.tau, state.mu, state.lam, state.alpha,
        hyper.a_zeta, hyper.b_zeta, state.use_cov, m_aux, logw,
    ))
    return state


def allocation_probabilities(state: RpmsState, i, data: RpmsData, aux_theta, aux_zeta):
    """Exact normalized reallocation probabilities for observation ``i``.

    ``aux_theta``/``aux_zeta`` hold the auxiliary components to use (the
    vacated singleton's parameters first, when applicable).  Diagnostic twin
    of :func:`realloc_one` that does not touch the state.
    """
    lam, alpha = state.lam, state.alpha
    m = len(aux_theta)
    sizes = np.bincount(np.delete(state.assign, i), minlength=state.k)
    keep = [j for j in range(state.k) if sizes[j] > 0]
    logw = []
    for j in keep:
        ll = log_norm_pdf(data.y[i], float(data.Xr[i] @ state.theta[j]), lam)
        if state.use_cov:
            ll += _cov_ll_row(data.Xc[i], state.zeta[j], data.ctype, data.cprec)
        logw.append(math.log(sizes[j]) + ll)
    for a in range(m):
        ll = log_norm_pdf(data.y[i], float(data.Xr[i] @ aux_theta[a]), lam)
        if state.use_cov:
            ll += _cov_ll_row(data.Xc[i], np.asarray(aux_zeta[a], dtype=float), data.ctype, data.cprec)
        logw.append(math.log(alpha / m) + ll)
    logw = np.array(logw)
    w = np.exp(logw - logw.max())
    return keep, w / w.sum()


# --------------------------------------------------------------------------
# cluster parameters
# --------------------------------------------------------------------------


@njit
def member_index(assign, k):
    """Counting sort of observations by cluster: (order, start) with start[k] = n."""
    n = assign.size
    start = np.zeros(k + 1, dtype=np.int64)
    for i in range(n):
        start[assign[i] + 1] += 1
    for j in range(k):
        start[j + 1] += start[j]
    fill = start[:k].copy()
    order = np.empty(n, dtype=np.int64)
    for i in range(n):
        j = assign[i]
        order[fill[j]] = i
        fill[j] += 1
    return order, start


@njit
def update_theta_jd(rng, j, d, order, lo, hi, y, Xr, theta, pi, tau, mu, lam):
    sxx = 0.0
    sxr = 0.0
    for t in range(lo, hi):
        i = order[t]
        r = y[i]
        for p in range(Xr.shape[1]):
            if p != d:
                r -= Xr[i, p] * theta[j, p]
        x = Xr[i, d]
        sxx += x * x
        sxr += x * r
    pm, pp = coeff_posterior(mu[d], tau[d], lam, sxx, sxr)
    if pi[d] >= 1.0:
        theta[j, d] = 0.0
        return 0.0
    if pi[d] <= 0.0:
        theta[j, d] = normal_prec(rng, pm, pp)
        return theta[j, d]
    # log odds of slab versus spike
    lo_slab = math.log1p(-pi[d]) - math.log(pi[d]) + slab_log_bf(mu[d], tau[d], pm, pp)
    if lo_slab > 0.0:
        p_slab = 1.0 / (1.0 + math.exp(-lo_slab))
    else:
        e = math.exp(lo_slab)
        p_slab = e / (1.0 + e)
    if rng.random() < p_slab:
        theta[j, d] = normal_prec(rng, pm, pp)
    else:
        theta[j, d] = 0.0
    return theta[j, d]


@njit
def update_clusters(rng, y, Xr, Xc, ctype, cmean, cprec, assign, theta, zeta, k,
                    pi, tau, mu, lam, a_z, b_z, use_cov):
    order, start = member_index(assign, k)
    P = Xr.shape[1]
    for j in range(k):
        lo = start[j]
        hi = start[j + 1]
        for d in range(P):
            update_theta_jd(rng, j, d, order, lo, hi, y, Xr, theta, pi, tau, mu, lam)
    if use_cov:
        _update_zeta_only(rng, Xc, ctype, cmean, cprec, order, start, zeta, k, a_z, b_z)


def update_theta_spike_slab(rng, state: RpmsState, j, d, data: RpmsData):
    """Resample one cluster coefficient from its spike/slab full conditional."""
    if not 0 <= j < state.k or state.sizes[j] == 0:
        raise ValueError(f"cluster {j} is empty or out of range")
    members = np.flatnonzero(state.assign == j).astype(np.int64)
    return float(update_theta_jd(
        rng, j, d, members, 0, members.size, data.y, data.Xr, state.theta,
        state.pi, state.tau, state.mu, state.lam,
    ))


def spike_probability(pi, mu, tau, lam, xs, residuals):
    """Posterior probability that a coefficient sits on its spike.

    ``residuals`` exclude the coefficient; prior slab is N(mu, 1/tau).
    """
    from .randist import normal_coeff_conditional

    if pi >= 1:
        return 1.0
    if pi <= 0:
        return 0.0
    pm, pp = normal_coeff_conditional(mu, tau, lam, xs, residuals)
    lbf = slab_log_bf(mu, tau, pm, pp)
    return 1.0 / (1.0 + (1 - pi) / pi * math.exp(lbf))


# --------------------------------------------------------------------------
# hyperparameters
# --------------------------------------------------------------------------


@njit
def _safe_log(x):
    if x <= 0.0:
        return -np.inf
    return math.log(x)


@njit
def update_hypers_kernel(rng, y, Xr, assign, sizes, theta, k, pi, omega, pi_dirac, tau, mu,
                         scal, hp, update_alpha):
    P = Xr.shape[1]
    n = y.size
    a_pi = hp[H_A_PI]
    b_pi = hp[H_B_PI]
    dirac_at = hp[H_DIRAC_AT]
    for d in range(P):
        m1 = 0
        ss = 0.0
        for j in range(k):
            if theta[j, d] != 0.0:
                m1 += 1
                e = theta[j, d] - mu[d]
                ss += e * e
        m0 = k - m1
        if dirac_at == 0.0:
            dirac_ok = m0 == 0
        else:
            dirac_ok = m1 == 0
        lw_dirac = _safe_log(1.0 - omega[d]) if dirac_ok else -np.inf
        lw_beta = _safe_log(omega[d]) + log_beta_fn(a_pi + m0, b_pi + m1) - log_beta_fn(a_pi, b_pi)
        if lw_dirac == -np.inf:
            take_dirac = False
        elif lw_beta == -np.inf:
            take_dirac = True
        else:
            mx = max(lw_dirac, lw_beta)
            pd = math.exp(lw_dirac - mx)
            pb = math.exp(lw_beta - mx)
            take_dirac = rng.random() * (pd + pb) < pd
        if take_dirac:
            pi_dirac[d] = 1
            pi[d] = dirac_at
        else:
            pi_dirac[d] = 0
            pi[d] = rng.beta(a_pi + m0, b_pi + m1)
        omega[d] = rng.beta(hp[H_A_OM] + 1.0 - pi_dirac[d], hp[H_B_OM] + pi_dirac[d])
        tau[d] = gamma_rate(rng, hp[H_A_TAU] + 0.5 * m1, hp[H_B_TAU] + 0.5 * ss)
    ssr = 0.0
    for i in range(n):
        j = assign[i]
        r = y[i]
        for p in range(P):
            r -= Xr[i, p] * theta[j, p]
        ssr += r * r
    scal[0] = gamma_rate(rng, hp[H_A_LAM] + 0.5 * n, hp[H_B_LAM] + 0.5 * ssr)
    if update_alpha:
        scal[1] = alpha_kernel(rng, scal[1], k, n, hp[H_A_ALPHA], hp[H_B_ALPHA])


def update_hypers(rng, state: RpmsState, data: RpmsData, hyper: HyperConfig):
    """Refresh zeta, pi, omega, tau, lambda and alpha given the clusters."""
    if state.use_cov and state.k:
        # zeta given members; coefficients untouched
        order, start = member_index(state.assign, state.k)
        _update_zeta_only(rng, data.Xc, data.ctype, data.cmean, data.cprec, order, start,
                          state.zeta, state.k, hyper.a_zeta, hyper.b_zeta)
    update_hypers_kernel(
        rng, data.y, data.Xr, state.assign, state.sizes, state.theta, state.k, state.pi,
        state.omega, state.pi_dirac, state.tau, state.mu, state.scal, hyper_vector(hyper), True,
    )
    return state


@njit
def _update_zeta_only(rng, Xc, ctype, cmean, cprec, order, start, zeta, k, a_z, b_z):
    for j in range(k):
        lo = start[j]
        hi = start[j + 1]
        nj = hi - lo
        for d in range(Xc.shape[1]):
            s = 0.0
            for t in range(lo, hi):
                s += Xc[order[t], d]
            if ctype[d] == 0:
                zeta[j, d] = rng.beta(a_z + s, b_z + nj - s)
            else:
                pp = cprec[d] * (1.0 + nj)
                pm = (cprec[d] * cmean[d] + cprec[d] * s) / pp
                zeta[j, d] = normal_prec(rng, pm, pp)


# --------------------------------------------------------------------------
# full sweep, prior simulation, data regeneration
# --------------------------------------------------------------------------


@njit
def sweep_kernel(rng, y, Xr, Xc, ctype, cmean, cprec, assign, sizes, theta, zeta, k,
                 pi, omega, pi_dirac, tau, mu, scal, hp, use_cov, m_aux, fixed_partition):
    if not fixed_partition:
        k = realloc_all(rng, y, Xr, Xc, ctype, cmean, cprec, assign, sizes, theta, zeta, k,
                        pi, tau, mu, scal[0], scal[1], hp[H_A_ZETA], hp[H_B_ZETA], use_cov, m_aux)
    update_clusters(rng, y, Xr, Xc, ctype, cmean, cprec, assign, theta, zeta, k,
                    pi, tau, mu, scal[0], hp[H_A_ZETA], hp[H_B_ZETA], use_cov)
    update_hypers_kernel(rng, y, Xr, assign, sizes, theta, k, pi, omega, pi_dirac, tau, mu,
                         scal, hp, not fixed_partition)
    return k


@njit
def prior_kernel(rng, y, Xr, Xc, ctype, cmean, cprec, assign, sizes, theta, zeta,
                 pi, omega, pi_dirac, tau, mu, scal, hp, use_cov, offset):
    """Draw every unknown (and the data) from the joint prior; returns k."""
    P = Xr.shape[1]
    n = y.size
    dirac_at = hp[H_DIRAC_AT]
    for d in range(P):
        omega[d] = rng.beta(hp[H_A_OM], hp[H_B_OM])
        if rng.random() < omega[d]:
            pi_dirac[d] = 0
            pi[d] = rng.beta(hp[H_A_PI], hp[H_B_PI])
        else:
            pi_dirac[d] = 1
            pi[d] = dirac_at
        tau[d] = gamma_rate(rng, hp[H_A_TAU], hp[H_B_TAU])
    scal[0] = gamma_rate(rng, hp[H_A_LAM], hp[H_B_LAM])
    scal[1] = gamma_rate(rng, hp[H_A_ALPHA], hp[H_B_ALPHA])
    k = crp_draw(rng, n, scal[1], assign)
    sizes[:] = 0
    for i in range(n):
        sizes[assign[i]] += 1
    for j in range(k):
        _draw_g0(rng, j, theta, zeta, pi, tau, mu, ctype, cmean, cprec,
                 hp[H_A_ZETA], hp[H_B_ZETA], use_cov)
    simulate_data_kernel(rng, y, Xr, Xc, ctype, cprec, assign, theta, zeta, scal[0], use_cov, offset)
    return k


@njit
def simulate_data_kernel(rng, y, Xr, Xc, ctype, cprec, assign, theta, zeta, lam, use_cov, offset):
    """Regenerate y (and X when the covariates are modelled) given parameters."""
    n = y.size
    for i in range(n):
        j = assign[i]
        if use_cov:
            for d in range(Xc.shape[1]):
                if ctype[d] == 0:
                    Xc[i, d] = 1.0 if rng.random() < zeta[j, d] else 0.0
                else:
                    Xc[i, d] = normal_prec(rng, zeta[j, d], cprec[d])
                Xr[i, d + offset] = Xc[i, d]
        mu_i = 0.0
        for p in range(Xr.shape[1]):
            mu_i += Xr[i, p] * theta[j, p]
        y[i] = normal_prec(rng, mu_i, lam)


class RpmsSampler:
    """Gibbs sampler for RPMS (``mode="rpms"``) or SSM (``mode="ssm"``).

    Parameters
    ----------
    dataset : Dataset
    hyper : HyperConfig
    mode : {"rpms", "ssm"}
    intercept : bool
        Prepend a column of ones to the regression design.
    fixed_partition : Partition, optional
        Hold the allocation fixed (used for cluster-specific inclusion).
    """

    def __init__(self, dataset: Dataset, hyper: HyperConfig = None, mode="rpms",
                 intercept=False, fixed_partition=None):
        self.hyper = hyper or HyperConfig()
        self.mode = mode
        self.data = RpmsData.from_dataset(dataset, intercept)
        self.state = initial_state(self.data, self.hyper, mode)
        self.hp = hyper_vector(self.hyper)
        self.fixed = fixed_partition is not None
        if self.fixed:
            p = fixed_partition
            if p.n != self.data.n:
                raise ValueError("fixed partition size does not match data")
            self.state.assign[:] = p.assign
            self.state.sizes[:] = 0
            self.state.sizes[: p.k] = p.sizes
            self.state.k = p.k
        self.column_names = (["(intercept)"] if intercept else []) + list(dataset.column_names)

    @property
    def model(self):
        return self.mode

    def sweep(self, rng):
        s, d = self.state, self.data
        s.k = int(sweep_kernel(
            rng, d.y, d.Xr, d.Xc, d.ctype, d.cmean, d.cprec, s.assign, s.sizes, s.theta,
            s.zeta, s.k, s.pi, s.omega, s.pi_dirac, s.tau, s.mu, s.scal, self.hp,
            s.use_cov, self.hyper.m_aux, self.fixed,
        ))

    def draw_prior(self, rng):
        """Replace state and data by a draw from the joint prior (Geweke)."""
        s, d = self.state, self.data
        s.k = int(prior_kernel(
            rng, d.y, d.Xr, d.Xc, d.ctype, d.cmean, d.cprec, s.assign, s.sizes, s.theta,
            s.zeta, s.pi, s.omega, s.pi_dirac, s.tau, s.mu, s.scal, self.hp, s.use_cov,
            1 if d.intercept else 0,
        ))

    def resample_data(self, rng):
        s, d = self.state, self.data
        simulate_data_kernel(rng, d.y, d.Xr, d.Xc, d.ctype, d.cprec, s.assign, s.theta, s.zeta,
                             s.lam, s.use_cov, 1 if d.intercept else 0)

    # ------------------------------------------------------------ archive

    def archive_fields(self):
        f = {"iter": "int", "k": "int", "alpha": "float", "lambda": "float", "assign": "ivec",
             "theta": "fmat"}
        if self.state.use_cov:
            f["zeta"] = "fmat"
        f.update({"pi": "fvec", "omega": "fvec", "tau": "fvec"})
        widths = {"theta": self.data.Xr.shape[1], "zeta": self.data.Xc.shape[1]}
        return f, widths

    def archive_meta(self):
        d = self.data
        return {
            "mode": self.mode,
            "intercept": bool(d.intercept),
            "column_names": self.column_names,
            "ctype": d.ctype.tolist(),
            "cmean": d.cmean.tolist(),
            "cprec": d.cprec.tolist(),
            "mu": self.state.mu.tolist(),
            "a_zeta": self.hyper.a_zeta,
            "b_zeta": self.hyper.b_zeta,
            "fixed_partition": self.fixed,
        }

    def record(self, it):
        s = self.state
        rec = {
            "iter": it,
            "k": s.k,
            "alpha": s.alpha,
            "lambda": s.lam,
            "assign": s.assign.copy(),
            "theta": s.theta[: s.k].copy(),
            "pi": s.pi.copy(),
            "omega": s.omega.copy(),
            "tau": s.tau.copy(),
        }
        if s.use_cov:
            rec["zeta"] = s.zeta[: s.k].copy()
        return rec

    def functionals(self):
        """Scalar summaries monitored by the joint-distribution test."""
        s = self.state
        n = s.assign.size
        th = s.theta[s.assign]
        return {
            "k": float(s.k),
            "lambda": s.lam,
            "alpha": s.alpha,
            "mean_theta": float(th.mean()) if n else 0.0,
            "mean_inclusion": float((th != 0).mean()) if n else 0.0,
            "mean_pi": float(s.pi.mean()),
        }


# --------------------------------------------------------------------------
# prediction
# --------------------------------------------------------------------------


def _cov_prob(xt, zeta, ctype, cprec):
    return math.exp(_cov_ll_row(xt, zeta, ctype, cprec))


def predictive_weights(rec, xt, meta, mode=None):
    """Normalized weights of the existing clusters for profile ``xt`` (alpha term excluded)."""
    mode = mode or meta["mode"]
    sizes = np.bincount(rec["assign"], minlength=rec["k"]).astype(float)
    if mode == "ssm":
        w = sizes
    else:
        ctype = np.asarray(meta["ctype"], dtype=np.int64)
        cprec = np.asarray(meta["cprec"], dtype=float)
        w = np.array([sizes[j] * _cov_prob(xt, rec["zeta"][j], ctype, cprec) for j in range(rec["k"])])
    return w / w.sum()


def predictive_density(draws, xt, grid, mode=None, rng=None, n_fresh=10, return_mean=False):
    """Posterior predictive density of y at covariate profile ``xt``.

    Averages, over retained draws, the mixture of cluster regressions with
    weights ``n_j p(xt | zeta_j)`` (RPMS) or ``n_j`` (SSM), plus the
    concentration term estimated from ``n_fresh`` base-measure draws.

    Returns
    -------
    density : ndarray, same shape as ``grid``
    mean : float
        Only when ``return_mean``; the predictive mean, averaged the same way.
    """
    draws.require_nonempty()
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    meta = draws.meta
    mode = mode or meta["mode"]
    xt = np.asarray(xt, dtype=float)
    xr = np.concatenate(([1.0], xt)) if meta.get("intercept") else xt
    ctype = np.asarray(meta["ctype"], dtype=np.int64)
    cmean = np.asarray(meta["cmean"], dtype=float)
    cprec = np.asarray(meta["cprec"], dtype=float)
    mu = np.asarray(meta["mu"], dtype=float)
    if rng is None:
        from .randist import make_rng

        rng = make_rng(0, 0)
    dens = np.zeros_like(grid)
    mean_acc = 0.0
    for rec in draws.records:
        k = rec["k"]
        lam = rec["lambda"]
        alpha = rec["alpha"]
        sizes = np.bincount(rec["assign"], minlength=k).astype(float)
        theta = rec["theta"]
        if mode == "ssm":
            w = sizes.copy()
        else:
            w = np.array([sizes[j] * _cov_prob(xt, rec["zeta"][j], ctype, cprec) for j in range(k)])
        means = theta @ xr
        # concentration term from fresh base-measure draws
        pi, tau = rec["pi"], rec["tau"]
        spike = rng.random((n_fresh, xr.size)) < pi
        th_new = np.where(spike, 0.0, mu + rng.standard_normal((n_fresh, xr.size)) / np.sqrt(tau))
        if mode == "ssm":
            w_new = np.full(n_fresh, alpha / n_fresh)
        else:
            z_new = np.empty((n_fresh, xt.size))
            for d in range(xt.size):
                if ctype[d] == 0:
                    z_new[:, d] = rng.beta(meta["a_zeta"], meta["b_zeta"], n_fresh)
                else:
                    z_new[:, d] = cmean[d] + rng.standard_normal(n_fresh) / math.sqrt(cprec[d])
            w_new = np.array([alpha / n_fresh * _cov_prob(xt, z_new[m], ctype, cprec) for m in range(n_fresh)])
        all_w = np.concatenate((w, w_new))
        all_m = np.concatenate((means, th_new @ xr))
        all_w /= all_w.sum()
        sd = 1.0 / math.sqrt(lam)
        dens += (all_w[:, None] * np.exp(-0.5 * ((grid[None, :] - all_m[:, None]) / sd) ** 2)).sum(0) / (
            sd * math.sqrt(2 * math.pi)
        )
        mean_acc += float(all_w @ all_m)
    dens /= len(draws)
    if return_mean:
        return dens, mean_acc / len(draws)
    return dens
