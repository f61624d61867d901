"""Profile regression with continuous variable-selection weights.

A DP mixture over (intercept, covariate profile).  Within cluster ``j`` the
covariate ``x_id`` has density ``pi_d p(x | zeta_jd) + (1 - pi_d) r_d(x)``
where ``r_d`` is the fixed empirical distribution of column ``d``; a weight
``pi_d`` near one means the column shapes the clustering.  Each covariate
cell carries a latent flag saying which of the two terms produced it, which
makes the ``zeta`` and ``pi`` updates conjugate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .config import HyperConfig
from .data import Dataset
from .dp_core import Partition, alpha_kernel, crp_draw, relabel_last_into
from .randist import gamma_rate, log_norm_pdf, normal_prec, sample_log_weights
from .rpms import ZETA_EPS, member_index

(H_TH_MEAN, H_TH_PREC, H_A_LAM, H_B_LAM, H_A_ALPHA, H_B_ALPHA,
 H_A_ZETA, H_B_ZETA, H_A_PI, H_B_PI) = range(10)


def hyper_vector(h: HyperConfig):
    return np.array(
        [h.pr_theta_mean, h.pr_theta_prec, h.a_lambda, h.b_lambda, h.a_alpha, h.b_alpha,
         h.a_zeta, h.b_zeta, h.pr_a_pi, h.pr_b_pi],
        dtype=float,
    )


@dataclass
class PrCluster:
    theta: float
    zeta: np.ndarray


@dataclass
class EmpiricalTables:
    """Fixed per-column reference densities ``r_d``.

    Binary columns use the observed frequency of ones; continuous columns use
    a Normal at the observed mean and variance.
    """

    ctype: np.ndarray
    freq: np.ndarray
    mean: np.ndarray
    prec: np.ndarray

    @classmethod
    def from_dataset(cls, ds: Dataset):
        mean, prec, freq = ds.column_stats()
        t = cls(ds.type_codes(), freq.copy(), mean.copy(), prec.copy())
        for a in (t.ctype, t.freq, t.mean, t.prec):
            a.setflags(write=False)
        return t

    def density(self, d, x):
        return math.exp(_log_r(x, d, self.ctype, self.freq, self.mean, self.prec))


@dataclass
class PrState:
    assign: np.ndarray
    sizes: np.ndarray
    theta: np.ndarray  # capacity-length intercepts
    zeta: np.ndarray  # capacity x D
    k: int
    pi: np.ndarray
    member: np.ndarray  # n x D latent flags, 1 = cluster term
    scal: np.ndarray  # [lambda, alpha]

    @property
    def lam(self):
        return float(self.scal[0])

    @property
    def alpha(self):
        return float(self.scal[1])

    @property
    def partition(self):
        return Partition(self.assign.copy())

    @property
    def clusters(self):
        return [PrCluster(float(self.theta[j]), self.zeta[j].copy()) for j in range(self.k)]


def vs_covariate_density(x, zeta, pi, r):
    """Two-term covariate density for one binary cell.

    ``r`` is the empirical probability of the observed value ``x``.
    """
    if not 0.0 <= pi <= 1.0:
        raise ValueError("pi must lie in [0, 1]")
    p = zeta if x == 1 else 1.0 - zeta
    return pi * p + (1.0 - pi) * r


@njit
def _log_r(x, d, ctype, freq, mean, prec):
    if ctype[d] == 0:
        f = freq[d] if x > 0.5 else 1.0 - freq[d]
        return math.log(min(max(f, ZETA_EPS), 1.0))
    return log_norm_pdf(x, mean[d], prec[d])


@njit
def _log_model(x, z, d, ctype, prec):
    if ctype[d] == 0:
        z = min(max(z, ZETA_EPS), 1.0 - ZETA_EPS)
        return math.log(z) if x > 0.5 else math.log(1.0 - z)
    return log_norm_pdf(x, z, prec[d])


@njit
def _log_mix(a, b, pi):
    # log(pi e^a + (1 - pi) e^b) without underflow
    if pi >= 1.0:
        return a
    if pi <= 0.0:
        return b
    la = math.log(pi) + a
    lb = math.log1p(-pi) + b
    m = max(la, lb)
    return m + math.log(math.exp(la - m) + math.exp(lb - m))


@njit
def _loglik(i, j, y, X, ctype, freq, mean, prec, theta, zeta, pi, lam):
    ll = log_norm_pdf(y[i], theta[j], lam)
    for d in range(X.shape[1]):
        x = X[i, d]
        ll += _log_mix(_log_model(x, zeta[j, d], d, ctype, prec), _log_r(x, d, ctype, freq, mean, prec), pi[d])
    return ll


@njit
def _draw_g0(rng, slot, theta, zeta, ctype, mean, prec, hp):
    theta[slot] = normal_prec(rng, hp[H_TH_MEAN], hp[H_TH_PREC])
    for d in range(zeta.shape[1]):
        if ctype[d] == 0:
            zeta[slot, d] = rng.beta(hp[H_A_ZETA], hp[H_B_ZETA])
        else:
            zeta[slot, d] = normal_prec(rng, mean[d], prec[d])


@njit
def _swap(theta, zeta, a, b):
    t = theta[a]
    theta[a] = theta[b]
    theta[b] = t
    for d in range(zeta.shape[1]):
        t = zeta[a, d]
        zeta[a, d] = zeta[b, d]
        zeta[b, d] = t


@njit
def realloc_one(rng, i, y, X, ctype, freq, mean, prec, assign, sizes, theta, zeta, k, pi, lam,
                alpha, hp, m_aux, logw):
    c = assign[i]
    sizes[c] -= 1
    fresh_from = 0
    if sizes[c] == 0:
        last = k - 1
        assign[i] = -1
        if c != last:
            _swap(theta, zeta, c, last)
            sizes[c] = sizes[last]
            sizes[last] = 0
            relabel_last_into(assign, c, last)
        k -= 1
        fresh_from = 1
    for a in range(fresh_from, m_aux):
        _draw_g0(rng, k + a, theta, zeta, ctype, mean, prec, hp)
    for j in range(k):
        logw[j] = math.log(sizes[j]) + _loglik(i, j, y, X, ctype, freq, mean, prec, theta, zeta, pi, lam)
    la = math.log(alpha / m_aux)
    for a in range(m_aux):
        logw[k + a] = la + _loglik(i, k + a, y, X, ctype, freq, mean, prec, theta, zeta, pi, lam)
    idx = sample_log_weights(rng, logw, k + m_aux)
    if idx >= k:
        if idx != k:
            theta[k] = theta[idx]
            for d in range(zeta.shape[1]):
                zeta[k, d] = zeta[idx, d]
        sizes[k] = 1
        assign[i] = k
        k += 1
    else:
        sizes[idx] += 1
        assign[i] = idx
    return k


@njit
def membership_kernel(rng, X, ctype, freq, mean, prec, assign, zeta, pi, member):
    for i in range(X.shape[0]):
        j = assign[i]
        for d in range(X.shape[1]):
            x = X[i, d]
            if pi[d] >= 1.0:
                member[i, d] = 1
            elif pi[d] <= 0.0:
                member[i, d] = 0
            else:
                la = math.log(pi[d]) + _log_model(x, zeta[j, d], d, ctype, prec)
                lb = math.log1p(-pi[d]) + _log_r(x, d, ctype, freq, mean, prec)
                m = max(la, lb)
                p1 = math.exp(la - m) / (math.exp(la - m) + math.exp(lb - m))
                member[i, d] = 1 if rng.random() < p1 else 0


@njit
def cluster_kernel(rng, y, X, ctype, mean, prec, assign, theta, zeta, k, member, lam, hp):
    order, start = member_index(assign, k)
    for j in range(k):
        lo = start[j]
        hi = start[j + 1]
        s = 0.0
        for t in range(lo, hi):
            s += y[order[t]]
        pp = hp[H_TH_PREC] + lam * (hi - lo)
        pm = (hp[H_TH_PREC] * hp[H_TH_MEAN] + lam * s) / pp
        theta[j] = normal_prec(rng, pm, pp)
        for d in range(X.shape[1]):
            m = 0
            sx = 0.0
            for t in range(lo, hi):
                i = order[t]
                if member[i, d] == 1:
                    m += 1
                    sx += X[i, d]
            if ctype[d] == 0:
                zeta[j, d] = rng.beta(hp[H_A_ZETA] + sx, hp[H_B_ZETA] + m - sx)
            else:
                q = prec[d] * (1.0 + m)
                zeta[j, d] = normal_prec(rng, (prec[d] * mean[d] + prec[d] * sx) / q, q)


@njit
def pi_kernel(rng, member, pi, a, b, fixed_pi):
    if fixed_pi:
        return
    n = member.shape[0]
    for d in range(member.shape[1]):
        s = 0
        for i in range(n):
            s += member[i, d]
        pi[d] = rng.beta(a + s, b + n - s)


@njit
def scalar_kernel(rng, y, assign, theta, k, scal, hp, update_alpha):
    n = y.size
    ssr = 0.0
    for i in range(n):
        r = y[i] - theta[assign[i]]
        ssr += r * r
    scal[0] = gamma_rate(rng, hp[H_A_LAM] + 0.5 * n, hp[H_B_LAM] + 0.5 * ssr)
    if update_alpha:
        scal[1] = alpha_kernel(rng, scal[1], k, n, hp[H_A_ALPHA], hp[H_B_ALPHA])


@njit
def sweep_kernel(rng, y, X, ctype, freq, mean, prec, assign, sizes, theta, zeta, k, pi, member,
                 scal, hp, m_aux, fixed_pi):
    logw = np.empty(y.size + m_aux + 1)
    for i in range(y.size):
        k = realloc_one(rng, i, y, X, ctype, freq, mean, prec, assign, sizes, theta, zeta, k, pi,
                        scal[0], scal[1], hp, m_aux, logw)
    membership_kernel(rng, X, ctype, freq, mean, prec, assign, zeta, pi, member)
    cluster_kernel(rng, y, X, ctype, mean, prec, assign, theta, zeta, k, member, scal[0], hp)
    pi_kernel(rng, member, pi, hp[H_A_PI], hp[H_B_PI], fixed_pi)
    scalar_kernel(rng, y, assign, theta, k, scal, hp, True)
    return k


@njit
def prior_kernel(rng, y, X, ctype, freq, mean, prec, assign, sizes, theta, zeta, pi, member,
                 scal, hp, fixed_pi):
    n = y.size
    if not fixed_pi:
        for d in range(pi.size):
            pi[d] = rng.beta(hp[H_A_PI], hp[H_B_PI])
    scal[0] = gamma_rate(rng, hp[H_A_LAM], hp[H_B_LAM])
    scal[1] = gamma_rate(rng, hp[H_A_ALPHA], hp[H_B_ALPHA])
    k = crp_draw(rng, n, scal[1], assign)
    sizes[:] = 0
    for i in range(n):
        sizes[assign[i]] += 1
    for j in range(k):
        _draw_g0(rng, j, theta, zeta, ctype, mean, prec, hp)
    simulate_data_kernel(rng, y, X, ctype, freq, mean, prec, assign, theta, zeta, pi, member, scal[0])
    return k


@njit
def simulate_data_kernel(rng, y, X, ctype, freq, mean, prec, assign, theta, zeta, pi, member, lam):
    """Regenerate y, the membership flags and X given the cluster parameters."""
    for i in range(y.size):
        j = assign[i]
        y[i] = normal_prec(rng, theta[j], lam)
        for d in range(X.shape[1]):
            own = rng.random() < pi[d]
            member[i, d] = 1 if own else 0
            if ctype[d] == 0:
                p = zeta[j, d] if own else freq[d]
                X[i, d] = 1.0 if rng.random() < p else 0.0
            elif own:
                X[i, d] = normal_prec(rng, zeta[j, d], prec[d])
            else:
                X[i, d] = normal_prec(rng, mean[d], prec[d])


class PrSampler:
    """Gibbs sampler for profile regression with an intercept-only Normal response.

    Parameters
    ----------
    dataset : Dataset
    hyper : HyperConfig
        Uses ``pr_theta_mean``, ``pr_theta_prec``, ``pr_a_pi``, ``pr_b_pi``,
        ``a_zeta``, ``b_zeta``, ``a_lambda``, ``b_lambda``, ``a_alpha``,
        ``b_alpha`` and ``m_aux``.
    fixed_pi : array_like, optional
        Hold the selection weights at these values.
    """

    model = "pr"

    def __init__(self, dataset: Dataset, hyper: HyperConfig = None, fixed_pi=None):
        self.hyper = hyper or HyperConfig()
        self.y = dataset.y.copy()
        self.X = np.ascontiguousarray(dataset.X.astype(float))
        self.tables = EmpiricalTables.from_dataset(dataset)
        self.hp = hyper_vector(self.hyper)
        self.column_names = list(dataset.column_names)
        n, D = self.X.shape
        cap = n + self.hyper.m_aux + 1
        zeta = np.full((cap, D), 0.5)
        cont = self.tables.ctype == 1
        zeta[:, cont] = self.tables.mean[cont]
        sizes = np.zeros(cap, dtype=np.int64)
        sizes[0] = n
        self.fixed_pi = fixed_pi is not None
        pi = np.full(D, 0.5) if fixed_pi is None else np.asarray(fixed_pi, dtype=float).copy()
        if pi.shape != (D,) or np.any((pi < 0) | (pi > 1)):
            raise ValueError("fixed_pi must be a length-D vector in [0, 1]")
        self.state = PrState(
            assign=np.zeros(n, dtype=np.int64),
            sizes=sizes,
            theta=np.zeros(cap),
            zeta=zeta,
            k=1 if n else 0,
            pi=pi,
            member=np.ones((n, D), dtype=np.int64),
            scal=np.array([1.0, 1.0]),
        )

    def _tab(self):
        t = self.tables
        return t.ctype, t.freq, t.mean, t.prec

    def sweep(self, rng):
        s = self.state
        s.k = int(sweep_kernel(rng, self.y, self.X, *self._tab(), s.assign, s.sizes, s.theta, s.zeta,
                               s.k, s.pi, s.member, s.scal, self.hp, self.hyper.m_aux, self.fixed_pi))

    def draw_prior(self, rng):
        s = self.state
        s.k = int(prior_kernel(rng, self.y, self.X, *self._tab(), s.assign, s.sizes, s.theta, s.zeta,
                               s.pi, s.member, s.scal, self.hp, self.fixed_pi))

    def resample_data(self, rng):
        s = self.state
        simulate_data_kernel(rng, self.y, self.X, *self._tab(), s.assign, s.theta, s.zeta, s.pi,
                             s.member, s.lam)

    def pi_update(self, rng):
        s = self.state
        pi_kernel(rng, s.member, s.pi, self.hyper.pr_a_pi, self.hyper.pr_b_pi, False)
        return s.pi

    def allocation_probabilities(self, i):
        """Exact reallocation probabilities over existing clusters for observation ``i``.

        Auxiliary components are left out, so this is the alpha -> 0 limit;
        used as an enumeration oracle.
        """
        s = self.state
        sizes = np.bincount(np.delete(s.assign, i), minlength=s.k)
        keep = [j for j in range(s.k) if sizes[j] > 0]
        lw = np.array([
            math.log(sizes[j]) + _loglik(i, j, self.y, self.X, *self._tab(), s.theta, s.zeta, s.pi, s.lam)
            for j in keep
        ])
        w = np.exp(lw - lw.max())
        return keep, w / w.sum()

    # ------------------------------------------------------------ archive

    def archive_fields(self):
        f = {"iter": "int", "k": "int", "alpha": "float", "lambda": "float", "assign": "ivec",
             "theta": "fvec", "zeta": "fmat", "pi": "fvec"}
        return f, {"zeta": self.X.shape[1]}

    def archive_meta(self):
        t = self.tables
        return {"column_names": self.column_names, "ctype": t.ctype.tolist(), "freq": t.freq.tolist(),
                "cmean": t.mean.tolist(), "cprec": t.prec.tolist(), "a_zeta": self.hyper.a_zeta,
                "b_zeta": self.hyper.b_zeta, "theta_mean": self.hyper.pr_theta_mean,
                "theta_prec": self.hyper.pr_theta_prec}

    def record(self, it):
        s = self.state
        return {"iter": it, "k": s.k, "alpha": s.alpha, "lambda": s.lam, "assign": s.assign.copy(),
                "theta": s.theta[: s.k].copy(), "zeta": s.zeta[: s.k].copy(), "pi": s.pi.copy()}

    def functionals(self):
        s = self.state
        return {
            "k": float(s.k),
            "lambda": s.lam,
            "alpha": s.alpha,
            "mean_theta": float(s.theta[s.assign].mean()),
            "mean_inclusion": float(s.member.mean()),
            "mean_pi": float(s.pi.mean()),
        }


def _cluster_logcov(xt, zeta, pi, ctype, freq, mean, prec):
    out = 0.0
    for d in range(xt.size):
        out += _log_mix(_log_model(xt[d], zeta[d], d, ctype, prec), _log_r(xt[d], d, ctype, freq, mean, prec), pi[d])
    return out


def predictive_density(draws, xt, grid, rng=None, n_fresh=10, return_mean=False):
    """Posterior predictive density of y at covariate profile ``xt``.

    Cluster weights are ``n_j`` times the two-term covariate density of
    ``xt``, plus ``alpha`` spread over ``n_fresh`` base-measure draws.
    """
    draws.require_nonempty()
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    meta = draws.meta
    xt = np.asarray(xt, dtype=float)
    ctype = np.asarray(meta["ctype"], dtype=np.int64)
    freq, mean, prec = (np.asarray(meta[k], dtype=float) for k in ("freq", "cmean", "cprec"))
    if rng is None:
        from .randist import make_rng

        rng = make_rng(0, 0)
    dens = np.zeros_like(grid)
    mean_acc = 0.0
    for rec in draws.records:
        k = rec["k"]
        pi = rec["pi"]
        sizes = np.bincount(rec["assign"], minlength=k).astype(float)
        lw = [math.log(sizes[j]) + _cluster_logcov(xt, rec["zeta"][j], pi, ctype, freq, mean, prec) for j in range(k)]
        th_new = meta["theta_mean"] + rng.standard_normal(n_fresh) / math.sqrt(meta["theta_prec"])
        for m in range(n_fresh):
            z = np.empty(xt.size)
            for d in range(xt.size):
                if ctype[d] == 0:
                    z[d] = rng.beta(meta["a_zeta"], meta["b_zeta"])
                else:
                    z[d] = mean[d] + rng.standard_normal() / math.sqrt(prec[d])
            lw.append(math.log(rec["alpha"] / n_fresh) + _cluster_logcov(xt, z, pi, ctype, freq, mean, prec))
        lw = np.array(lw)
        w = np.exp(lw - lw.max())
        w /= w.sum()
        means = np.concatenate((np.asarray(rec["theta"], dtype=float), th_new))
        sd = 1.0 / math.sqrt(rec["lambda"])
        dens += (w[:, None] * np.exp(-0.5 * ((grid[None, :] - means[:, None]) / sd) ** 2)).sum(0) / (
            sd * math.sqrt(2 * math.pi)
        )
        mean_acc += float(w @ means)
    dens /= len(draws)
    if return_mean:
        return dens, mean_acc / len(draws)
    return dens


def median_pi(draws):
    """Posterior median of every selection weight ``pi_d``."""
    draws.require_nonempty()
    return np.median(np.array([r["pi"] for r in draws.records]), axis=0)
