"""Seedable draws and conjugate-update kernels shared by every sampler.

Every kernel takes a ``numpy.random.Generator``.  Under numba the same
generator object is passed straight into compiled code, so the jitted and the
plain path consume one stream identically.  Densities are kept in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit

LOG_2PI = math.log(2.0 * math.pi)
SQRT2 = math.sqrt(2.0)

# above this standardized truncation point the exponential-rejection sampler
# is used; below it the inverse CDF is accurate and cheap
_TAIL_SWITCH = 3.0

POSITIVE = 1
NEGATIVE = -1


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for logical stream ``stream`` of ``seed``.

    Streams are derived through ``SeedSequence`` spawn keys, so distinct
    stream ids give statistically independent sequences and identical
    ``(seed, stream)`` pairs give identical ones.
    """
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class BetaParams:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"Beta parameters must be positive, got ({self.a}, {self.b})")

    @property
    def mean(self):
        return self.a / (self.a + self.b)


@dataclass(frozen=True)
class GammaParams:
    """Gamma distribution in shape/rate form."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError(
                f"Gamma parameters must be positive, got ({self.shape}, {self.rate})"
            )

    @property
    def mean(self):
        return self.shape / self.rate


# --------------------------------------------------------------------------
# conjugate updates (Python surface)
# --------------------------------------------------------------------------


def beta_bernoulli_update(prior: BetaParams, data) -> BetaParams:
    x = np.asarray(data, dtype=float).ravel()
    if x.size and not np.all((x == 0) | (x == 1)):
        raise ValueError("Beta-Bernoulli data must be 0/1")
    s = float(x.sum())
    return BetaParams(prior.a + s, prior.b + x.size - s)


def normal_coeff_conditional(prior_mean, prior_prec, noise_prec, xs, residuals):
    """Full conditional of one regression coefficient.

    ``residuals`` must already exclude the coefficient's own contribution.

    Returns
    -------
    (mean, prec) : tuple of float
    """
    xs = np.asarray(xs, dtype=float)
    r = np.asarray(residuals, dtype=float)
    if xs.shape != r.shape:
        raise ValueError("xs and residuals must have equal length")
    return coeff_posterior(prior_mean, prior_prec, noise_prec, float(xs @ xs), float(xs @ r))


def gamma_precision_update(prior: GammaParams, n, sum_sq) -> GammaParams:
    if sum_sq < 0:
        raise ValueError("sum_sq must be non-negative")
    return GammaParams(prior.shape + 0.5 * n, prior.rate + 0.5 * sum_sq)


def truncated_normal_draw(rng, mean, sd, side="positive"):
    """One draw from N(mean, sd^2) restricted to one side of zero."""
    if not sd > 0:
        raise ValueError("sd must be positive")
    if side in ("positive", POSITIVE, "+"):
        return trunc_norm(rng, float(mean), float(sd), True)
    if side in ("negative", NEGATIVE, "-"):
        return trunc_norm(rng, float(mean), float(sd), False)
    raise ValueError(f"unknown side {side!r}")


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------


@njit
def coeff_posterior(prior_mean, prior_prec, noise_prec, sxx, sxr):
    prec = prior_prec + noise_prec * sxx
    mean = (prior_prec * prior_mean + noise_prec * sxr) / prec
    return mean, prec


@njit
def slab_log_bf(prior_mean, prior_prec, post_mean, post_prec):
    """log[slab marginal / spike marginal] for one Gaussian coefficient."""
    return 0.5 * (math.log(prior_prec) - math.log(post_prec)) + 0.5 * (
        post_prec * post_mean * post_mean - prior_prec * prior_mean * prior_mean
    )


@njit
def log_norm_pdf(y, mean, prec):
    d = y - mean
    return 0.5 * (math.log(prec) - LOG_2PI) - 0.5 * prec * d * d


@njit
def log_beta_fn(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


@njit
def log_ndtr(x):
    """log of the standard normal CDF, accurate far into both tails."""
    if x > 6.0:
        return math.log1p(-0.5 * math.erfc(x / SQRT2))
    if x > -20.0:
        return math.log(0.5 * math.erfc(-x / SQRT2))
    # asymptotic Mills-ratio series; relative error < 1e-10 at x = -20
    x2 = x * x
    s = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) + 105.0 / (x2 * x2 * x2 * x2)
    return -0.5 * x2 - math.log(-x) - 0.5 * LOG_2PI + math.log(s)


@njit
def norm_cdf(x):
    return 0.5 * math.erfc(-x / SQRT2)


@njit
def _upper_quantile(q):
    # x with P(Z > x) = q, q in (0, 0.5]; rational start then Newton on log scale
    t = math.sqrt(-2.0 * math.log(q))
    x = t - (2.515517 + 0.802853 * t + 0.010328 * t * t) / (
        1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t
    )
    lq = math.log(q)
    for _ in range(8):
        lsf = log_ndtr(-x)
        lpdf = -0.5 * x * x - 0.5 * LOG_2PI
        step = (lsf - lq) * math.exp(lsf - lpdf)
        x += step
        if abs(step) < 1e-15 * max(1.0, abs(x)):
            break
    return x


@njit
def ndtri(p):
    """Inverse standard normal CDF."""
    if p <= 0.0:
        return -np.inf
    if p >= 1.0:
        return np.inf
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -_upper_quantile(p)
    return _upper_quantile(1.0 - p)


@njit
def std_trunc_above(rng, a):
    """Draw Z ~ N(0,1) conditioned on Z > a."""
    if a < _TAIL_SWITCH:
        # inverse CDF on the upper tail: P(Z > z) = u * P(Z > a)
        lsf_a = log_ndtr(-a)
        while True:
            u = rng.random()
            if u <= 0.0:
                continue
            lq = math.log(u) + lsf_a
            q = math.exp(lq)
            if q < 0.5:
                z = _upper_quantile(q)
            else:
                z = -_upper_quantile(1.0 - q)
            if z > a:
                return z
    # exponential proposal with the optimal rate (Robert 1995)
    lam = 0.5 * (a + math.sqrt(a * a + 4.0))
    while True:
        z = a + rng.standard_exponential() / lam
        d = z - lam
        if rng.random() <= math.exp(-0.5 * d * d):
            return z


@njit
def trunc_norm(rng, mean, sd, positive):
    """N(mean, sd^2) restricted to (0, inf) if ``positive`` else (-inf, 0)."""
    while True:
        if positive:
            v = mean + sd * std_trunc_above(rng, -mean / sd)
            if v > 0.0:
                return v
        else:
            v = mean - sd * std_trunc_above(rng, mean / sd)
            if v < 0.0:
                return v


@njit
def gamma_rate(rng, shape, rate):
    return rng.gamma(shape, 1.0 / rate)


@njit
def normal_prec(rng, mean, prec):
    return mean + rng.standard_normal() / math.sqrt(prec)


@njit
def sample_log_weights(rng, logw, m):
    """Index in ``range(m)`` drawn with probability proportional to exp(logw)."""
    mx = -np.inf
    for j in range(m):
        if logw[j] > mx:
            mx = logw[j]
    tot = 0.0
    for j in range(m):
        tot += math.exp(logw[j] - mx)
    u = rng.random() * tot
    acc = 0.0
    for j in range(m):
        acc += math.exp(logw[j] - mx)
        if u < acc:
            return j
    # round-off guard: last index with nonzero weight
    for j in range(m - 1, -1, -1):
        if logw[j] > -np.inf:
            return j
    return m - 1


@njit
def bernoulli(rng, p):
    return 1 if rng.random() < p else 0


@njit
def bernoulli_logodds(rng, logodds):
    if logodds > 0.0:
        p = 1.0 / (1.0 + math.exp(-logodds))
    else:
        e = math.exp(logodds)
        p = e / (1.0 + e)
    return 1 if rng.random() < p else 0
