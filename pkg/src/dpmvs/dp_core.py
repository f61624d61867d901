"""Partition bookkeeping and DP / product-partition prior evaluation.

Cluster labels are 0-based and contiguous (``0..k-1``) everywhere in the
package; archive files shift them to ``1..k`` on disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._jit import njit
from .randist import GammaParams, gamma_rate

NEW = -1


@dataclass(frozen=True, eq=False)
class Partition:
    """A set partition of ``n`` observations stored as an allocation vector."""

    assign: np.ndarray
    sizes: np.ndarray = field(default=None)

    def __post_init__(self):
        a = np.asarray(self.assign, dtype=np.int64).copy()
        if a.ndim != 1:
            raise ValueError("assign must be 1-D")
        k = int(a.max()) + 1 if a.size else 0
        if a.size and a.min() < 0:
            raise ValueError("labels must be non-negative")
        sizes = np.bincount(a, minlength=k).astype(np.int64)
        if np.any(sizes == 0):
            raise ValueError("labels must be contiguous 0..k-1 with no empty cluster")
        if self.sizes is not None and not np.array_equal(np.asarray(self.sizes), sizes):
            raise ValueError("sizes inconsistent with assign")
        a.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "assign", a)
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def from_labels(cls, labels):
        """Build from arbitrary hashable labels, compacting in order of appearance."""
        lookup = {}
        out = [lookup.setdefault(lab, len(lookup)) for lab in labels]
        return cls(np.array(out, dtype=np.int64))

    @property
    def n(self):
        return self.assign.size

    @property
    def k(self):
        return self.sizes.size

    def canonical(self):
        """Labels renumbered by first appearance; equal for equal set partitions."""
        return Partition.from_labels(self.assign.tolist())

    def blocks(self):
        return [tuple(np.flatnonzero(self.assign == j)) for j in range(self.k)]

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.canonical().assign, other.canonical().assign)

    def __hash__(self):
        return hash(tuple(self.canonical().assign.tolist()))

    def __repr__(self):
        return f"Partition(assign={self.assign.tolist()}, k={self.k})"


@dataclass
class DpConcentration:
    alpha: float
    prior: GammaParams = field(default_factory=lambda: GammaParams(1.0, 1.0))

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


# --------------------------------------------------------------------------
# stick breaking, EPPF, urn
# --------------------------------------------------------------------------


def stick_break(sticks):
    """Stick-breaking weights and the leftover mass.

    Parameters
    ----------
    sticks : array_like
        Break proportions, each strictly inside (0, 1).

    Returns
    -------
    weights : ndarray
    leftover : float
        ``1 - weights.sum()``, computed as the product of the remainders.
    """
    phi = np.asarray(sticks, dtype=float).ravel()
    if np.any((phi <= 0) | (phi >= 1)):
        raise ValueError("stick proportions must lie in (0, 1)")
    remain = np.concatenate(([1.0], np.cumprod(1.0 - phi)))
    return phi * remain[:-1], float(remain[-1])


def log_rising_factorial(alpha, n):
    """log of alpha (alpha+1) ... (alpha+n-1)."""
    return math.lgamma(alpha + n) - math.lgamma(alpha)


def eppf_log_prob(p: Partition, alpha: float) -> float:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if p.n == 0:
        return 0.0
    sizes = p.sizes
    return (
        p.k * math.log(alpha)
        + float(sum(math.lgamma(s) for s in sizes))
        - log_rising_factorial(alpha, p.n)
    )


def crp_predictive(sizes, alpha):
    """Seating probabilities for one extra customer; last slot is a new table."""
    sizes = np.asarray(sizes, dtype=float).ravel()
    w = np.append(sizes, alpha)
    return w / (alpha + sizes.sum())


# --------------------------------------------------------------------------
# product partition prior with covariate similarity
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Similarity:
    """Marginal-likelihood similarity for one covariate column.

    ``kind="binary"`` integrates a Bernoulli rate against Beta(a, b).
    ``kind="continuous"`` integrates a Normal mean (prior mean ``m0``, prior
    precision ``p0``) with fixed observation precision ``noise_prec``.
    """

    kind: str = "binary"
    a: float = 1.0
    b: float = 1.0
    m0: float = 0.0
    p0: float = 1.0
    noise_prec: float = 1.0

    def log_marginal(self, xs) -> float:
        xs = np.asarray(xs, dtype=float)
        if self.kind == "binary":
            s = xs.sum()
            return (
                math.lgamma(self.a + s)
                + math.lgamma(self.b + xs.size - s)
                - math.lgamma(self.a + self.b + xs.size)
                + math.lgamma(self.a + self.b)
                - math.lgamma(self.a)
                - math.lgamma(self.b)
            )
        if self.kind == "continuous":
            m = xs.size
            if m == 0:
                return 0.0
            lam = self.noise_prec
            post_prec = self.p0 + m * lam
            post_mean = (self.p0 * self.m0 + lam * xs.sum()) / post_prec
            return (
                0.5 * m * (math.log(lam) - math.log(2 * math.pi))
                - 0.5 * lam * float(xs @ xs)
                + 0.5 * (math.log(self.p0) - math.log(post_prec))
                + 0.5 * (post_prec * post_mean**2 - self.p0 * self.m0**2)
            )
        raise ValueError(f"unknown similarity kind {self.kind!r}")


def ppmx_log_prior(p: Partition, X, gamma, alpha: float, similarity=None) -> float:
    """Unnormalized log prior of a partition under the PPMx with selection.

    Each cluster contributes its DP cohesion ``alpha (n_j - 1)!`` times the
    similarity of every column whose indicator ``gamma[j, d]`` is on.

    Parameters
    ----------
    p : Partition
    X : array_like, shape (n, D)
    gamma : array_like of {0, 1}, shape (k, D)
    alpha : float
    similarity : Similarity or sequence of Similarity, optional
        One spec per column; defaults to Beta(1, 1)-Bernoulli for every column.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    gamma = np.asarray(gamma)
    D = X.shape[1]
    if gamma.shape != (p.k, D):
        raise ValueError(f"gamma must have shape {(p.k, D)}, got {gamma.shape}")
    if X.shape[0] != p.n:
        raise ValueError("X rows must match partition size")
    if similarity is None:
        similarity = Similarity()
    if isinstance(similarity, Similarity):
        similarity = [similarity] * D
    out = 0.0
    for j in range(p.k):
        rows = p.assign == j
        out += math.log(alpha) + math.lgamma(p.sizes[j])
        for d in range(D):
            if gamma[j, d]:
                out += similarity[d].log_marginal(X[rows, d])
    return out


# --------------------------------------------------------------------------
# concentration update
# --------------------------------------------------------------------------


@njit
def alpha_kernel(rng, alpha, k, n, a, b):
    """Auxiliary-variable draw of the DP concentration (Escobar & West 1995)."""
    if n == 0:
        return gamma_rate(rng, a, b)
    eta = rng.beta(alpha + 1.0, float(n))
    rate = b - math.log(eta)
    odds = (a + k - 1.0) / (n * rate)
    if rng.random() < odds / (1.0 + odds):
        return gamma_rate(rng, a + k, rate)
    return gamma_rate(rng, a + k - 1.0, rate)


def sample_alpha(rng, p: Partition, conc: DpConcentration) -> float:
    """Draw alpha from its full conditional given the cluster count."""
    return float(alpha_kernel(rng, conc.alpha, p.k, p.n, conc.prior.shape, conc.prior.rate))


# --------------------------------------------------------------------------
# mutation
# --------------------------------------------------------------------------


def move_observation(p: Partition, i: int, target) -> Partition:
    """Move observation ``i`` to cluster ``target`` (or ``NEW``).

    A vacated cluster is removed and higher labels shift down by one.
    """
    if not 0 <= i < p.n:
        raise IndexError(f"observation index {i} out of range for n={p.n}")
    a = p.assign.copy()
    old = a[i]
    if target is None or target == NEW:
        a[i] = p.k
    else:
        if not 0 <= target < p.k:
            raise ValueError(f"target cluster {target} out of range for k={p.k}")
        a[i] = target
    if not np.any(a == old):
        a[a > old] -= 1
    return Partition(a)


@njit
def relabel_last_into(assign, dest, last):
    """Give cluster ``last``'s members label ``dest`` (swap-with-last compaction)."""
    for i in range(assign.size):
        if assign[i] == last:
            assign[i] = dest


@njit
def crp_draw(rng, n, alpha, assign):
    """Sequential Chinese-restaurant seating; fills ``assign`` and returns k."""
    k = 0
    sizes = np.zeros(max(n, 1), dtype=np.int64)
    for i in range(n):
        u = rng.random() * (i + alpha)
        acc = 0.0
        chosen = k
        for j in range(k):
            acc += sizes[j]
            if u < acc:
                chosen = j
                break
        if chosen == k:
            k += 1
        sizes[chosen] += 1
        assign[i] = chosen
    return k
