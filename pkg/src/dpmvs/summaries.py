"""Posterior summaries computed from a DrawArchive.

Every function here is a deterministic function of the retained draws and
depends on allocations only through the co-clustering relation, so cluster
relabelling never changes an output.
"""

from __future__ import annotations

import numpy as np

from ._jit import USE_NUMBA, njit
from .dp_core import Partition


def _assign_matrix(draws):
    if hasattr(draws, "assigns"):
        draws.require_nonempty()
        return draws.assigns()
    a = np.asarray(draws, dtype=np.int64)
    if a.ndim != 2 or a.shape[0] == 0:
        raise ValueError("draw archive is empty")
    return a


@njit
def _cocluster_loop(A):
    T, n = A.shape
    C = np.zeros((n, n))
    for t in range(T):
        for i in range(n):
            ai = A[t, i]
            for j in range(i + 1, n):
                if A[t, j] == ai:
                    C[i, j] += 1.0
    for i in range(n):
        C[i, i] = T
        for j in range(i + 1, n):
            C[j, i] = C[i, j]
    return C / T


def _cocluster_numpy(A):
    T, n = A.shape
    C = np.zeros((n, n))
    for row in A:
        onehot = np.zeros((n, int(row.max()) + 1))
        onehot[np.arange(n), row] = 1.0
        C += onehot @ onehot.T
    return C / T


def coclustering_matrix(draws):
    """Fraction of retained draws in which each pair of observations shares a cluster."""
    A = np.ascontiguousarray(_assign_matrix(draws))
    return _cocluster_loop(A) if USE_NUMBA else _cocluster_numpy(A)


@njit
def _binder_losses_loop(P, C):
    m, n = P.shape
    out = np.zeros(m)
    for t in range(m):
        s = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                same = 1.0 if P[t, i] == P[t, j] else 0.0
                s += abs(same - C[i, j])
        out[t] = s
    return out


def _binder_losses_numpy(P, C):
    iu = np.triu_indices(P.shape[1], 1)
    out = np.empty(P.shape[0])
    for t, row in enumerate(P):
        same = (row[:, None] == row[None, :]).astype(float)
        out[t] = np.abs(same - C)[iu].sum()
    return out


def binder_loss(partition, C):
    """Equal-cost Binder loss of ``partition`` against co-clustering matrix ``C``."""
    a = partition.assign if isinstance(partition, Partition) else np.asarray(partition, dtype=np.int64)
    return float(_binder_losses_numpy(a[None, :], np.asarray(C, dtype=float))[0])


def binder_point_estimate(draws):
    """Sampled partition with the smallest Binder loss.

    Only partitions that occur in the archive are searched.  Ties go to the
    partition that appeared first.

    Returns
    -------
    Partition
        In canonical (first-appearance) labelling.
    """
    A = _assign_matrix(draws)
    C = coclustering_matrix(A)
    seen = {}
    for row in A:
        key = tuple(Partition.from_labels(row.tolist()).assign.tolist())
        seen.setdefault(key, None)
    cands = np.array(list(seen), dtype=np.int64)
    losses = _binder_losses_loop(cands, C) if USE_NUMBA else _binder_losses_numpy(cands, C)
    return Partition(cands[int(np.argmin(losses))])


def autocorrelation(chain, lag):
    """Sample autocorrelation of ``chain`` at ``lag`` (0 for a constant chain)."""
    x = np.asarray(chain, dtype=float).ravel()
    lag = int(lag)
    if lag < 0:
        raise ValueError("lag must be non-negative")
    if lag >= x.size:
        raise ValueError(f"lag {lag} must be smaller than the chain length {x.size}")
    x = x - x.mean()
    denom = float(x @ x)
    if denom == 0.0:
        return 0.0
    return float(x[: x.size - lag] @ x[lag:] / denom)


def marginal_inclusion_by_cluster(draws, fixed=None):
    """Per-cluster inclusion frequencies from a fixed-partition rerun.

    Returns
    -------
    ndarray, shape (k, D)
        Entry ``(j, d)`` is the fraction of draws with ``theta_jd != 0``.
        An intercept column, if the design has one, is left out.
    """
    draws.require_nonempty()
    if not draws.meta.get("fixed_partition"):
        raise ValueError("archive was not produced with the partition held fixed")
    th = np.array([np.asarray(r["theta"]) for r in draws.records])
    if fixed is not None and Partition(draws.records[0]["assign"]) != fixed:
        raise ValueError("archive partition differs from the supplied one")
    off = 1 if draws.meta.get("intercept") else 0
    return (th[:, :, off:] != 0).mean(axis=0)


def k_posterior(draws):
    """Posterior frequencies of the number of occupied clusters, keyed by k."""
    k = np.array([np.unique(np.asarray(a)).size for a in _assign_matrix(draws)])
    vals, counts = np.unique(k, return_counts=True)
    return {int(v): float(c) / k.size for v, c in zip(vals, counts)}


def k_mode(draws):
    post = k_posterior(draws)
    return max(post, key=lambda v: (post[v], -v))


def rpms_inclusion(draws):
    """Per-covariate inclusion for RPMS/SSM draws.

    Posterior mean, over draws, of the share of observations whose cluster
    has a nonzero coefficient on the covariate.
    """
    draws.require_nonempty()
    off = 1 if draws.meta.get("intercept") else 0
    acc = None
    for r in draws.records:
        nz = (np.asarray(r["theta"])[:, off:] != 0).astype(float)
        w = np.bincount(r["assign"], minlength=nz.shape[0]) / len(r["assign"])
        v = w @ nz
        acc = v if acc is None else acc + v
    return acc / len(draws)


def psbp_inclusion(draws):
    """``1 - Pr(all gamma_kd = 0)`` for every covariate."""
    draws.require_nonempty()
    g = np.array([np.asarray(r["gamma"]) for r in draws.records])
    return np.any(g != 0, axis=1).mean(axis=0)


def inclusion_summary(draws):
    """Model-appropriate per-covariate inclusion summary as a name -> value dict."""
    model = draws.model
    names = draws.meta.get("covariate_names") or draws.meta["column_names"]
    if model in ("rpms", "ssm"):
        if draws.meta.get("intercept"):
            names = names[1:]
        vals = rpms_inclusion(draws)
    elif model == "psbp":
        vals = psbp_inclusion(draws)
    elif model == "pr":
        vals = np.median(np.array([r["pi"] for r in draws.records]), axis=0)
    else:
        raise ValueError(f"unknown model {model!r}")
    return {nm: float(v) for nm, v in zip(names, vals)}


def scalar_trace(draws, name):
    return np.array([float(r[name]) for r in draws.records])
