"""Independent reference computations used by the tests.

Nothing here imports the package's kernels: partitions are enumerated from
scratch, posteriors are obtained by brute-force grid integration.
"""

import math

import numpy as np


def set_partitions(n):
    """All set partitions of range(n) as label lists (restricted growth strings)."""
    if n == 0:
        yield []
        return

    def rec(prefix, k):
        if len(prefix) == n:
            yield list(prefix)
            return
        for lab in range(k + 1):
            prefix.append(lab)
            yield from rec(prefix, max(k, lab + 1))
            prefix.pop()

    yield from rec([0], 1)


def bell(n):
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def eppf_direct(labels, alpha):
    """p(partition) by the product of its sizes' factorials, no logs."""
    sizes = np.bincount(labels)
    num = alpha ** len(sizes) * np.prod([math.factorial(s - 1) for s in sizes])
    den = np.prod([alpha + i for i in range(len(labels))])
    return num / den


def seating_path_prob(labels, alpha):
    """Product of urn probabilities along the sequential seating of ``labels``."""
    prob = 1.0
    sizes = []
    for i, lab in enumerate(labels):
        if lab == len(sizes):
            prob *= alpha / (alpha + i)
            sizes.append(1)
        else:
            prob *= sizes[lab] / (alpha + i)
            sizes[lab] += 1
    return prob


def grid_moments(logpost, lo, hi, m=200001):
    """Normalized mean and variance of exp(logpost) on [lo, hi] by the trapezoid rule."""
    x = np.linspace(lo, hi, m)
    lp = logpost(x)
    w = np.exp(lp - lp.max())
    trap = np.trapezoid if hasattr(np, "trapezoid") else np.trapz
    z = trap(w, x)
    mean = trap(w * x, x) / z
    var = trap(w * (x - mean) ** 2, x) / z
    return mean, var


def beta_moments(a, b):
    return a / (a + b), a * b / ((a + b) ** 2 * (a + b + 1))


def gamma_moments(shape, rate):
    return shape / rate, shape / rate**2


def binder_bruteforce(partitions):
    """Index of the Binder-loss minimizer among ``partitions`` (list of label lists)."""
    P = np.array(partitions)
    T, n = P.shape
    C = np.zeros((n, n))
    for row in P:
        C += row[:, None] == row[None, :]
    C /= T
    best, best_loss = None, np.inf
    for t, row in enumerate(P):
        loss = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                loss += abs(float(row[i] == row[j]) - C[i, j])
        if loss < best_loss - 1e-12:
            best, best_loss = t, loss
    return best, best_loss
