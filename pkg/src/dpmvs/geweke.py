"""Joint-distribution correctness test for the samplers.

Draws of the monitored functionals from the prior (marginal-conditional
simulator) are compared with draws from a chain that alternates a posterior
sweep with regeneration of the data (successive-conditional simulator).
Both target the same joint distribution when the sweep is correct.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GewekeResult:
    name: str
    prior_mean: float
    chain_mean: float
    z: float

    def passed(self, threshold=4.0):
        return bool(abs(self.z) < threshold)


def batch_means_se(x, batches=50):
    """Standard error of the mean of a correlated series by non-overlapping batch means."""
    x = np.asarray(x, dtype=float)
    b = x.size // batches
    if b < 2:
        raise ValueError("series too short for batch means")
    means = x[: b * batches].reshape(batches, b).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(batches))


def _collect(fn, sweeps):
    first = fn()
    out = {k: np.empty(sweeps) for k in first}
    for k, v in first.items():
        out[k][0] = v
    for t in range(1, sweeps):
        for k, v in fn().items():
            out[k][t] = v
    return out


def geweke_test(make_sampler, rng, sweeps, batches=50):
    """Run both simulators for ``sweeps`` draws each.

    ``make_sampler`` returns a fresh sampler exposing ``draw_prior``,
    ``sweep``, ``resample_data`` and ``functionals``.

    Returns
    -------
    dict of GewekeResult keyed by functional name
    """
    mc = make_sampler()

    def prior_step():
        mc.draw_prior(rng)
        return mc.functionals()

    prior = _collect(prior_step, sweeps)

    sc = make_sampler()
    sc.draw_prior(rng)

    def chain_step():
        sc.sweep(rng)
        sc.resample_data(rng)
        return sc.functionals()

    chain = _collect(chain_step, sweeps)

    out = {}
    for name in prior:
        a, b = prior[name], chain[name]
        se = np.hypot(a.std(ddof=1) / np.sqrt(a.size), batch_means_se(b, batches))
        diff = a.mean() - b.mean()
        z = 0.0 if se == 0 and diff == 0 else float(diff / se)
        out[name] = GewekeResult(name, float(a.mean()), float(b.mean()), z)
    return out
