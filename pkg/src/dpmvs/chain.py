"""Running one sampler chain into a DrawArchive."""

from __future__ import annotations

import math

import numpy as np

from .archive import DrawArchive


class NumericFailure(RuntimeError):
    """Raised when a sweep leaves a non-finite value in the state."""

    def __init__(self, message, iteration, state_dump=None):
        super().__init__(message)
        self.iteration = iteration
        self.state_dump = state_dump


def _finite(rec):
    for v in rec.values():
        arr = np.asarray(v)
        if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
            return False
    return True


def _dump(sampler, t):
    try:
        return sampler.record(t)
    except Exception:  # the state may be half-updated
        return None


def _sweep_checked(sampler, rng, t):
    try:
        sampler.sweep(rng)
    except ArithmeticError as err:
        raise NumericFailure(f"{type(err).__name__} during sweep {t}: {err}", t, _dump(sampler, t)) from err
    except ValueError as err:
        if "math domain" not in str(err):
            raise
        raise NumericFailure(f"math domain error during sweep {t}", t, _dump(sampler, t)) from err


def run_chain(sampler, rng, iterations, burn_in=0, thinning=1, progress=None):
    """Sweep ``iterations`` times and keep every ``thinning``-th draw after burn-in.

    Iterations are counted from 1; draw ``t`` is kept when ``t > burn_in`` and
    ``(t - burn_in) % thinning == 0``.
    """
    if iterations <= burn_in:
        raise ValueError("iterations must exceed burn_in")
    fields, widths = sampler.archive_fields()
    arc = DrawArchive(
        model=sampler.model,
        n=int(len(sampler.state.assign if hasattr(sampler.state, "assign") else sampler.state.alloc)),
        fields=fields,
        widths=widths,
        iterations=iterations,
        burn_in=burn_in,
        thinning=thinning,
        meta=sampler.archive_meta(),
    )
    for t in range(1, iterations + 1):
        _sweep_checked(sampler, rng, t)
        if t > burn_in and (t - burn_in) % thinning == 0:
            rec = sampler.record(t)
            if not _finite(rec):
                raise NumericFailure(f"non-finite state after sweep {t}", t, rec)
            arc.append(rec)
        elif not math.isfinite(sampler.state.lam):
            raise NumericFailure(f"non-finite noise precision after sweep {t}", t, sampler.record(t))
        if progress is not None:
            progress(t)
    return arc
