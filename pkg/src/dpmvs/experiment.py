"""Experiment orchestration: chains, archives, summaries, manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from ._jit import backend
from .archive import DrawArchive, load_archives, merge
from .chain import NumericFailure, run_chain
from .config import ConfigError, ExperimentConfig, config_from_mapping
from .data import Dataset, load_dataset, save_dataset
from .randist import make_rng
from . import pr, psbp, rpms, summaries

log = logging.getLogger(__name__)

ACF_LAGS = (1, 5, 10)
# stream ids above this are reserved for post-processing draws
_AUX_STREAM = 1 << 20


def make_sampler(cfg: ExperimentConfig, dataset: Dataset, fixed_partition=None):
    if cfg.model in ("rpms", "ssm"):
        return rpms.RpmsSampler(dataset, cfg.hyper, mode=cfg.model, intercept=cfg.intercept,
                                fixed_partition=fixed_partition)
    if fixed_partition is not None:
        raise ValueError("fixed-partition reruns are only defined for rpms/ssm")
    if cfg.model == "psbp":
        return psbp.PsbpSampler(dataset, cfg.hyper, intercept=cfg.intercept)
    if cfg.model == "pr":
        return pr.PrSampler(dataset, cfg.hyper)
    raise ConfigError([f"unknown model {cfg.model!r}"])


def fit_chain(cfg: ExperimentConfig, dataset: Dataset, chain=0):
    """Run chain number ``chain`` (its own RNG stream) and return the archive."""
    rng = make_rng(cfg.seed, chain)
    sampler = make_sampler(cfg, dataset)
    return run_chain(sampler, rng, cfg.iterations, cfg.burn_in, cfg.thinning)


def predictive(draws: DrawArchive, xt, grid, seed=0, stream=_AUX_STREAM):
    """Predictive density and mean at profile ``xt`` for any model's archive."""
    rng = make_rng(seed, stream)
    if draws.model in ("rpms", "ssm"):
        return rpms.predictive_density(draws, xt, grid, rng=rng, return_mean=True)
    if draws.model == "psbp":
        return psbp.predictive_density(draws, xt, grid, return_mean=True)
    if draws.model == "pr":
        return pr.predictive_density(draws, xt, grid, rng=rng, return_mean=True)
    raise ValueError(f"unknown model {draws.model!r}")


def write_density_csv(path, grid, dens):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "density"])
        for g, d in zip(grid, dens):
            w.writerow([format(float(g), ".17g"), format(float(d), ".17g")])


def summarize_archives(archives):
    """JSON-ready summary of one or more chains of the same model."""
    merged = merge(archives)
    merged.require_nonempty()
    binder = summaries.binder_point_estimate(merged)
    traces = ["k", "lambda"] + (["alpha"] if "alpha" in merged.fields else [])
    acf = []
    for a in archives:
        per = {}
        for name in traces:
            x = summaries.scalar_trace(a, name)
            per[name] = {str(l): summaries.autocorrelation(x, l) for l in ACF_LAGS if l < x.size}
        acf.append(per)
    out = {
        "model": merged.model,
        "n": merged.n,
        "chains": len(archives),
        "retained_per_chain": [len(a) for a in archives],
        "inclusion": summaries.inclusion_summary(merged),
        "binder_partition": (binder.assign + 1).tolist(),
        "binder_k": binder.k,
        "k_posterior": {str(k): v for k, v in summaries.k_posterior(merged).items()},
        "k_mode": summaries.k_mode(merged),
        "autocorrelation": acf,
    }
    if merged.model == "pr":
        out["pi_median"] = pr.median_pi(merged).tolist()
    return out, merged, binder


def _dataset_digest(ds: Dataset):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.y).tobytes())
    h.update(np.ascontiguousarray(ds.X).tobytes())
    return h.hexdigest()


def _dump_failure(outdir, chain, err):
    path = Path(outdir) / f"failure_chain_{chain}.json"
    state = {k: (np.asarray(v).tolist()) for k, v in (err.state_dump or {}).items()}
    path.write_text(json.dumps({"iteration": err.iteration, "message": str(err), "state": state}, indent=1))
    err.dump_path = str(path)
    return path


def run_experiment(cfg: ExperimentConfig, dataset: Dataset, outdir, workers=None):
    """Fit ``cfg.chains`` chains and write all artifacts into ``outdir``.

    Writes ``chain_<c>.csv``/``.json`` archives, ``data.csv``, ``summary.json``,
    ``predictive_<p>.csv`` per requested profile, ``conditional.csv`` (RPMS
    and SSM fixed-partition rerun) and ``manifest.json``.

    Returns
    -------
    dict
        The summary written to ``summary.json``.
    """
    cfg.validate()
    profiles = cfg.profile_list()
    bad = [p for p in profiles if len(p) != dataset.D]
    if bad:
        raise ConfigError([f"profile {p} has {len(p)} entries, dataset has {dataset.D} covariates" for p in bad])
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, out / "data.csv")

    workers = workers or min(cfg.chains, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fit_chain, cfg, dataset, c) for c in range(cfg.chains)]
        archives = []
        for c, fut in enumerate(futures):
            try:
                archives.append(fut.result())
            except NumericFailure as err:
                _dump_failure(out, c, err)
                raise
    for c, arc in enumerate(archives):
        arc.save(out / f"chain_{c}.csv")

    summary, merged, binder = summarize_archives(archives)

    grid = cfg.grid()
    pred = []
    for p_i, prof in enumerate(profiles):
        dens, mean = predictive(merged, prof, grid, seed=cfg.seed, stream=_AUX_STREAM + p_i)
        fname = f"predictive_{p_i}.csv"
        write_density_csv(out / fname, grid, dens)
        pred.append({"profile": prof, "mean": mean, "file": fname})
    summary["predictive"] = pred

    if cfg.model in ("rpms", "ssm"):
        sampler = make_sampler(cfg, dataset, fixed_partition=binder)
        cond = run_chain(sampler, make_rng(cfg.seed, _AUX_STREAM - 1), cfg.conditional_iterations,
                         cfg.conditional_burn_in, 1)
        cond.save(out / "conditional.csv")
        summary["inclusion_by_cluster"] = summaries.marginal_inclusion_by_cluster(cond, binder).tolist()

    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    manifest = {
        "config": cfg.to_flat(),
        "seed": cfg.seed,
        "code_version": __version__,
        "backend": backend(),
        "data": {
            "file": "data.csv",
            "n": dataset.n,
            "D": dataset.D,
            "response": dataset.response_name,
            "column_names": dataset.column_names,
            "column_types": dataset.column_types,
            "sha256": _dataset_digest(dataset),
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return summary


def rerun_from_manifest(manifest_path, outdir):
    """Regenerate every artifact of a previous run from its manifest alone."""
    manifest_path = Path(manifest_path)
    man = json.loads(manifest_path.read_text(encoding="utf-8"))
    cfg = config_from_mapping(man["config"])
    d = man["data"]
    types = dict(zip(d["column_names"], d["column_types"]))
    ds = load_dataset(
        manifest_path.parent / d["file"],
        response=d["response"],
        binary_columns=[c for c, t in types.items() if t == "binary"],
        continuous_columns=[c for c, t in types.items() if t == "continuous"],
    )
    if _dataset_digest(ds) != d["sha256"]:
        raise ValueError("dataset does not match the manifest digest")
    return run_experiment(cfg, ds, outdir)


def summarize_run(rundir):
    archives = load_archives(rundir)
    summary, _, _ = summarize_archives(archives)
    return summary
