"""Command-line entry point: ``dpmvs simulate | fit | summarize | predict``.

Exit status is 0 on success, 1 for invalid input or configuration and 2 when
a sampler hits a numeric failure (the path of the state dump is printed).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .archive import load_archives, merge
from .chain import NumericFailure
from .config import ConfigError, ExperimentConfig, config_from_mapping, load_config
from .data import DatasetError, load_dataset, save_dataset, save_truth, simulate_mixed, simulate_scenario1
from .experiment import predictive, rerun_from_manifest, run_experiment, summarize_run, write_density_csv

SCENARIOS = {"scenario1": simulate_scenario1, "mixed": simulate_mixed}


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _overrides(pairs):
    out = {}
    for item in pairs or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError([f"--set expects key=value, got {item!r}"])
        out[key.strip()] = _parse_value(val.strip())
    return out


def _grid(text):
    try:
        lo, hi, num = text.split(":")
        grid = np.linspace(float(lo), float(hi), int(num))
    except ValueError:
        raise ConfigError([f"grid must be min:max:points, got {text!r}"]) from None
    if grid.size < 2 or not grid[-1] > grid[0]:
        raise ConfigError(["grid needs at least 2 points and max > min"])
    return grid


def _profile(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError([f"bad covariate profile {text!r}"]) from None


def cmd_simulate(args):
    ds, truth = SCENARIOS[args.scenario](args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out)
    truth_path = Path(args.truth) if args.truth else out.with_suffix(".truth.json")
    save_truth(truth, truth_path)
    print(f"wrote {ds.n} rows to {out} (truth in {truth_path})")
    return 0


def _build_config(args):
    mapping = {}
    if args.config:
        cfg = load_config(args.config, _overrides(args.set))
    else:
        cfg = ExperimentConfig()
        mapping.update(_overrides(args.set))
    for key in ("model", "seed", "chains", "iterations", "burn_in", "thinning"):
        val = getattr(args, key, None)
        if val is not None:
            mapping[key] = val
    return config_from_mapping(mapping, base=cfg) if mapping else cfg.validate()


def cmd_fit(args):
    if args.manifest:
        summary = rerun_from_manifest(args.manifest, args.out)
        print(f"reran {args.manifest} into {args.out}")
        return 0
    if not args.data:
        raise ConfigError(["fit needs --data (or --manifest)"])
    cfg = _build_config(args)
    ds = load_dataset(args.data, cfg.response, cfg.binary_columns, cfg.continuous_columns, cfg.discretize)
    if ds.dropped_rows:
        print(f"{ds.dropped_rows} dropped")
    summary = run_experiment(cfg, ds, args.out)
    print(json.dumps({"inclusion": summary["inclusion"], "k_mode": summary["k_mode"]}))
    return 0


def cmd_summarize(args):
    summary = summarize_run(args.run)
    text = json.dumps(summary, indent=1, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.cocluster:
        from .summaries import coclustering_matrix

        C = coclustering_matrix(merge(load_archives(args.run)))
        np.savetxt(args.cocluster, C, delimiter=",", fmt="%.17g")
    return 0


def cmd_predict(args):
    draws = merge(load_archives(args.run))
    xt = _profile(args.profile)
    grid = _grid(args.grid)
    dens, mean = predictive(draws, xt, grid, seed=args.seed)
    write_density_csv(args.out, grid, dens)
    print(f"predictive mean {mean:.6g} written with density to {args.out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="dpmvs", description="DP mixtures with covariate selection")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a simulated dataset")
    s.add_argument("--scenario", choices=sorted(SCENARIOS), default="scenario1")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--truth", help="where to write the true partition and parameters")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit a model and write a run directory")
    f.add_argument("--model", choices=["ssm", "rpms", "psbp", "pr"])
    f.add_argument("--data")
    f.add_argument("--config", help="flat TOML file of configuration keys")
    f.add_argument("--out", required=True)
    f.add_argument("--seed", type=int)
    f.add_argument("--chains", type=int)
    f.add_argument("--iterations", type=int)
    f.add_argument("--burn-in", dest="burn_in", type=int)
    f.add_argument("--thinning", type=int)
    f.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    f.add_argument("--manifest", help="rerun exactly from a previous run's manifest.json")
    f.set_defaults(func=cmd_fit)

    m = sub.add_parser("summarize", help="summarize the archives of a run directory")
    m.add_argument("--run", required=True)
    m.add_argument("--out")
    m.add_argument("--cocluster", help="also write the co-clustering matrix as CSV")
    m.set_defaults(func=cmd_summarize)

    q = sub.add_parser("predict", help="predictive density at one covariate profile")
    q.add_argument("--run", required=True)
    q.add_argument("--profile", required=True, help="comma-separated covariate values")
    q.add_argument("--grid", default="-5:25:301", help="min:max:points (write --grid=-5:25:301 when min is negative)")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_predict)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except NumericFailure as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        print(f"state dump: {getattr(err, 'dump_path', 'unavailable')}", file=sys.stderr)
        return 2
    except (ConfigError, DatasetError, FileNotFoundError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
