"""Time the numba kernels against the plain-numpy fallback.

Each backend runs in its own interpreter because the switch is read at
import.  The compiled path is warmed up first so compilation is not timed.

    python3 benchmarks/bench_kernels.py [--sweeps 200] [--n-per-cluster 100]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from dpmvs._jit import backend
from dpmvs.config import HyperConfig
from dpmvs.data import simulate_scenario1
from dpmvs.psbp import PsbpSampler
from dpmvs.pr import PrSampler
from dpmvs.randist import make_rng
from dpmvs.rpms import RpmsSampler
from dpmvs.summaries import binder_point_estimate, coclustering_matrix

sweeps, npc = int(sys.argv[1]), int(sys.argv[2])
ds, _ = simulate_scenario1(0, n_per_cluster=npc)
makers = {
    "ssm": lambda: RpmsSampler(ds, mode="ssm"),
    "rpms": lambda: RpmsSampler(ds),
    "psbp": lambda: PsbpSampler(ds, HyperConfig(K=20)),
    "pr": lambda: PrSampler(ds),
}
out = {"backend": backend()}
for name, make in makers.items():
    s = make()
    rng = make_rng(1)
    s.sweep(rng)  # compile (numba) / warm caches (numpy)
    t0 = time.perf_counter()
    for _ in range(sweeps):
        s.sweep(rng)
    out[name] = (time.perf_counter() - t0) / sweeps
A = make_rng(3).integers(0, 4, (500, ds.n))
coclustering_matrix(A[:2])
binder_point_estimate(A[:2])
t0 = time.perf_counter()
binder_point_estimate(A)
out["binder_500_draws"] = time.perf_counter() - t0
print(json.dumps(out))
"""


def run(flag, sweeps, npc):
    env = dict(os.environ, DPMVS_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", WORKER, str(sweeps), str(npc)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sweeps", type=int, default=200)
    p.add_argument("--numpy-sweeps", type=int, default=5, help="sweeps for the slow fallback path")
    p.add_argument("--n-per-cluster", type=int, default=100)
    args = p.parse_args(argv)
    fast = run("1", args.sweeps, args.n_per_cluster)
    slow = run("0", args.numpy_sweeps, args.n_per_cluster)
    print(f"{'kernel':<18}{'numba (s)':>12}{'numpy (s)':>12}{'speed-up':>10}")
    for key in ("ssm", "rpms", "psbp", "pr", "binder_500_draws"):
        label = key if key.startswith("binder") else f"{key} sweep"
        print(f"{label:<18}{fast[key]:>12.2e}{slow[key]:>12.2e}{slow[key] / fast[key]:>9.0f}x")


if __name__ == "__main__":
    main()
