"""The compiled and plain-numpy kernels must produce identical chains."""

import os
import subprocess
import sys

import pytest

SCRIPT = """
import sys
from dpmvs._jit import backend
from dpmvs.config import config_from_mapping
from dpmvs.data import simulate_mixed, simulate_scenario1
from dpmvs.experiment import run_experiment
model, out = sys.argv[1], sys.argv[2]
ds = simulate_mixed(3, n=40)[0] if model == "mixed" else simulate_scenario1(3, n_per_cluster=12)[0]
cfg = config_from_mapping({"model": "rpms" if model == "mixed" else model, "iterations": 25, "burn_in": 5,
                           "chains": 2, "K": 4, "conditional_iterations": 10, "conditional_burn_in": 2,
                           "profiles": "1,1" if model != "mixed" else "", "seed": 9})
run_experiment(cfg, ds, out)
print(backend())
"""


def _run(model, out, flag):
    env = dict(os.environ, DPMVS_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", SCRIPT, model, str(out)], env=env, capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return res.stdout.strip().splitlines()[-1]


@pytest.mark.parametrize("model", ["ssm", "rpms", "psbp", "pr", "mixed"])
def test_numba_and_numpy_paths_agree(model, tmp_path):
    assert _run(model, tmp_path / "jit", "1") == "numba"
    assert _run(model, tmp_path / "py", "0") == "numpy"
    files = sorted(p.name for p in (tmp_path / "jit").iterdir() if p.name != "manifest.json")
    assert "chain_1.csv" in files
    for name in files:
        assert (tmp_path / "jit" / name).read_bytes() == (tmp_path / "py" / name).read_bytes(), name
