"""Dirichlet process mixtures of regressions with covariate selection.

Four samplers share one set of kernels: RPMS and SSM (:mod:`dpmvs.rpms`),
the probit stick-breaking mixture (:mod:`dpmvs.psbp`) and profile
regression (:mod:`dpmvs.pr`).  Set ``DPMVS_NUMBA=0`` before import to run
the kernels without compilation.
"""

__version__ = "0.1.0"

from ._jit import backend  # noqa: E402
from .archive import DrawArchive, load_archives, merge  # noqa: E402
from .config import ConfigError, ExperimentConfig, HyperConfig, load_config  # noqa: E402
from .data import Dataset, DatasetError, load_dataset, simulate_mixed, simulate_scenario1  # noqa: E402
from .dp_core import Partition  # noqa: E402
from .randist import make_rng  # noqa: E402

__all__ = [
    "ConfigError", "Dataset", "DatasetError", "DrawArchive", "ExperimentConfig", "HyperConfig",
    "Partition", "backend", "load_archives", "load_config", "load_dataset", "make_rng", "merge",
    "simulate_mixed", "simulate_scenario1",
]
