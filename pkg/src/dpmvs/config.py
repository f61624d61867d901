"""Hyperparameters and experiment configuration.

Config files are flat TOML: ``key = value`` lines, no tables.  Unknown keys
and invalid values are reported together as a single ``ConfigError``.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import get_type_hints

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODELS = ("ssm", "rpms", "psbp", "pr")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass
class HyperConfig:
    """Fixed hyperparameters of all four models.

    Defaults are the standard settings for scenario 1; the PR intercept and
    selection-weight priors are documented choices (see README).
    """

    # RPMS / SSM
    a_pi: float = 1.0
    b_pi: float = 0.15
    a_omega: float = 1.0
    b_omega: float = 0.15
    a_tau: float = 1.0
    b_tau: float = 1.0
    a_lambda: float = 1.0
    b_lambda: float = 1.0
    a_alpha: float = 1.0
    b_alpha: float = 1.0
    a_zeta: float = 1.0
    b_zeta: float = 1.0
    mu_d: float = 0.0
    # where the point mass of the pi_d hyperprior sits (0 by default, 1 for sensitivity runs)
    pi_dirac_at: int = 0
    m_aux: int = 3
    # PSBP-MM
    K: int = 20
    a_kappa: float = 0.5
    b_kappa: float = 0.5
    psbp_a_tau: float = 1.0
    psbp_b_tau: float = 5.0
    mu_xi: float = 0.0
    tau_xi: float = 0.1
    # PR
    pr_theta_mean: float = 0.0
    pr_theta_prec: float = 0.01
    pr_a_pi: float = 1.0
    pr_b_pi: float = 1.0

    def problems(self):
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("mu_d", "mu_xi", "pr_theta_mean"):
                continue
            if f.name == "pi_dirac_at":
                if v not in (0, 1):
                    out.append("pi_dirac_at must be 0 or 1")
            elif not v > 0:
                out.append(f"{f.name} must be positive (got {v})")
        return out


@dataclass
class ExperimentConfig:
    model: str = "rpms"
    iterations: int = 15000
    burn_in: int = 5000
    thinning: int = 1
    seed: int = 0
    chains: int = 1
    intercept: bool = False
    response: str = "y"
    binary_columns: list = field(default_factory=list)
    continuous_columns: list = field(default_factory=list)
    discretize: str = ""
    # prediction profiles: "1,1;1,0" style, one profile per ';'
    profiles: str = ""
    grid_min: float = -5.0
    grid_max: float = 25.0
    grid_points: int = 301
    # fixed-partition rerun for cluster-specific inclusion (RPMS/SSM only)
    conditional_iterations: int = 3000
    conditional_burn_in: int = 1000
    hyper: HyperConfig = field(default_factory=HyperConfig)

    def problems(self):
        out = []
        if self.model not in MODELS:
            out.append(f"model must be one of {MODELS} (got {self.model!r})")
        if not self.iterations > self.burn_in:
            out.append("iterations must exceed burn_in")
        if self.burn_in < 0:
            out.append("burn_in must be non-negative")
        if self.thinning < 1:
            out.append("thinning must be >= 1")
        elif self.iterations > self.burn_in and (self.iterations - self.burn_in) % self.thinning:
            out.append("iterations - burn_in must be divisible by thinning")
        if self.chains < 1:
            out.append("chains must be >= 1")
        if self.seed < 0:
            out.append("seed must be non-negative")
        if self.grid_points < 2 or not self.grid_max > self.grid_min:
            out.append("prediction grid needs grid_points >= 2 and grid_max > grid_min")
        if self.conditional_iterations <= self.conditional_burn_in:
            out.append("conditional_iterations must exceed conditional_burn_in")
        try:
            self.profile_list()
        except ValueError as e:
            out.append(str(e))
        return out + self.hyper.problems()

    def validate(self):
        probs = self.problems()
        if probs:
            raise ConfigError(probs)
        return self

    def profile_list(self):
        if not self.profiles.strip():
            return []
        out = []
        for chunk in self.profiles.split(";"):
            chunk = chunk.strip()
            if chunk:
                try:
                    out.append([float(v) for v in chunk.split(",")])
                except ValueError:
                    raise ValueError(f"bad prediction profile {chunk!r}") from None
        return out

    def grid(self):
        import numpy as np

        return np.linspace(self.grid_min, self.grid_max, self.grid_points)

    def to_flat(self):
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "hyper"}
        d.update(dataclasses.asdict(self.hyper))
        return d


_EXP_TYPES = {k: v for k, v in get_type_hints(ExperimentConfig).items() if k != "hyper"}
_HYP_TYPES = get_type_hints(HyperConfig)


def _coerce(name, t, value, problems):
    if t is bool:
        if isinstance(value, bool):
            return value
        problems.append(f"{name} must be true/false")
    elif t is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        problems.append(f"{name} must be an integer")
    elif t is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        problems.append(f"{name} must be a number")
    elif t is str:
        if isinstance(value, str):
            return value
        problems.append(f"{name} must be a string")
    elif t is list:
        if isinstance(value, list) and all(isinstance(v, str) for v in value):
            return value
        problems.append(f"{name} must be a list of strings")
    return None


def config_from_mapping(mapping, base=None) -> ExperimentConfig:
    cfg = dataclasses.replace(base) if base is not None else ExperimentConfig()
    hyper = dataclasses.replace(cfg.hyper)
    problems = []
    for key, value in mapping.items():
        if isinstance(value, dict):
            problems.append(f"{key}: nested tables are not allowed (flat keys only)")
        elif key in _EXP_TYPES:
            v = _coerce(key, _EXP_TYPES[key], value, problems)
            if v is not None:
                setattr(cfg, key, v)
        elif key in _HYP_TYPES:
            v = _coerce(key, _HYP_TYPES[key], value, problems)
            if v is not None:
                setattr(hyper, key, v)
        else:
            problems.append(f"unknown key {key!r}")
    cfg.hyper = hyper
    problems.extend(cfg.problems())
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path, overrides=None) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        mapping = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError([f"{path}: {e}"]) from None
    if overrides:
        mapping.update(overrides)
    return config_from_mapping(mapping)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for k, v in cfg.to_flat().items():
        if isinstance(v, bool):
            lines.append(f"{k} = {'true' if v else 'false'}")
        elif isinstance(v, str):
            lines.append(f"{k} = {json.dumps(v)}")
        elif isinstance(v, list):
            lines.append(f"{k} = {json.dumps(v)}")
        elif isinstance(v, float):
            lines.append(f"{k} = {v!r}")
        else:
            lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
