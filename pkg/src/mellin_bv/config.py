"""Run configuration: a TOML file with sections, overridden by CLI flags.

Grammar (every key optional)::

    command = "convergence"
    N = 1
    kernel = "gauss_weierstrass"
    function = "logbump"
    alpha = 1.0
    lambda = 1.0
    delta = [0.5, 0.1]
    mu = [0.5, 1.0, 2.0]
    out = "results"

    [phi]           # kind = "power" | "classical"
    kind = "power"
    p = 2.0

    [op]
    w_ladder = [2, 4, 8, 16, 32, 64, 128]
    nodes_per_axis = 0          # apply; 0: per-kernel default
    s_grid = { n = 257, span = 5.0 }

    [lambda_grid]
    kmax = 20
    base = 2.0

    [quad]
    nodes_per_axis = 0          # kernel checks

    [var]
    depth_max = 12
    box_ladder = [1, 2, 4, 8]
    tol = 1e-4
    p_max = 3
    section_depth = 8

    [thresholds]
    ratio = 0.1
    floor = 1e-2
    factor = 0.9

    [generalized]
    tau_power = 1.0             # tau(t) = |log t|^tau_power
    xi_power = 1.0              # xi(w) = w^-xi_power (0: xi == 1)
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import tomli

from .errors import ConfigError, UnknownDimension
from .functions import get_function
from .kernels import get_kernel
from .phi import LambdaGrid, parse_phi

COMMANDS = ("kernel-check", "variation", "modulus", "apply", "convergence", "rate",
            "rate-generalized", "counterexample")

DEFAULTS = {
    "command": "",
    "N": 1,
    "kernel": "gauss_weierstrass",
    "function": "logbump",
    "alpha": 1.0,
    "lambda": 1.0,
    "delta": [0.5, 0.1, 0.01, 0.001],
    "mu": [0.5, 1.0, 2.0],
    "out": "results",
    "phi": {"kind": "power", "p": 2.0},
    "op": {"w_ladder": None, "nodes_per_axis": 0, "s_grid": {"n": 257, "span": 5.0}},
    "lambda_grid": {"kmax": 20, "base": 2.0},
    "quad": {"nodes_per_axis": 0},
    "var": {"depth_max": 12, "box_ladder": [1.0, 2.0, 4.0, 8.0], "tol": 1e-4, "p_max": 3,
            "section_depth": 8},
    "thresholds": {"ratio": 0.1, "floor": 1e-2, "factor": 0.9},
    "generalized": {"tau_power": 1.0, "xi_power": 1.0},
}


def _merge(base: dict, extra: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict) and key != "phi":
            if not isinstance(value, dict):
                raise ConfigError(f"{where}{key} must be a table")
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class RunConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def load(cls, path: Optional[str] = None, overrides: Optional[dict] = None) -> "RunConfig":
        data = copy.deepcopy(DEFAULTS)
        if path:
            try:
                with open(path, "rb") as fh:
                    data = _merge(data, tomli.load(fh))
            except (OSError, tomli.TOMLDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if overrides:
            data = _merge(data, {k: v for k, v in overrides.items() if v is not None})
        cfg = cls(data)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.data[key]

    @property
    def N(self) -> int:
        return int(self.data["N"])

    def validate(self) -> None:
        d = self.data
        if d["command"] and d["command"] not in COMMANDS:
            raise ConfigError(f"unknown command {d['command']!r}")
        if not isinstance(d["N"], int) or not 1 <= d["N"] <= 3:
            raise ConfigError(f"dimension N = {d['N']} unsupported (1..3)")
        try:
            self.phi
            self.kernel
            if d["function"]:
                self.function
            self.lambda_grid
        except (KeyError, ValueError, UnknownDimension) as exc:
            raise ConfigError(str(exc).strip("'\"")) from exc
        for key in ("alpha", "lambda"):
            if not float(d[key]) > 0:
                raise ConfigError(f"{key} must be positive")
        ladder = d["op"]["w_ladder"]
        if ladder is not None and (len(ladder) < 2 or any(b <= a for a, b in zip(ladder, ladder[1:]))
                                   or min(ladder) <= 0):
            raise ConfigError("op.w_ladder must be positive and increasing")

    @property
    def phi(self):
        return parse_phi(self.data["phi"])

    @property
    def kernel(self):
        return get_kernel(self.data["kernel"], self.N)

    @property
    def function(self):
        return get_function(self.data["function"], self.N)

    @property
    def lambda_grid(self) -> LambdaGrid:
        g = self.data["lambda_grid"]
        return LambdaGrid.geometric(int(g["kmax"]), float(g["base"]))

    @property
    def w_ladder(self) -> Optional[tuple]:
        ladder = self.data["op"]["w_ladder"]
        return None if ladder is None else tuple(float(w) for w in ladder)

    def var_options(self) -> dict:
        v = self.data["var"]
        opts = {"box_ladder": tuple(float(m) for m in v["box_ladder"]), "tol": float(v["tol"])}
        if self.N == 1:
            opts["depth_max"] = int(v["depth_max"])
        else:
            opts["p_max"] = int(v["p_max"])
            opts["section_depth"] = int(v["section_depth"])
        return opts

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)


def output_dir(cfg: RunConfig) -> Path:
    return Path(cfg["out"])
