"""Run configuration: built-in defaults, then a TOML file, then command-line flags.

Blocks are validated by constructing the owning module's types before any
run starts; errors name the offending ``section.key``.
"""

from __future__ import annotations

import copy
import os
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .energy import EnergyParams
from .errors import ArgumentError
from .flow import FlowConfig
from .potential import PotentialSpec

OUTPUT_ENV = "SHMETA_OUTPUT_ROOT"

DEFAULTS = {
    "potential": {"kind": "prototype"},
    "energy": {"epsilon": 0.05, "q": 0.1},
    "flow": {"tau": 1e-4, "t_end": 0.5, "scheme": "mm", "inner_tol": 1e-8, "inner_max_iters": 100},
    "simulate": {"grid_n": 1024, "init": "two-interface", "snap_stride": 500, "history_stride": 1},
    "validate": {"n_samples": 1000, "s_max": 3.0},
    "m1": {"q": 0.0, "L": 20.0, "n": 4096},
    "minimize_profile": {"length": 0.5, "h_over_eps": 1.0 / 64, "constraint": "zero-dirichlet",
                         "alpha": [0.0, 0.0], "beta": [0.0, 0.0], "well": -1},
    "midpoint_decay": {"q": 0.0, "d_over_eps": [10.0, 15.0, 20.0, 25.0]},
    "bound_sweep": {"q": 0.0, "zeros": [0.0, 0.5], "eps": [0.01, 0.015, 0.02, 0.025, 0.03], "alpha0": 0.1},
    "slow_motion": {"q": 0.0, "jumps": [0.25, 0.75], "delta": 0.05, "eps": [0.03, 0.04, 0.05, 0.06],
                    "scheme": "si", "tau": 0.5, "budget_seconds": 120.0, "t_max": 1e6,
                    "h_kind": "exp-d-gamma", "h_power": 2.0},
    "output": {"dir": None, "seed": 0, "parallelism": 1, "figures": True},
}


def load_file(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ArgumentError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ArgumentError(f"config file {path} is not valid TOML: {exc}") from None


def merge(base, override, where=""):
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        name = f"{where}{key}"
        if key not in out:
            raise ArgumentError(f"unknown config key {name!r}")
        if isinstance(out[key], dict):
            if not isinstance(val, dict):
                raise ArgumentError(f"config key {name!r} must be a table")
            if key == "potential":
                out[key] = dict(val)
            else:
                out[key] = merge(out[key], val, f"{name}.")
        else:
            out[key] = val
    return out


def resolve(file_path=None, overrides=None):
    """Defaults, overlaid by the file, overlaid by ``overrides`` (dotted keys)."""
    cfg = copy.deepcopy(DEFAULTS)
    if file_path:
        cfg = merge(cfg, load_file(file_path))
    for dotted, val in (overrides or {}).items():
        if val is None:
            continue
        section, key = dotted.split(".", 1)
        if section not in cfg or (section != "potential" and key not in cfg[section]):
            raise ArgumentError(f"unknown config key {dotted!r}")
        cfg[section][key] = val
    return cfg


def _field(name, fn):
    try:
        return fn()
    except ArgumentError as exc:
        raise type(exc)(f"{name}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ArgumentError(f"{name}: {exc}") from None


def build_potential(cfg):
    return _field("potential", lambda: PotentialSpec.from_config(cfg["potential"]))


def build_energy(cfg, spec=None):
    e = cfg["energy"]
    p = _field("energy", lambda: EnergyParams(float(e["epsilon"]), float(e["q"])))
    if spec is not None:
        _field("energy.q", lambda: p.check(spec))
    return p


def build_experiment_params(cfg, section, spec):
    """Parameters for experiments that work in rescaled units or sweep eps.

    Only ``q`` is read (from the experiment's own block); eps is a placeholder.
    """
    q = _field(f"{section}.q", lambda: float(cfg[section]["q"]))
    p = _field(f"{section}.q", lambda: EnergyParams(1.0, q))
    _field(f"{section}.q", lambda: p.check(spec))
    return p


def build_flow(cfg):
    f, s = cfg["flow"], cfg["simulate"]
    return _field("flow", lambda: FlowConfig(
        float(f["tau"]), float(f["t_end"]), f["scheme"], float(f["inner_tol"]),
        int(f["inner_max_iters"]), int(s["history_stride"]), int(s["snap_stride"])))


def output_dir(cfg, subcommand):
    d = cfg["output"]["dir"]
    if d:
        return Path(d)
    root = os.environ.get(OUTPUT_ENV)
    return Path(root or "shmeta-runs") / subcommand


def parse_float_list(text):
    """``"a,b,c"`` or ``"start:stop:count"`` (inclusive linspace) to floats."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    try:
        if ":" in text:
            a, b, c = text.split(":")
            count = int(c)
            if count < 1:
                raise ValueError("count must be positive")
            if count == 1:
                return [float(a)]
            step = (float(b) - float(a)) / (count - 1)
            return [float(a) + i * step for i in range(count)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ArgumentError(f"cannot parse number list {text!r}: {exc}") from None
