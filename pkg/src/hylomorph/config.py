"""Run configuration: TOML-subset files, overrides, validation, echo.

Configs use plain sections with scalars and arrays only.  Validation
happens before any computation and failures always name the offending
dotted key, so callers can map them to exit codes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .functionals import NkgModel, NlsModel, Nonlinearity, Potential
from .lattice import Grid, LatticeSpec, build_grid


class ConfigError(Exception):
    """Configuration problem; the message names the dotted key."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


def load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"parse error in {path}: {exc}")


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply --set key=value pairs; values parse as TOML scalars or arrays."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError("--set", f"expected key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError("--set", f"empty key in {item!r}")
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw.strip()
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(key, "path collides with a scalar value")
        node[parts[-1]] = value
    return cfg


_REQUIRED = object()


def _get(cfg: dict, key: str, default=_REQUIRED):
    node: Any = cfg
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is _REQUIRED:
                raise ConfigError(key, "required key is missing")
            return default
        node = node[part]
    return node


def _number(cfg: dict, key: str, default=None, minimum=None, strict_min=False):
    val = _get(cfg, key) if default is None else _get(cfg, key, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(key, f"expected a number, got {val!r}")
    val = float(val)
    if minimum is not None:
        if strict_min and not val > minimum:
            raise ConfigError(key, f"must be > {minimum}, got {val}")
        if not strict_min and not val >= minimum:
            raise ConfigError(key, f"must be >= {minimum}, got {val}")
    return val


def _integer(cfg: dict, key: str, default=None, minimum=None):
    val = _get(cfg, key) if default is None else _get(cfg, key, default)
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(key, f"expected an integer, got {val!r}")
    if minimum is not None and val < minimum:
        raise ConfigError(key, f"must be >= {minimum}, got {val}")
    return int(val)


@dataclass
class RunConfig:
    """Validated configuration with the constructed model objects."""

    raw: dict
    model_type: str
    grid: Grid
    model: NlsModel | NkgModel
    solver: dict
    evolve: dict
    output: dict


def build_run_config(cfg: dict) -> RunConfig:
    """Validate the model/grid sections and construct the model."""
    mtype = _get(cfg, "model.type")
    if mtype not in ("nls", "nkg"):
        raise ConfigError("model.type", f"must be 'nls' or 'nkg', got {mtype!r}")

    dim = _integer(cfg, "grid.dim")
    if dim not in (1, 2, 3):
        raise ConfigError("grid.dim", f"must be 1, 2 or 3, got {dim}")

    lattice_rows = _get(cfg, "model.lattice")
    try:
        matrix = np.asarray(lattice_rows, dtype=float).reshape(dim, dim)
    except (TypeError, ValueError):
        raise ConfigError("model.lattice", f"expected a {dim}x{dim} matrix of rows")
    try:
        lattice = LatticeSpec(dim, matrix)
    except ValueError as exc:
        raise ConfigError("model.lattice", str(exc))

    cells = _get(cfg, "grid.cells_per_dim")
    points = _get(cfg, "grid.points_per_cell")
    try:
        grid = build_grid(lattice, cells, points)
    except ValueError as exc:
        key = "grid.cells_per_dim" if "cells" in str(exc) else "grid.points_per_cell"
        raise ConfigError(key, str(exc))

    h = _number(cfg, "model.h", minimum=0.0)
    a = _number(cfg, "model.a", default=0.0, minimum=0.0)
    b = _number(cfg, "model.b", default=0.0, minimum=0.0)
    try:
        nonlinearity = Nonlinearity(h, a, b)
    except ValueError as exc:
        raise ConfigError("model.b", str(exc))

    if mtype == "nls":
        family = _get(cfg, "model.potential", "cosine")
        if family not in ("cosine",):
            raise ConfigError("model.potential", f"unknown family {family!r}")
        v0 = _number(cfg, "model.v0", default=0.0, minimum=0.0)
        model = NlsModel(grid, Potential(v0), nonlinearity)
    else:
        eta = _number(cfg, "model.mass_eta", default=0.0, minimum=0.0)
        try:
            model = NkgModel(grid, nonlinearity, eta)
        except ValueError as exc:
            raise ConfigError("model.h", str(exc))

    solver = {
        "step": _number(cfg, "solver.step", default=0.25, minimum=0.0, strict_min=True),
        "tol": _number(cfg, "solver.tol", default=1e-6, minimum=0.0, strict_min=True),
        "max_iter": _integer(cfg, "solver.max_iter", default=50000, minimum=1),
        "restarts": _integer(cfg, "solver.restarts", default=3, minimum=1),
        "seed": _integer(cfg, "solver.seed", default=0),
    }
    sigma_raw = _get(cfg, "solver.sigma", None)
    if sigma_raw is not None:
        if isinstance(sigma_raw, bool) or not isinstance(sigma_raw, (int, float, list)):
            raise ConfigError(
                "solver.sigma", f"expected a number or array, got {sigma_raw!r}"
            )
        solver["sigma"] = sigma_raw

    evolve = {
        "dt": _get(cfg, "evolve.dt", None),
        "steps": _get(cfg, "evolve.steps", None),
        "stride": _integer(cfg, "evolve.stride", default=100, minimum=1),
        "delta": _number(cfg, "evolve.delta", default=0.01, minimum=0.0),
        "horizon": _number(cfg, "evolve.horizon", default=10.0, minimum=0.0, strict_min=True),
        "initial": _get(cfg, "evolve.initial", None),
        "noise_seed": _integer(cfg, "evolve.noise_seed", default=1234),
    }

    output = {
        "directory": _get(cfg, "output.directory", "out"),
        "formats": _get(cfg, "output.formats", ["json", "csv"]),
    }
    if not isinstance(output["directory"], str):
        raise ConfigError("output.directory", "expected a string path")
    if not isinstance(output["formats"], list):
        raise ConfigError("output.formats", "expected an array of format names")
    for fmt in output["formats"]:
        if fmt not in ("json", "csv", "snapshots"):
            raise ConfigError("output.formats", f"unknown format {fmt!r}")

    return RunConfig(cfg, mtype, grid, model, solver, evolve, output)


def require_sigma_scalar(rc: RunConfig) -> float:
    if "sigma" not in rc.solver:
        raise ConfigError("solver.sigma", "required key is missing")
    sigma = rc.solver["sigma"]
    if isinstance(sigma, list):
        if len(sigma) != 1:
            raise ConfigError("solver.sigma", "this command needs a single charge")
        sigma = sigma[0]
    if isinstance(sigma, bool) or not isinstance(sigma, (int, float)) or sigma <= 0:
        raise ConfigError("solver.sigma", f"must be a positive number, got {sigma!r}")
    return float(sigma)


def require_sigma_list(rc: RunConfig) -> list[float]:
    if "sigma" not in rc.solver:
        raise ConfigError("solver.sigma", "required key is missing")
    sigma = rc.solver["sigma"]
    values = sigma if isinstance(sigma, list) else [sigma]
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
            raise ConfigError("solver.sigma", f"entries must be positive numbers, got {v!r}")
        out.append(float(v))
    if sorted(out) != out:
        raise ConfigError("solver.sigma", "charges must be sorted increasingly")
    return out


def require_evolve(rc: RunConfig, *, need_initial: bool) -> dict:
    ev = dict(rc.evolve)
    if ev["dt"] is None:
        raise ConfigError("evolve.dt", "required key is missing")
    if isinstance(ev["dt"], bool) or not isinstance(ev["dt"], (int, float)) or ev["dt"] <= 0:
        raise ConfigError("evolve.dt", f"must be a positive number, got {ev['dt']!r}")
    ev["dt"] = float(ev["dt"])
    if need_initial:
        if ev["steps"] is None:
            raise ConfigError("evolve.steps", "required key is missing")
        if isinstance(ev["steps"], bool) or not isinstance(ev["steps"], int) or ev["steps"] < 1:
            raise ConfigError("evolve.steps", f"must be a positive integer, got {ev['steps']!r}")
        if not isinstance(ev["initial"], str) or not ev["initial"]:
            raise ConfigError("evolve.initial", "required key is missing")
    return ev


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, list):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise TypeError(f"cannot render {type(value).__name__} as TOML")


def echo_toml(rc: RunConfig) -> str:
    """Canonical TOML text that reproduces this validated configuration."""
    sections: dict[str, dict] = {
        "model": {"type": rc.model_type},
        "grid": {},
        "solver": {},
        "evolve": {},
        "output": {},
    }
    nl = rc.model.nonlinearity
    sections["model"]["h"] = nl.h
    sections["model"]["a"] = nl.a
    sections["model"]["b"] = nl.b
    sections["model"]["lattice"] = [
        [float(x) for x in row] for row in rc.grid.lattice.matrix
    ]
    if rc.model_type == "nls":
        sections["model"]["potential"] = "cosine"
        sections["model"]["v0"] = rc.model.potential.v0
    else:
        sections["model"]["mass_eta"] = rc.model.mass_eta
    sections["grid"]["dim"] = rc.grid.dim
    sections["grid"]["cells_per_dim"] = list(rc.grid.cells_per_dim)
    sections["grid"]["points_per_cell"] = list(rc.grid.points_per_cell)
    sections["solver"] = {k: v for k, v in rc.solver.items()}
    sections["evolve"] = {k: v for k, v in rc.evolve.items() if v is not None}
    sections["output"] = dict(rc.output)

    lines = []
    for name, body in sections.items():
        if not body:
            continue
        lines.append(f"[{name}]")
        for key in sorted(body):
            lines.append(f"{key} = {_toml_scalar(body[key])}")
        lines.append("")
    return "\n".join(lines)
