"""Command-line front end: configuration, dispatch, and report emission.

Every run writes a JSON summary (deterministic bytes for a fixed config and
seed), time-series commands add CSV, and field data moves through binary
snapshots.  Exit codes: 0 success, 2 configuration error, 3 non-convergence
under --strict, 4 blowup.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    RunConfig,
    apply_overrides,
    build_run_config,
    echo_toml,
    load_config,
    require_evolve,
    require_sigma_list,
    require_sigma_scalar,
)
from .dynamics import (
    CflError,
    evolve,
    fit_phase_rate,
    make_reference,
    nkg_cfl_limit,
    stability_experiment,
)
from .functionals import NkgModel, NlsModel
from .hylomorphy import check_hylomorphy
from .snapshots import (
    SnapshotFormatError,
    _atomic_write,
    read_snapshot,
    write_snapshot,
)
from .solver import SolverOptions, minimize, sigma_sweep, soliton_state

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_BLOWUP = 4

DEFINITIONS = {
    "alpha": "sqrt(inf_s 2 W(s)/s^2), best bulk energy-per-charge rate",
    "e0_lower": "closed-form lower bound for the one-cell small-field rate",
    "e0_upper": "closed-form upper bound for the one-cell small-field rate",
    "e0_rayleigh": "minimized one-cell Rayleigh quotient (periodic cell)",
    "lambda_star_upper": "min of E/|C| over plateau test profiles",
    "margin": "slack of the binding inequality (NLS: h^2/2 - alpha^2/2 - max V; NKG: min h - alpha)",
    "passes": "margin > 0",
    "lambda": "E/|C| of the minimizer",
    "omega": "Lagrange multiplier / standing-wave frequency",
    "energy": "total energy E",
    "charge": "|C|, the hylenic charge magnitude",
    "residual": "relative stationary-equation residual",
    "sigma": "target charge |C|",
    "E": "total energy at the monitor time",
    "C": "hylenic charge at the monitor time",
    "orbit_distance": "quadratic-norm distance to the phase x translation orbit",
    "lyapunov": "(E - c_sigma)^2 + (|C| - sigma)^2",
    "fitted_omega": "minus the least-squares rate of the overlap phase",
    "charge_drift": "max_t |C(t) - C(0)| / |C(0)|",
    "energy_drift": "max_t |E(t) - E(0)| / |E(0)|",
    "max_orbit_distance": "max_t orbit_distance(t)",
    "max_orbit_distance_rel": "max_t orbit_distance(t) / quadratic norm of the reference",
    "lyapunov_initial": "lyapunov at t = 0",
    "lyapunov_max": "max_t lyapunov(t)",
    "existence_flag": "minimizer rate beats the one-cell threshold e0",
    "lambda_upper": "E/|C| of the minimizer at this sigma (upper estimate)",
    "uh_product": "sigma times lambda_upper",
}


def _sanitize(obj):
    """Make a summary JSON-serializable and strictly standard (no NaN/Inf)."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    return obj


def _write_json(path: str, summary: dict) -> None:
    payload = json.dumps(_sanitize(summary), sort_keys=True, indent=2)
    _atomic_write(path, payload.encode() + b"\n")


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    def cell(v):
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (float, np.floating)):
            return repr(float(v))
        return str(v)

    lines = [",".join(header)]
    lines += [",".join(cell(v) for v in row) for row in rows]
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def _threads_cap() -> int:
    raw = os.environ.get("HYLOMORPH_THREADS")
    if raw is None:
        return 1
    try:
        val = int(raw)
    except ValueError:
        raise ConfigError("HYLOMORPH_THREADS", f"expected an integer, got {raw!r}")
    if val < 1:
        raise ConfigError("HYLOMORPH_THREADS", f"must be >= 1, got {val}")
    return val


def _outdir(rc: RunConfig) -> str:
    directory = rc.output["directory"]
    os.makedirs(directory, exist_ok=True)
    return directory


def _solver_options(rc: RunConfig, sigma: float) -> SolverOptions:
    s = rc.solver
    return SolverOptions(
        sigma=sigma,
        step=s["step"],
        tol=s["tol"],
        max_iter=s["max_iter"],
        restarts=s["restarts"],
        seed=s["seed"],
    )


def _model_facts(rc: RunConfig) -> dict:
    grid = rc.grid
    facts = {
        "type": rc.model_type,
        "dim": grid.dim,
        "total_points": grid.total_points,
        "quadrature_weight": grid.weight,
        "box_volume": grid.box_volume,
        "inradius": grid.inradius(),
        "h": rc.model.nonlinearity.h,
        "a": rc.model.nonlinearity.a,
        "b": rc.model.nonlinearity.b,
    }
    if isinstance(rc.model, NlsModel):
        facts["v0"] = rc.model.potential.v0
    else:
        facts["mass_eta"] = rc.model.mass_eta
        facts["h_min"] = rc.model.h_min
        facts["h_max"] = rc.model.h_max
        facts["cfl_limit"] = nkg_cfl_limit(rc.model)
    return facts


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_describe(rc: RunConfig, args) -> int:
    out = _outdir(rc)
    report = check_hylomorphy(rc.model)
    summary = {
        "command": "describe",
        "model": _model_facts(rc),
        "derived": {
            "alpha": report.alpha,
            "margin": report.margin,
            "passes": report.passes,
            "e0_lower": report.e0_lower,
            "e0_upper": report.e0_upper,
        },
        "threads": _threads_cap(),
        "definitions": {
            k: DEFINITIONS[k]
            for k in ("alpha", "margin", "passes", "e0_lower", "e0_upper")
        },
    }
    _write_json(os.path.join(out, "describe.json"), summary)
    echo = echo_toml(rc)
    with open(os.path.join(out, "config_echo.toml"), "w") as fh:
        fh.write(echo)
    sys.stdout.write(echo)
    return EXIT_OK


def _cmd_hylomorphy(rc: RunConfig, args) -> int:
    out = _outdir(rc)
    report = check_hylomorphy(rc.model)
    summary = {
        "command": "hylomorphy",
        "model": _model_facts(rc),
        "alpha": report.alpha,
        "e0_lower": report.e0_lower,
        "e0_upper": report.e0_upper,
        "e0_rayleigh": report.e0_rayleigh,
        "lambda_star_upper": report.lambda_star_upper,
        "margin": report.margin,
        "passes": report.passes,
        "definitions": {
            k: DEFINITIONS[k]
            for k in (
                "alpha",
                "e0_lower",
                "e0_upper",
                "e0_rayleigh",
                "lambda_star_upper",
                "margin",
                "passes",
            )
        },
    }
    _write_json(os.path.join(out, "hylomorphy.json"), summary)
    print(f"hylomorphy margin {report.margin:.6g} passes={report.passes}")
    return EXIT_OK


def _cmd_minimize(rc: RunConfig, args) -> int:
    out = _outdir(rc)
    sigma = require_sigma_scalar(rc)
    report = check_hylomorphy(rc.model)
    result = minimize(rc.model, _solver_options(rc, sigma))
    snap_name = "minimizer.hylo"
    snap_path = os.path.join(out, snap_name)
    write_snapshot(snap_path, soliton_state(rc.model, result))
    summary = {
        "command": "minimize",
        "model": _model_facts(rc),
        "sigma": sigma,
        "omega": result.omega,
        "energy": result.energy,
        "charge": result.charge,
        "lambda": result.lam,
        "residual": result.residual,
        "iterations": result.iterations,
        "converged": result.converged,
        "snapshot": snap_name,
        "hylomorphy_passes": report.passes,
        "hylomorphy_margin": report.margin,
        "definitions": {
            k: DEFINITIONS[k]
            for k in ("sigma", "omega", "energy", "charge", "lambda", "residual", "margin")
        },
    }
    _write_json(os.path.join(out, "minimize.json"), summary)
    if not report.passes:
        print(
            f"warning: binding inequality fails (margin {report.margin:.6g}); "
            "the minimizer may be delocalized",
            file=sys.stderr,
        )
    print(
        f"minimize sigma={sigma:g}: converged={result.converged} "
        f"residual={result.residual:.3e} energy={result.energy:.10g}"
    )
    if args.strict and not result.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_sweep(rc: RunConfig, args) -> int:
    out = _outdir(rc)
    sigmas = require_sigma_list(rc)
    rows = sigma_sweep(rc.model, sigmas, _solver_options(rc, sigmas[0]))
    table = [
        [r.sigma, r.lambda_upper, r.energy, r.omega, r.converged, r.existence_flag]
        for r in rows
    ]
    csv_name = "sweep.csv"
    csv_path = os.path.join(out, csv_name)
    _write_csv(
        csv_path,
        ["sigma", "lambda_upper", "E", "omega", "converged", "existence_flag"],
        table,
    )
    summary = {
        "command": "sweep",
        "model": _model_facts(rc),
        "csv": csv_name,
        "rows": [
            {
                "sigma": r.sigma,
                "lambda_upper": r.lambda_upper,
                "energy": r.energy,
                "omega": r.omega,
                "converged": r.converged,
                "existence_flag": r.existence_flag,
                "uh_product": r.uh_product,
                "uh_increasing": r.uh_increasing,
            }
            for r in rows
        ],
        "definitions": {
            k: DEFINITIONS[k]
            for k in ("sigma", "lambda_upper", "omega", "existence_flag", "uh_product")
        },
    }
    _write_json(os.path.join(out, "sweep.json"), summary)
    print(f"sweep over {len(rows)} charges -> {csv_path}")
    if args.strict and not all(r.converged for r in rows):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _trajectory_csv(path: str, traj) -> None:
    rows = [
        [t, e, c, d, v]
        for t, e, c, d, v in zip(
            traj.times, traj.energy, traj.charge, traj.orbit_distance, traj.lyapunov
        )
    ]
    _write_csv(path, ["t", "E", "C", "orbit_distance", "lyapunov"], rows)


def _cmd_evolve(rc: RunConfig, args) -> int:
    out = _outdir(rc)
    ev = require_evolve(rc, need_initial=True)
    try:
        state0 = read_snapshot(ev["initial"], rc.grid)
    except FileNotFoundError:
        raise ConfigError("evolve.initial", f"snapshot not found: {ev['initial']}")
    except SnapshotFormatError as exc:
        raise ConfigError("evolve.initial", str(exc))
    if isinstance(rc.model, NlsModel) and not hasattr(state0, "values"):
        raise ConfigError("evolve.initial", "snapshot holds an NKG pair but the model is nls")
    if isinstance(rc.model, NkgModel) and not hasattr(state0, "psi"):
        raise ConfigError("evolve.initial", "snapshot holds a single field but the model is nkg")
    reference = make_reference(rc.model, state0)
    try:
        traj = evolve(
            rc.model,
            state0,
            ev["dt"],
            ev["steps"],
            stride=ev["stride"],
            reference=reference,
            store_fields="snapshots" in rc.output["formats"],
        )
    except CflError as exc:
        raise ConfigError("evolve.dt", str(exc))
    csv_name = "evolve.csv"
    _trajectory_csv(os.path.join(out, csv_name), traj)
    snap_names = []
    if "snapshots" in rc.output["formats"]:
        for t, state in traj.snapshots:
            name = f"evolve_{int(round(t / ev['dt'])):08d}.hylo"
            write_snapshot(os.path.join(out, name), state)
            snap_names.append(name)
    e0, c0 = traj.energy[0], traj.charge[0]
    summary = {
        "command": "evolve",
        "model": _model_facts(rc),
        "dt": ev["dt"],
        "steps": ev["steps"],
        "stride": ev["stride"],
        "csv": csv_name,
        "snapshots": snap_names,
        "blowup": traj.blowup,
        "blowup_time": traj.blowup_time,
        "charge_drift": float(np.max(np.abs(traj.charge - c0)) / max(abs(c0), 1e-300)),
        "energy_drift": float(np.max(np.abs(traj.energy - e0)) / max(abs(e0), 1e-300)),
        "max_orbit_distance": float(np.max(traj.orbit_distance)),
        "fitted_omega": -fit_phase_rate(traj) if len(traj.times) > 1 else None,
        "definitions": {
            k: DEFINITIONS[k]
            for k in (
                "charge_drift",
                "energy_drift",
                "max_orbit_distance",
                "fitted_omega",
                "orbit_distance",
                "lyapunov",
            )
        },
    }
    _write_json(os.path.join(out, "evolve.json"), summary)
    print(
        f"evolve {ev['steps']} steps: blowup={traj.blowup} "
        f"charge_drift={summary['charge_drift']:.3e}"
    )
    if traj.blowup:
        return EXIT_BLOWUP
    return EXIT_OK


def _cmd_stability(rc: RunConfig, args) -> int:
    out = _outdir(rc)
    sigma = require_sigma_scalar(rc)
    ev = require_evolve(rc, need_initial=False)
    result = minimize(rc.model, _solver_options(rc, sigma))
    if not result.converged:
        print("minimizer did not converge; stability run skipped", file=sys.stderr)
        return EXIT_NOT_CONVERGED if args.strict else EXIT_OK
    try:
        report = stability_experiment(
            rc.model,
            result,
            ev["delta"],
            ev["horizon"],
            ev["dt"],
            seed=ev["noise_seed"],
        )
    except CflError as exc:
        raise ConfigError("evolve.dt", str(exc))
    csv_name = "stability.csv"
    _trajectory_csv(os.path.join(out, csv_name), report.trajectory)
    summary = {
        "command": "stability",
        "model": _model_facts(rc),
        "sigma": sigma,
        "delta": report.delta,
        "horizon": ev["horizon"],
        "dt": ev["dt"],
        "csv": csv_name,
        "blowup": report.blowup,
        "max_orbit_distance": report.max_orbit_distance,
        "max_orbit_distance_rel": report.max_orbit_distance_rel,
        "lyapunov_initial": report.lyapunov_initial,
        "lyapunov_max": report.lyapunov_max,
        "omega": result.omega,
        "best_cell_final": int(report.trajectory.best_cell_index[-1]),
        "definitions": {
            k: DEFINITIONS[k]
            for k in (
                "sigma",
                "omega",
                "max_orbit_distance",
                "max_orbit_distance_rel",
                "lyapunov_initial",
                "lyapunov_max",
            )
        },
    }
    _write_json(os.path.join(out, "stability.json"), summary)
    print(
        f"stability delta={report.delta:g}: max_d={report.max_orbit_distance:.4g} "
        f"lyap_max/init={report.lyapunov_max / max(report.lyapunov_initial, 1e-300):.3g} "
        f"blowup={report.blowup}"
    )
    if report.blowup:
        return EXIT_BLOWUP
    return EXIT_OK


_COMMANDS = {
    "describe": _cmd_describe,
    "hylomorphy": _cmd_hylomorphy,
    "minimize": _cmd_minimize,
    "sweep": _cmd_sweep,
    "evolve": _cmd_evolve,
    "stability": _cmd_stability,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hylomorph",
        description="Charge-constrained solitary waves on lattice-periodic backgrounds",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="TOML-subset configuration file")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a configuration key (repeatable)",
    )
    parser.add_argument(
        "--strict",
        action="store_true",
        help="exit with status 3 when a minimization does not converge",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        apply_overrides(cfg, args.set)
        rc = build_run_config(cfg)
        _threads_cap()
        return _COMMANDS[args.command](rc, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
