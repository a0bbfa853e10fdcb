"""Command-line front end driven by a JSON configuration file.

Usage::

    darksol --config run.json [--output-dir DIR] [--seed N]

The config names one command (solve, sweep, dispersion, check, evolve,
oracle), a kernel, a grid and a block of command options. Every run writes
``meta.json`` (resolved config, versions, timings, config hash) plus the
command's CSV outputs. Exit status: 0 success, 1 config error,
2 non-convergence, 3 numerical blowup.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import math
import platform
import sys
import time
from dataclasses import fields as dc_fields
from pathlib import Path
from typing import Any, Optional

import numpy as np
import scipy

from . import __version__
from .closed_form import KdvAnsatz, gp_soliton, gp_soliton_invariants, kdv_ansatz, kdv_predictions
from .curve import diagnose, estimate_q_star, sweep
from .dynamics import BlowupError, EvolutionConfig, evolve, perturb_field, stability_experiment
from .fields import apriori_check, energy, momentum, reconstruct_complex
from .grid import make_grid
from .io import write_curve_csv, write_dispersion_csv, write_fields_csv, write_json, write_trajectory_csv
from .kernels import (
    check_H0,
    check_H1,
    check_H2prime,
    check_hypotheses,
    dispersion,
    dispersion_extrema,
    kernel_from_spec,
    speed_of_sound,
)
from .minimizer import BoundaryDecayError, MinimizerConfig, minimize

log = logging.getLogger("darksol")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_BLOWUP = 0, 1, 2, 3

COMMANDS = ("solve", "sweep", "dispersion", "check", "evolve", "oracle")

# defaults for each command block; None marks a required key
BLOCK_DEFAULTS: dict[str, dict[str, Any]] = {
    "solve": {"q": None, "init": "kdv", "noise": 0.0},
    "sweep": {"q_values": None, "init": "kdv", "slope_threshold": 0.02},
    "dispersion": {"xi_min": 0.0, "xi_max": 1.2, "n_samples": 1201},
    "check": {"xi_max": 100.0, "search_budget": 600},
    "evolve": {
        "initial": None,
        "dt": 1e-3,
        "t_end": 1.0,
        "record_every": 100,
        "perturbation_amplitude": 0.0,
        "stability": False,
        "snapshot": True,
    },
    "oracle": {"c": None, "epsilon": None, "omega": 1.0},
}
INITIAL_DEFAULTS = {"source": None, "c": None, "q": None, "init": "gp"}
TOP_KEYS = {"command", "kernel", "grid", "output_dir", "seed", "minimizer"} | set(COMMANDS)


class ConfigError(ValueError):
    pass


class NonConvergence(RuntimeError):
    pass


def _merge_block(name: str, given: Any, defaults: dict) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ConfigError(f"block {name!r} must be an object")
    extra = set(given) - set(defaults)
    if extra:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(extra)}")
    out = dict(defaults)
    out.update(given)
    return out


def resolve_config(raw: dict, output_dir: Optional[str] = None, seed: Optional[int] = None) -> dict:
    """Validate a raw config and fill defaults; raises :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(raw) - TOP_KEYS
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    cmd = raw.get("command")
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {list(COMMANDS)}, got {cmd!r}")
    other = [c for c in COMMANDS if c != cmd and c in raw]
    if other:
        raise ConfigError(f"blocks for other commands present: {other}")
    cfg: dict = {"command": cmd}

    if "kernel" not in raw:
        raise ConfigError("missing kernel")
    try:
        kern = kernel_from_spec(raw["kernel"])
    except ValueError as exc:
        raise ConfigError(f"kernel: {exc}") from exc
    cfg["kernel"] = kern.to_spec()

    grid = _merge_block("grid", raw.get("grid"), {"n_points": 8192, "length": 256.0})
    try:
        make_grid(grid["n_points"], grid["length"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"grid: {exc}") from exc
    cfg["grid"] = {"n_points": int(grid["n_points"]), "length": float(grid["length"])}

    mdefaults = MinimizerConfig().to_dict()
    mblock = _merge_block("minimizer", raw.get("minimizer"), mdefaults)
    try:
        MinimizerConfig(**mblock)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"minimizer: {exc}") from exc
    cfg["minimizer"] = mblock

    block = _merge_block(cmd, raw.get(cmd), BLOCK_DEFAULTS[cmd])
    _validate_block(cmd, block)
    cfg[cmd] = block

    cfg["output_dir"] = str(output_dir if output_dir is not None else raw.get("output_dir", "output"))
    s = seed if seed is not None else raw.get("seed", 0)
    if not isinstance(s, int) or isinstance(s, bool) or s < 0:
        raise ConfigError("seed must be a nonnegative integer")
    cfg["seed"] = s
    return cfg


def _num(block, key, positive=False, allow_none=False):
    v = block[key]
    if v is None and allow_none:
        return
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key} must be a finite number")
    if positive and v <= 0:
        raise ConfigError(f"{key} must be positive")


def _validate_block(cmd: str, b: dict) -> None:
    for k, v in b.items():
        if v is None and k in ("q", "q_values", "initial") and not (cmd == "oracle"):
            raise ConfigError(f"{cmd}.{k} is required")
    if cmd == "solve":
        _num(b, "q", positive=True)
        _num(b, "noise")
        if b["init"] not in ("kdv", "gp"):
            raise ConfigError("solve.init must be 'kdv' or 'gp'")
    elif cmd == "sweep":
        qv = b["q_values"]
        if isinstance(qv, dict):
            extra = set(qv) - {"start", "stop", "step"}
            if extra or len(qv) != 3:
                raise ConfigError("sweep.q_values range needs exactly start, stop, step")
            n = int(round((qv["stop"] - qv["start"]) / qv["step"])) + 1
            if n < 1:
                raise ConfigError("empty q range")
            b["q_values"] = [round(qv["start"] + i * qv["step"], 12) for i in range(n)]
        if not isinstance(b["q_values"], list) or not b["q_values"]:
            raise ConfigError("sweep.q_values must be a list or a range object")
        qs = b["q_values"]
        if any(not isinstance(q, (int, float)) or q <= 0 for q in qs) or any(y <= x for x, y in zip(qs, qs[1:])):
            raise ConfigError("sweep.q_values must be positive and strictly ascending")
        if b["init"] not in ("kdv", "gp"):
            raise ConfigError("sweep.init must be 'kdv' or 'gp'")
        _num(b, "slope_threshold", positive=True)
    elif cmd == "dispersion":
        for k in ("xi_min", "xi_max"):
            _num(b, k)
        if not 0 <= b["xi_min"] < b["xi_max"]:
            raise ConfigError("need 0 <= xi_min < xi_max")
        if not isinstance(b["n_samples"], int) or b["n_samples"] < 3:
            raise ConfigError("n_samples must be an integer >= 3")
    elif cmd == "check":
        _num(b, "xi_max", positive=True)
        if not isinstance(b["search_budget"], int) or b["search_budget"] < 100:
            raise ConfigError("search_budget must be an integer >= 100")
    elif cmd == "evolve":
        ini = _merge_block("evolve.initial", b["initial"], INITIAL_DEFAULTS)
        if ini["source"] not in ("gp", "minimizer"):
            raise ConfigError("evolve.initial.source must be 'gp' or 'minimizer'")
        if ini["source"] == "gp":
            _num(ini, "c")
            if not 0 <= ini["c"] < math.sqrt(2):
                raise ConfigError("evolve.initial.c must lie in [0, sqrt(2))")
        else:
            _num(ini, "q", positive=True)
        b["initial"] = ini
        try:
            EvolutionConfig(dt=b["dt"], t_end=b["t_end"], record_every=b["record_every"],
                            perturbation_amplitude=b["perturbation_amplitude"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"evolve: {exc}") from exc
    elif cmd == "oracle":
        if (b["c"] is None) == (b["epsilon"] is None):
            raise ConfigError("oracle needs exactly one of c or epsilon")
        if b["c"] is not None:
            _num(b, "c")
            if not 0 < b["c"] < math.sqrt(2):
                raise ConfigError("oracle.c must lie in (0, sqrt(2))")
        else:
            _num(b, "epsilon", positive=True)
            _num(b, "omega", positive=True)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _versions() -> dict:
    return {
        "darksol": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def _apriori_dict(sol) -> dict:
    rep = apriori_check(sol.E, sol.q, sol.field)
    return {"ok": rep.ok, "eta_sup": rep.eta_sup, "eta_l2_sq": rep.eta_l2_sq, "bound": rep.bound,
            "momentum_bound": rep.momentum_bound}


def _solution_dict(sol) -> dict:
    return {
        "q": sol.q, "E": sol.E, "c_est": sol.c_est, "residual_norm": sol.residual_norm,
        "iterations": sol.iterations, "converged": sol.converged, "multiplier": sol.multiplier,
        "grad_norm": sol.grad_norm, "clamp_active": sol.clamp_active, "message": sol.message,
        "apriori": _apriori_dict(sol), "stats": sol.stats,
    }


def _run_command(cfg: dict, out: Path, timings: dict, result: dict) -> None:
    """Run the command, filling ``result`` as it goes so failures keep partial output."""
    cmd = cfg["command"]
    kern = kernel_from_spec(cfg["kernel"])
    grid = make_grid(cfg["grid"]["n_points"], cfg["grid"]["length"])
    mcfg = MinimizerConfig(**cfg["minimizer"])
    b = cfg[cmd]
    seed = cfg["seed"]
    t0 = time.perf_counter()

    if cmd == "solve":
        sol = minimize(kern, b["q"], b["init"], mcfg, grid=grid, noise=b["noise"], seed=seed)
        write_fields_csv(out / "fields.csv", sol.field)
        result.update(_solution_dict(sol))
        if not sol.converged:
            timings["solve"] = time.perf_counter() - t0
            raise NonConvergence(f"solve: {sol.message}")

    elif cmd == "sweep":
        pts = sweep(kern, b["q_values"], mcfg, grid=grid, first_init=b["init"])
        write_curve_csv(out / "curve.csv", pts)
        omega = check_H1(kern).omega
        try:
            diag = diagnose(pts, omega=omega).to_dict()
        except ValueError as exc:
            diag = {"error": str(exc), "q_star_estimate": estimate_q_star(pts, b["slope_threshold"])}
        write_json(out / "diagnostics.json", diag)
        q_star = estimate_q_star(pts, b["slope_threshold"])
        failed = [p.q for p in pts if not p.converged and (q_star is None or p.q < q_star)]
        result.update({"q_star_estimate": q_star, "failed_below_q_star": failed,
                       "apriori_ok": all(_apriori_dict(p.solution)["ok"] for p in pts
                                         if p.converged and p.solution is not None)})
        if failed:
            timings["sweep"] = time.perf_counter() - t0
            raise NonConvergence(f"sweep: points {failed} did not converge below the plateau")

    elif cmd == "dispersion":
        xi = np.linspace(b["xi_min"], b["xi_max"], b["n_samples"])
        om = dispersion(kern, xi)
        write_dispersion_csv(out / "dispersion.csv", xi, om)
        lo = b["xi_min"] if b["xi_min"] > 0 else (b["xi_max"] - b["xi_min"]) * 1e-6
        ext = dispersion_extrema(kern, lo, b["xi_max"], max(b["n_samples"], 1001))
        result.update({"extrema": [{"xi": e[0], "omega": e[1], "kind": e[2]} for e in ext],
                       "speed_of_sound": speed_of_sound(kern)})

    elif cmd == "check":
        rep = check_hypotheses(kern, xi_max=b["xi_max"], search_budget=b["search_budget"], seed=seed)
        write_json(out / "hypotheses.json", rep.to_dict())
        result.update({"h0_ok": rep.h0_ok, "h1_ok": rep.h1_ok, "h2prime": rep.h2prime.status,
                       "omega": rep.omega})

    elif cmd == "evolve":
        ini = b["initial"]
        ecfg = EvolutionConfig(dt=b["dt"], t_end=b["t_end"], record_every=b["record_every"],
                               perturbation_amplitude=b["perturbation_amplitude"], seed=seed)
        if ini["source"] == "gp":
            start = gp_soliton(ini["c"], grid).complex
            sol = None
        else:
            sol = minimize(kern, ini["q"], ini["init"], mcfg, grid=grid)
            if not sol.converged:
                raise NonConvergence(f"evolve: initial minimizer did not converge ({sol.message})")
            start = reconstruct_complex(sol.field)
        if b["stability"]:
            if sol is None:
                raise ConfigError("evolve.stability needs initial.source = 'minimizer'")
            max_dist, tr = stability_experiment(sol, kern, ecfg)
            result["max_dist"] = max_dist
            result["initial_dist"] = float(tr.distances[0])
        else:
            tr = evolve(perturb_field(start, ecfg.perturbation_amplitude, seed), kern, ecfg)
        write_trajectory_csv(out / "trajectory.csv", tr)
        if b["snapshot"] and tr.final is not None:
            write_fields_csv(out / "final_fields.csv", tr.final)
        result.update({"energy_drift": tr.energy_drift(), "momentum_drift": tr.momentum_drift(),
                       "dt_guard_ok": tr.dt_guard_ok})

    elif cmd == "oracle":
        if b["c"] is not None:
            sol = gp_soliton(b["c"], grid)
            E, p = gp_soliton_invariants(b["c"])
            write_fields_csv(out / "fields.csv", sol.hydro)
            result.update({"E": E, "p": p, "E_grid": energy(sol.hydro, kern), "p_grid": momentum(sol.hydro)})
        else:
            a = KdvAnsatz(b["epsilon"], b["omega"])
            h = kdv_ansatz(a, grid)
            E_pred, p_pred = kdv_predictions(a)
            write_fields_csv(out / "fields.csv", h)
            result.update({"E_pred": E_pred, "p_pred": p_pred, "E_grid": energy(h, kern),
                           "p_grid": momentum(h)})

    timings[cmd] = time.perf_counter() - t0


def run(config_path, output_dir: Optional[str] = None, seed: Optional[int] = None) -> int:
    """Execute one configured command; returns the exit status."""
    t_start = time.perf_counter()
    try:
        with open(config_path) as fh:
            raw = json.load(fh)
        cfg = resolve_config(raw, output_dir, seed)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG

    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    timings: dict = {}
    meta = {"config": copy.deepcopy(cfg), "config_hash": config_hash(cfg), "versions": _versions(),
            "timings": timings, "result": {}}
    status = EXIT_OK
    try:
        _run_command(cfg, out, timings, meta["result"])
    except ConfigError as exc:
        log.error("config error: %s", exc)
        meta["error"] = f"config: {exc}"
        status = EXIT_CONFIG
    except (NonConvergence, BoundaryDecayError) as exc:
        log.error("non-convergence: %s", exc)
        meta["error"] = f"non-convergence: {exc}"
        status = EXIT_NONCONVERGED
    except BlowupError as exc:
        log.error("blowup: %s", exc)
        meta["error"] = f"blowup: {exc}"
        status = EXIT_BLOWUP
    timings["total"] = time.perf_counter() - t_start
    meta["exit_status"] = status
    write_json(out / "meta.json", meta)
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="darksol", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", required=True, help="path to the JSON run configuration")
    parser.add_argument("--output-dir", default=None, help="override the configured output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the configured random seed")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    return run(args.config, args.output_dir, args.seed)


if __name__ == "__main__":
    sys.exit(main())
