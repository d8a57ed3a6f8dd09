"""TOML-configured command-line driver.

Subcommands: `run <config>`, `validate <config>`, `print-defaults`.
Each run writes tab-separated tables plus a .meta.toml sidecar; every table
carries the SHA-256 hash of the producing configuration in its first line,
and identical configurations reproduce byte-identical tables (only the
sidecar's wall-time entry may differ).  The FLOCKSIM_OUTPUT_DIR environment
variable overrides [run] output_dir.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib  # Python 3.11+
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import __version__
from .cache import run_ensemble_cached
from .classical import (
    ClassicalParams,
    canonical_three_particle_cycle,
    kolmogorov_rates,
    run_classical_ensemble,
)
from .hydro import (
    BlowUpError,
    ClosureParams,
    FieldState,
    gaussian_cluster,
    integrate_fields,
    noisy_homogeneous,
    peak_positions,
)
from .model import ModelParams
from .oracle import expectation_m2, initial_density, integrate, trace_distance
from .trajectory import TrajectoryConfig, get_basis, initial_state, run_ensemble

MODES = ("trajectory", "oracle-compare", "phase-scan", "hydro", "classical", "kolmogorov")

_REQUIRED = object()

# section -> key -> (coercion, default); _REQUIRED keys must be present
_SCHEMA = {
    "run": {
        "mode": (str, _REQUIRED),
        "output_dir": (str, "results"),
        "label": (str, ""),
        "cache_dir": (str, ""),
    },
    "model": {
        "L": (int, 4),
        "N": (int, -1),  # -1 means half filling (N = L)
        "h": (float, 0.2),
        "K": (float, 3.8),
        "r": (int, 2),  # consistent with the default L; production configs use r=4
        "kernel": (str, "exponential"),
        "gamma_motion": (float, 1.0),
        "gamma_align": (float, 1.0),
    },
    "trajectory": {
        "dt": (float, 0.01),
        "t_max": (float, 70.0),
        "seed": (int, 1),
        "n_traj": (int, 100),
        "chunk_size": (int, 16),
        "threads": (int, 1),
        "initial_state": (str, "plus"),
        "record_rho": (bool, False),
        "sample_spacing": (float, 0.5),
    },
    "oracle": {
        "dt": (float, 0.005),
    },
    "phase_scan": {
        "h_values": ("list_float", _REQUIRED),
        "L_values": ("list_int", [8]),
        "n_traj": (int, 500),
        "window_lo": (float, 40.0),
        "window_hi": (float, 70.0),
        "epsilon": (float, 0.02),
    },
    "hydro": {
        "closure": (str, "density"),
        "L": (int, 64),
        "K": (float, 4.0),
        "h": (float, 0.0),
        "gamma_motion": (float, 1.0),
        "gamma_align": (float, 1.0),
        "sigma2": (float, 0.125),
        "q": (float, 0.5),
        "gamma_rho": (float, 0.0),
        "gamma_m": (float, 0.0),
        "dt": (float, 0.01),
        "t_max": (float, 100.0),
        "sample_spacing": (float, 1.0),
        "initial": (str, "gaussian"),
        "width": (float, 0.5),
        "amplitude": (float, 0.5),
        "rho0": (float, 0.25),
        "m0": (float, 0.25),
        "noise_amplitude": (float, 5e-4),
        "noise_seed": (int, 0),
    },
    "classical": {
        "L": (int, 32),
        "K": (float, 3.5),
        "r": (int, 4),
        "prob_scale": (float, 0.1),
        "n_histories": (int, 200),
        "n_sweeps": (int, 5000),
        "seed": (int, 1),
        "record_every": (int, 10),
    },
    "kolmogorov": {
        "gamma": ("list_float", [1.0]),
        "K": ("list_float", [1.0]),
        "epsilon": ("list_float", [0.0]),
    },
}

_MODE_SECTIONS = {
    "trajectory": ("model", "trajectory"),
    "oracle-compare": ("model", "trajectory", "oracle"),
    "phase-scan": ("model", "trajectory", "phase_scan"),
    "hydro": ("hydro",),
    "classical": ("classical",),
    "kolmogorov": ("kolmogorov",),
}


class ConfigError(ValueError):
    """Raised for any configuration defect; the message names the key."""


def _coerce(section: str, key: str, spec, value):
    if spec is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"[{section}] {key}: expected a boolean, got {value!r}")
        return value
    if spec is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{section}] {key}: expected an integer, got {value!r}")
        return value
    if spec is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{section}] {key}: expected a number, got {value!r}")
        return float(value)
    if spec is str:
        if not isinstance(value, str):
            raise ConfigError(f"[{section}] {key}: expected a string, got {value!r}")
        return value
    if spec in ("list_float", "list_int"):
        scalar = float if spec == "list_float" else int
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, list) or not value:
            raise ConfigError(f"[{section}] {key}: expected a non-empty list, got {value!r}")
        out = []
        for v in value:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"[{section}] {key}: expected numbers, got {v!r}")
            if scalar is int and int(v) != v:
                raise ConfigError(f"[{section}] {key}: expected integers, got {v!r}")
            out.append(scalar(v))
        return out
    raise AssertionError(spec)


def parse_config(raw: dict) -> dict:
    """Validate a raw TOML mapping against the schema; returns typed config."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table")
    if "run" not in raw:
        raise ConfigError("missing [run] section")
    for section in raw:
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
    cfg = {}
    for section, keys in _SCHEMA.items():
        src = raw.get(section, {})
        if not isinstance(src, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in src:
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
        out = {}
        for key, (spec, default) in keys.items():
            if key in src:
                out[key] = _coerce(section, key, spec, src[key])
            elif default is _REQUIRED and section in _MODE_SECTIONS.get(
                raw["run"].get("mode", ""), ()
            ):
                raise ConfigError(f"missing required key {key!r} in section [{section}]")
            else:
                out[key] = default if default is not _REQUIRED else None
        cfg[section] = out
    mode = cfg["run"]["mode"]
    if mode not in MODES:
        raise ConfigError(f"[run] mode: expected one of {', '.join(MODES)}, got {mode!r}")
    if not cfg["run"]["label"]:
        cfg["run"]["label"] = mode.replace("-", "_")
    # cross-field checks for the sections the mode will actually consume
    if "model" in _MODE_SECTIONS[mode]:
        m = cfg["model"]
        if m["N"] == -1:
            m["N"] = m["L"]  # half filling: L of 2L single-particle modes
        try:
            _model_params(cfg)
        except ValueError as e:
            raise ConfigError(f"[model] invalid: {e}")
    if mode == "hydro":
        try:
            _closure_params(cfg["hydro"])
        except ValueError as e:
            raise ConfigError(f"[hydro] invalid: {e}")
        if cfg["hydro"]["initial"] not in ("gaussian", "noisy", "uniform"):
            raise ConfigError(
                f"[hydro] initial: expected gaussian, noisy or uniform, got {cfg['hydro']['initial']!r}"
            )
    if mode == "classical":
        try:
            _classical_params(cfg["classical"])
        except ValueError as e:
            raise ConfigError(f"[classical] invalid: {e}")
    if mode == "kolmogorov":
        k = cfg["kolmogorov"]
        n = max(len(k["gamma"]), len(k["K"]), len(k["epsilon"]))
        for key in ("gamma", "K", "epsilon"):
            if len(k[key]) == 1:
                k[key] = k[key] * n
            elif len(k[key]) != n:
                raise ConfigError(f"[kolmogorov] {key}: length must be 1 or {n}")
    if mode == "phase-scan":
        ps = cfg["phase_scan"]
        if ps["window_hi"] <= ps["window_lo"]:
            raise ConfigError("[phase_scan] window_hi: must exceed window_lo")
        if ps["window_hi"] > cfg["trajectory"]["t_max"] + 1e-9:
            raise ConfigError("[phase_scan] window_hi: exceeds [trajectory] t_max")
        if list(ps["h_values"]) != sorted(set(ps["h_values"])):
            raise ConfigError("[phase_scan] h_values: must be strictly increasing")
        for L in ps["L_values"]:
            try:
                _model_params(_scan_model_cfg(cfg, L, ps["h_values"][0]))
            except ValueError as e:
                raise ConfigError(f"[phase_scan] L_values: L={L} invalid: {e}")
    return cfg


def load_config(path) -> dict:
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config parse error in {path}: {e}")
    return parse_config(raw)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _model_params(cfg: dict) -> ModelParams:
    m = cfg["model"]
    return ModelParams(
        L=m["L"],
        N=m["N"],
        h=m["h"],
        gamma_M=m["gamma_motion"],
        gamma_A=m["gamma_align"],
        K=m["K"],
        r=m["r"],
        kernel=m["kernel"],
    )


def _trajectory_config(cfg: dict, **overrides) -> TrajectoryConfig:
    t = cfg["trajectory"]
    t_max = overrides.pop("t_max", t["t_max"])
    spacing = t["sample_spacing"]
    n = int(round(t_max / spacing))
    times = tuple(np.linspace(0.0, n * spacing, n + 1))
    kw = dict(
        dt=t["dt"],
        t_max=t_max,
        seed=t["seed"],
        sample_times=times,
        initial_state=t["initial_state"],
        record_rho=t["record_rho"],
    )
    kw.update(overrides)
    return TrajectoryConfig(**kw)


def _closure_params(h: dict) -> ClosureParams:
    return ClosureParams(
        K=h["K"],
        h=h["h"],
        gamma_M=h["gamma_motion"],
        gamma_A=h["gamma_align"],
        sigma2=h["sigma2"],
        q=h["q"],
        gamma_rho=h["gamma_rho"],
        gamma_m=h["gamma_m"],
        mode=h["closure"],
    )


def _classical_params(c: dict) -> ClassicalParams:
    return ClassicalParams(L=c["L"], K=c["K"], r=c["r"], prob_scale=c["prob_scale"])


# -- transition estimation ---------------------------------------------------


@dataclass(frozen=True)
class TransitionEstimate:
    """First crossing of the ordered-phase threshold along a field scan."""

    h_star: float
    err: float
    censored: bool


def estimate_transition(h_values, u_values, u_errors=None, epsilon: float = 0.02) -> TransitionEstimate:
    """Locate where a Binder scan first drops below 2/3 - epsilon.

    Linear interpolation between the bracketing grid points; the quoted
    uncertainty is half the local grid spacing plus the statistical error
    bars propagated through the interpolation slope.  Scans that never
    cross are censored at the largest scanned field.
    """
    h = np.asarray(h_values, dtype=np.float64)
    u = np.asarray(u_values, dtype=np.float64)
    if len(h) != len(u) or len(h) < 2:
        raise ValueError("need matching h and U arrays with at least two points")
    if np.any(np.diff(h) <= 0):
        raise ValueError("h_values must be strictly increasing")
    err = np.zeros_like(u) if u_errors is None else np.asarray(u_errors, dtype=np.float64)
    thr = 2.0 / 3.0 - epsilon
    for k in range(len(h) - 1):
        if u[k] >= thr and u[k + 1] < thr:
            du = u[k + 1] - u[k]
            frac = (thr - u[k]) / du
            h_star = float(h[k] + frac * (h[k + 1] - h[k]))
            spacing = float(h[k + 1] - h[k])
            slope = abs(spacing / du)
            stat = slope * math.hypot(err[k], err[k + 1])
            return TransitionEstimate(h_star, 0.5 * spacing + stat, False)
    return TransitionEstimate(float(h[-1]), float(h[-1] - h[-2]) / 2.0, True)


# -- result bundle ------------------------------------------------------------


@dataclass
class Table:
    columns: tuple
    rows: np.ndarray  # (n_rows, n_cols) float grid


@dataclass
class ResultBundle:
    """A run's outputs: named numeric tables plus provenance metadata."""

    label: str
    cfg: dict
    tables: dict
    seeds: dict
    wall_time: float = 0.0

    def write(self, outdir: Path) -> list:
        outdir.mkdir(parents=True, exist_ok=True)
        digest = config_hash(self.cfg)
        paths = []
        for name, tab in self.tables.items():
            path = outdir / f"{self.label}_{name}.tsv"
            with open(path, "w") as f:
                f.write(f"# config={digest}\n")
                f.write("# " + "\t".join(tab.columns) + "\n")
                for row in np.atleast_2d(tab.rows):
                    f.write("\t".join(_fmt(v) for v in row) + "\n")
            paths.append(path)
        meta = outdir / f"{self.label}.meta.toml"
        with open(meta, "w") as f:
            f.write("[provenance]\n")
            f.write(f'version = "{__version__}"\n')
            f.write(f'config_hash = "{digest}"\n')
            f.write(f"wall_time_s = {self.wall_time:.3f}\n")
            f.write("tables = [" + ", ".join(f'"{p.name}"' for p in paths) + "]\n")
            f.write("\n[seeds]\n")
            for k, v in self.seeds.items():
                f.write(f"{k} = {v}\n")
            for section, keys in self.cfg.items():
                f.write(f"\n[config.{section}]\n")
                for k, v in keys.items():
                    if v is None:  # required key of a section the mode ignores
                        continue
                    f.write(f"{k} = {_toml_value(v)}\n")
        paths.append(meta)
        return paths


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    x = float(v)
    if math.isnan(x):
        return "nan"
    return repr(x)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise AssertionError(f"unsupported metadata value {v!r}")


# -- mode runners --------------------------------------------------------------


def _run_or_cache(cfg, params, tconf, n_traj, chunk_size, threads):
    cache_dir = cfg["run"]["cache_dir"]
    if cache_dir:
        return run_ensemble_cached(params, tconf, n_traj, cache_dir, chunk_size=chunk_size)
    return run_ensemble(params, tconf, n_traj, chunk_size=chunk_size, threads=threads)


def _mode_trajectory(cfg: dict) -> ResultBundle:
    params = _model_params(cfg)
    tconf = _trajectory_config(cfg)
    t = cfg["trajectory"]
    acc = _run_or_cache(cfg, params, tconf, t["n_traj"], t["chunk_size"], t["threads"])
    m1, m2, m4 = acc.mean_moments()
    u = np.array([math.nan if x is None else x for x in acc.binder_series()])
    err2 = acc.moment_stderr(1) if acc.count > 1 else np.zeros_like(m2)
    tables = {
        "moments": Table(
            ("time", "m1", "m2", "m4", "binder", "m2_stderr"),
            np.column_stack([acc.times, m1, m2, m4, u, err2]),
        )
    }
    if t["record_rho"]:
        tables["coherence"] = Table(
            ("time", "coherence"), np.column_stack([acc.times, acc.coherence_series()])
        )
    seeds = {"seed": t["seed"], "n_traj": t["n_traj"]}
    return ResultBundle(cfg["run"]["label"], cfg, tables, seeds)


def _mode_oracle_compare(cfg: dict) -> ResultBundle:
    params = _model_params(cfg)
    t = cfg["trajectory"]
    tconf = _trajectory_config(cfg, record_final_state=True)
    acc = _run_or_cache(cfg, params, tconf, t["n_traj"], t["chunk_size"], t["threads"])
    psi0 = initial_state(get_basis(params.L, params.N), tconf.initial_state)
    series = integrate(
        initial_density(psi0), params, tconf.t_max, dt=cfg["oracle"]["dt"], sample_times=acc.times
    )
    m2_oracle = np.array([expectation_m2(dm) for _, dm in series])
    _, m2, _ = acc.mean_moments()
    err = acc.moment_stderr(1) if acc.count > 1 else np.full_like(m2, math.nan)
    diff = np.abs(m2 - m2_oracle)
    with np.errstate(divide="ignore", invalid="ignore"):
        sig = diff / err
    dist = trace_distance(acc.mean_state(), series[-1][1].data)
    tables = {
        "compare": Table(
            ("time", "m2_traj", "m2_oracle", "abs_diff", "m2_stderr", "sigmas"),
            np.column_stack([acc.times, m2, m2_oracle, diff, err, sig]),
        ),
        "distance": Table(
            ("time", "trace_distance", "bound"),
            np.array([[acc.times[-1], dist, 5.0 / math.sqrt(acc.count)]]),
        ),
    }
    return ResultBundle(cfg["run"]["label"], cfg, tables, {"seed": t["seed"], "n_traj": t["n_traj"]})


def _scan_model_cfg(cfg: dict, L: int, h: float) -> dict:
    # half-filled configs track the scanned size; explicit N is kept fixed
    base = cfg["model"]
    N = L if base["N"] == base["L"] else base["N"]
    return {**cfg, "model": {**base, "L": L, "N": N, "h": h}}


def _mode_phase_scan(cfg: dict) -> ResultBundle:
    base = cfg["model"]
    t = cfg["trajectory"]
    ps = cfg["phase_scan"]
    scan_rows, trans_rows = [], []
    for L in ps["L_values"]:
        us, errs = [], []
        for h in ps["h_values"]:
            params = _model_params(_scan_model_cfg(cfg, L, h))
            tconf = _trajectory_config(cfg)
            acc = _run_or_cache(cfg, params, tconf, ps["n_traj"], t["chunk_size"], t["threads"])
            u, err = acc.binder_window(ps["window_lo"], ps["window_hi"])
            scan_rows.append([base["K"], h, L, u, err])
            us.append(u)
            errs.append(err)
        if len(ps["h_values"]) >= 2:
            est = estimate_transition(ps["h_values"], us, errs, ps["epsilon"])
            trans_rows.append([base["K"], L, est.h_star, est.err, float(est.censored)])
    tables = {"scan": Table(("K", "h", "L", "binder", "binder_err"), np.array(scan_rows))}
    if trans_rows:
        tables["transition"] = Table(
            ("K", "L", "h_star", "h_star_err", "censored"), np.array(trans_rows)
        )
    return ResultBundle(cfg["run"]["label"], cfg, tables, {"seed": t["seed"], "n_traj": ps["n_traj"]})


def _mode_hydro(cfg: dict) -> ResultBundle:
    h = cfg["hydro"]
    p = _closure_params(h)
    L = h["L"]
    if h["initial"] == "gaussian":
        s0 = gaussian_cluster(L, width=h["width"], amplitude=h["amplitude"])
    elif h["initial"] == "noisy":
        s0 = noisy_homogeneous(
            L, rho0=h["rho0"], m0=h["m0"], amplitude=h["noise_amplitude"], seed=h["noise_seed"]
        )
    else:
        s0 = FieldState(np.full(L, h["rho0"]), np.full(L, h["m0"]))
    times = np.arange(0.0, h["t_max"] + 1e-9, h["sample_spacing"])
    states = integrate_fields(s0, p, h["t_max"], dt=h["dt"], sample_times=times)
    _, pos, height = peak_positions(states)
    summary = np.column_stack(
        [
            [s.t for s in states],
            [s.mass() for s in states],
            [np.abs(s.m).max() for s in states],
            [s.m.std() for s in states],
            pos,
            height,
        ]
    )
    grid_cols = ("time",) + tuple(f"site_{i}" for i in range(L))
    rho_grid = np.column_stack([[s.t for s in states], np.array([s.rho for s in states])])
    m_grid = np.column_stack([[s.t for s in states], np.array([s.m for s in states])])
    tables = {
        "summary": Table(
            ("time", "mass", "max_abs_m", "std_m", "peak_pos", "peak_height"), summary
        ),
        "fields_rho": Table(grid_cols, rho_grid),
        "fields_m": Table(grid_cols, m_grid),
    }
    return ResultBundle(cfg["run"]["label"], cfg, tables, {"noise_seed": h["noise_seed"]})


def _mode_classical(cfg: dict) -> ResultBundle:
    c = cfg["classical"]
    params = _classical_params(c)
    times, mean, err = run_classical_ensemble(
        params, c["n_histories"], c["n_sweeps"], seed=c["seed"], record_every=c["record_every"]
    )
    tables = {
        "m2": Table(("sweep", "m2_mean", "m2_stderr"), np.column_stack([times, mean, err]))
    }
    return ResultBundle(
        cfg["run"]["label"], cfg, tables, {"seed": c["seed"], "n_histories": c["n_histories"]}
    )


def _mode_kolmogorov(cfg: dict) -> ResultBundle:
    k = cfg["kolmogorov"]
    rows = []
    for gamma, K, eps in zip(k["gamma"], k["K"], k["epsilon"]):
        gf, gb, ratio = kolmogorov_rates(canonical_three_particle_cycle(K, eps), gamma=gamma)
        rows.append([gamma, K, eps, gf, gb, ratio])
    tables = {
        "rates": Table(
            ("gamma", "K", "epsilon", "rate_forward", "rate_backward", "ratio"), np.array(rows)
        )
    }
    return ResultBundle(cfg["run"]["label"], cfg, tables, {})


_RUNNERS = {
    "trajectory": _mode_trajectory,
    "oracle-compare": _mode_oracle_compare,
    "phase-scan": _mode_phase_scan,
    "hydro": _mode_hydro,
    "classical": _mode_classical,
    "kolmogorov": _mode_kolmogorov,
}


def run_config(cfg: dict) -> ResultBundle:
    """Execute a validated config and return the bundle (not yet written)."""
    t0 = time.perf_counter()
    bundle = _RUNNERS[cfg["run"]["mode"]](cfg)
    bundle.wall_time = time.perf_counter() - t0
    return bundle


def output_dir(cfg: dict) -> Path:
    env = os.environ.get("FLOCKSIM_OUTPUT_DIR")
    return Path(env) if env else Path(cfg["run"]["output_dir"])


def print_defaults(stream=None) -> None:
    """Reference page: every section, key and default as commented TOML."""
    stream = stream or sys.stdout
    print("# flocksim run configuration reference (all keys with defaults)", file=stream)
    print(f"# modes: {', '.join(MODES)}", file=stream)
    for section, keys in _SCHEMA.items():
        print(f"\n[{section}]", file=stream)
        for key, (spec, default) in keys.items():
            if default is _REQUIRED:
                print(f"# {key} is required (no default)", file=stream)
            else:
                print(f"{key} = {_toml_value(default)}", file=stream)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="flocksim", description="trajectory, oracle, field-theory and classical runs"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a TOML config")
    p_run.add_argument("config", type=Path)
    p_val = sub.add_parser("validate", help="check a TOML config without running")
    p_val.add_argument("config", type=Path)
    sub.add_parser("print-defaults", help="print the config reference page")
    args = parser.parse_args(argv)

    if args.command == "print-defaults":
        print_defaults()
        return 0
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    if args.command == "validate":
        print(f"ok {config_hash(cfg)[:16]} mode={cfg['run']['mode']}")
        return 0
    try:
        bundle = run_config(cfg)
        paths = bundle.write(output_dir(cfg))
    except BlowUpError as e:
        print(f"runtime error: field solution blew up at t={e.t:.4g}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError, MemoryError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
