"""Command-line batch front end.

    simulate <scenario> --config <path> [--out <dir>] [--format csv|json] [--threads N]

The configuration is a JSON object. Physics inputs are dimensionless with
T = 1. Exit codes: 0 success, 2 configuration error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .errors import ConfigurationError, GiantAtomError

OUTPUT_ENV = "GIANTATOM_OUTPUT_DIR"
SCENARIOS = ("spontaneous", "spectra", "reflectance", "two_phonon_spectra", "g2", "cascade", "sweep")
FORMATS = ("csv", "json")

_REQ = object()

# parameter schema per scenario: name -> default (or _REQ)
_PARAMS: Dict[str, Dict[str, Any]] = {
    "spontaneous": {"gammaT": _REQ, "omega0T_over_pi": _REQ},
    "spectra": {"gammaT": _REQ, "omega0T_over_pi": _REQ},
    "reflectance": {"gammaT": _REQ, "omega0T_over_pi": _REQ},
    "two_phonon_spectra": {"gammaT": _REQ, "phi_over_pi": 0.0, "delta_over_gamma": 0.0,
                           "delta_over_omega0": None, "omega0T_over_pi": None,
                           "Omega_over_2gamma": 0.1},
    "g2": {"gammaT": _REQ, "phi_over_pi": 0.0, "delta_over_gamma": 0.0,
           "delta_over_omega0": None, "omega0T_over_pi": None},
    "cascade": {"gammaT": _REQ, "phi_over_pi": 0.0, "delta_over_gamma": 0.0,
                "delta_over_omega0": None, "omega0T_over_pi": None,
                "Omega_over_2gamma": 0.1, "initial": "ground"},
}

_OPTIONS: Dict[str, Dict[str, Any]] = {
    "spontaneous": {"method": "series", "overlap": False},
    "spectra": {},
    "reflectance": {"roots": True},
    "two_phonon_spectra": {"total_power": True},
    "g2": {},
    "cascade": {"observable": "population", "max_k": 6},
}

_DESCRIPTIONS = {
    "spontaneous": "spontaneous emission from the excited state: excited population, "
                   "phonon energy between the legs and total stored energy (units of hbar omega0)",
    "spectra": "atomic and output power spectra of spontaneous emission versus (omega - omega0) T",
    "reflectance": "single-phonon reflectance R and transmittance versus drive detuning (omega_d - omega0) T",
    "two_phonon_spectra": "scaled inelastic power spectrum (2 gamma/Omega)^4 S_inel versus omega T/(2 pi)",
    "g2": "second-order correlations of scattered phonons under weak drive; "
          "g are normalised, G are leading-order and unnormalised",
    "cascade": "numerically exact driven transient from the cascade of delayed copies; "
               "excited population and leg-A output phonon flux (raw and divided by (Omega/2 gamma)^2)",
}


@dataclass
class RunConfig:
    """Validated run configuration. ``out`` is not part of the dataset header."""

    scenario: str
    params: Dict[str, Any] = field(default_factory=dict)
    grid: Dict[str, Any] = field(default_factory=dict)
    options: Dict[str, Any] = field(default_factory=dict)
    sweep: Optional[Dict[str, Any]] = None
    format: str = "csv"
    out: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        d = {"scenario": self.scenario, "params": self.params, "grid": self.grid,
             "options": self.options, "format": self.format}
        if self.sweep is not None:
            d["sweep"] = self.sweep
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _number(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigurationError("expected a number", path)
    if not math.isfinite(v):
        raise ConfigurationError("must be finite", path)
    return float(v)


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigurationError("expected an object", path)
    for key in obj:
        if key not in allowed:
            raise ConfigurationError("unknown key", f"{path}.{key}" if path else key)


def _parse_params(scenario, raw, path="params"):
    schema = _PARAMS[scenario]
    _check_keys(raw, schema, path)
    out = {}
    for key, default in schema.items():
        kp = f"{path}.{key}"
        if key in raw and raw[key] is not None:
            v = raw[key]
            if key == "initial":
                if v not in ("ground", "excited"):
                    raise ConfigurationError("expected 'ground' or 'excited'", kp)
                out[key] = v
            else:
                out[key] = _number(v, kp)
        elif default is _REQ:
            raise ConfigurationError("missing required key", kp)
        else:
            out[key] = default
    if out.get("gammaT", 1.0) <= 0:
        raise ConfigurationError("must be positive", f"{path}.gammaT")
    if "Omega_over_2gamma" in out and out["Omega_over_2gamma"] < 0:
        raise ConfigurationError("must be non-negative", f"{path}.Omega_over_2gamma")
    if "phi_over_pi" in schema and out.get("omega0T_over_pi") is not None:
        # the feedback phase then follows omega_d T = omega0 T + delta T
        if "phi_over_pi" in raw and raw["phi_over_pi"] is not None:
            raise ConfigurationError("give phi_over_pi or omega0T_over_pi, not both",
                                     f"{path}.phi_over_pi")
        out["phi_over_pi"] = None
    if out.get("delta_over_omega0") is not None:
        if out.get("omega0T_over_pi") is None:
            raise ConfigurationError("delta_over_omega0 needs omega0T_over_pi",
                                     f"{path}.delta_over_omega0")
        if "delta_over_gamma" in raw and raw["delta_over_gamma"] is not None:
            raise ConfigurationError("give delta_over_gamma or delta_over_omega0, not both",
                                     f"{path}.delta_over_gamma")
        out["delta_over_gamma"] = None
    return out


def _parse_grid(raw, path="grid"):
    _check_keys(raw, ("start", "stop", "count"), path)
    for key in ("start", "stop", "count"):
        if key not in raw:
            raise ConfigurationError("missing required key", f"{path}.{key}")
    start = _number(raw["start"], f"{path}.start")
    stop = _number(raw["stop"], f"{path}.stop")
    count = raw["count"]
    if isinstance(count, bool) or not isinstance(count, int):
        raise ConfigurationError("expected an integer", f"{path}.count")
    if count < 2:
        raise ConfigurationError("must be at least 2", f"{path}.count")
    return {"start": start, "stop": stop, "count": count}


def _parse_options(scenario, raw, path="options"):
    schema = _OPTIONS[scenario]
    _check_keys(raw, schema, path)
    out = dict(schema)
    for key, v in raw.items():
        kp = f"{path}.{key}"
        default = schema[key]
        if isinstance(default, bool):
            if not isinstance(v, bool):
                raise ConfigurationError("expected true or false", kp)
        elif isinstance(default, int):
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigurationError("expected a positive integer", kp)
        elif isinstance(default, str):
            allowed = {"method": ("series", "ode"),
                       "observable": ("population", "g2")}[key]
            if v not in allowed:
                raise ConfigurationError(f"expected one of {allowed}", kp)
        out[key] = v
    return out


def parse_config(raw: Dict[str, Any], scenario: Optional[str] = None) -> RunConfig:
    """Validate a configuration tree; ``scenario`` (from the command line) wins if given."""
    if not isinstance(raw, dict):
        raise ConfigurationError("configuration must be a JSON object")
    _check_keys(raw, ("scenario", "params", "grid", "options", "sweep", "format", "out"), "")
    name = scenario or raw.get("scenario")
    if name is None:
        raise ConfigurationError("missing required key", "scenario")
    if name not in SCENARIOS:
        raise ConfigurationError(f"unknown scenario {name!r}", "scenario")
    if scenario and raw.get("scenario") not in (None, scenario):
        raise ConfigurationError(f"config is for {raw['scenario']!r}, not {scenario!r}", "scenario")
    fmt = raw.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigurationError(f"expected one of {FORMATS}", "format")
    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigurationError("expected a string", "out")

    sweep = None
    inner = name
    if name == "sweep":
        sw = raw.get("sweep")
        if sw is None:
            raise ConfigurationError("missing required key", "sweep")
        _check_keys(sw, ("scenario", "axis", "values"), "sweep")
        inner = sw.get("scenario")
        if inner not in _PARAMS:
            raise ConfigurationError("expected a non-sweep scenario", "sweep.scenario")
        axis = sw.get("axis")
        schema = _PARAMS[inner]
        if axis not in schema or axis == "initial":
            raise ConfigurationError(f"not a physics parameter of {inner}", "sweep.axis")
        values = sw.get("values")
        if not isinstance(values, list):
            raise ConfigurationError("expected a list", "sweep.values")
        values = [_number(v, f"sweep.values[{i}]") for i, v in enumerate(values)]
        sweep = {"scenario": inner, "axis": axis, "values": values}
    elif "sweep" in raw:
        raise ConfigurationError("only allowed for the sweep scenario", "sweep")

    params_raw = dict(raw.get("params", {})) if isinstance(raw.get("params", {}), dict) else raw.get("params")
    if sweep is not None and isinstance(params_raw, dict) and sweep["values"]:
        params_raw.setdefault(sweep["axis"], sweep["values"][0])
    params = _parse_params(inner, params_raw)
    grid = _parse_grid(raw.get("grid", {}))
    options = _parse_options(inner, raw.get("options", {}))
    return RunConfig(name, params, grid, options, sweep, fmt, out)


def load_config(path: str, scenario: Optional[str] = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    return parse_config(raw, scenario)


# ---------------------------------------------------------------------------
# Scenario runners: each returns (columns, rows, notes)
# ---------------------------------------------------------------------------

def _grid(cfg: RunConfig) -> np.ndarray:
    g = cfg.grid
    return np.linspace(g["start"], g["stop"], g["count"])


def _system(p):
    from .single_excitation import SystemParams
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SystemParams.with_phase(p["gammaT"], p["omega0T_over_pi"])


def _drive(p) -> Tuple[float, float]:
    """(delta, phi/pi) with T = 1, so gamma = gammaT and omega0 = pi * omega0T_over_pi."""
    g = p["gammaT"]
    if p.get("delta_over_omega0") is not None:
        delta = p["delta_over_omega0"] * math.pi * p["omega0T_over_pi"]
    else:
        delta = p["delta_over_gamma"] * g
    if p.get("omega0T_over_pi") is not None:
        return delta, (p["omega0T_over_pi"] % 2.0) + delta / math.pi
    return delta, p["phi_over_pi"]


def _run_spontaneous(cfg):
    from .single_excitation import spontaneous_trace, stored_energies
    p = cfg.params
    params = _system(p)
    t = _grid(cfg)
    if t.min() < 0:
        raise ConfigurationError("times must be non-negative", "grid.start")
    horizon = max(float(t.max()), 1e-9)
    trace = spontaneous_trace(params, horizon, method=cfg.options["method"])
    led = stored_energies(trace, overlap=cfg.options["overlap"])
    pop = np.abs(trace.value_at(t)) ** 2
    EP = np.interp(t, led.times, led.E_P)
    ET = np.interp(t, led.times, led.E_T)
    return ["t_over_T", "excited_population", "E_P", "E_T"], np.column_stack([t, pop, EP, ET]), []


def _run_spectra(cfg):
    from .single_excitation import atom_power_spectrum, output_power_spectrum
    params = _system(cfg.params)
    x = _grid(cfg)
    w = params.omega0 + x / params.delay_T
    Sa = np.ma.filled(np.ma.masked_invalid(atom_power_spectrum(params, w)), np.nan)
    So = np.asarray(output_power_spectrum(params, w), dtype=float)
    keep = np.isfinite(Sa)
    notes = []
    if not keep.all():
        notes.append("rows omitted at dark-state poles: detuning_T = "
                     + ", ".join(f"{v:.16e}" for v in x[~keep]))
    return ["detuning_T", "S_atom", "S_output"], np.column_stack([x[keep], Sa[keep], So[keep]]), notes


def _run_reflectance(cfg):
    from .single_excitation import reflectance_transmittance, total_reflection_frequencies
    params = _system(cfg.params)
    x = _grid(cfg)
    R, Tr = reflectance_transmittance(params, params.omega0 + x / params.delay_T)
    notes = []
    if cfg.options["roots"]:
        lo, hi = params.omega0 + x.min(), params.omega0 + x.max()
        roots = total_reflection_frequencies(params, bracket=(lo, hi))
        notes.append("total reflection at detuning_T = "
                     + ", ".join(f"{(r - params.omega0) * params.delay_T:.16e}" for r in roots))
    return ["detuning_T", "R", "transmittance"], np.column_stack([x, R, Tr]), notes


def _run_two_phonon(cfg):
    from .two_phonon import inelastic_spectrum, kernel_from_values, total_inelastic_power
    p = cfg.params
    g = p["gammaT"]
    delta, phi_pi = _drive(p)
    k = kernel_from_values(g, 1.0, delta, phi_pi)
    Om = 2 * g * p["Omega_over_2gamma"]
    x = _grid(cfg)
    # S scales as Omega^4, so evaluate at Omega = 1 and multiply by (2 gamma)^4
    S = inelastic_spectrum(k, 1.0, 2 * math.pi * x) * (2 * g) ** 4
    notes = []
    if cfg.options["total_power"]:
        notes.append(f"total inelastic power = {total_inelastic_power(k, Om):.16e}")
    return ["omega_T_over_2pi", "S_inel_scaled"], np.column_stack([x, S]), notes


def _run_g2(cfg):
    from .two_phonon import g2_functions, kernel_from_values
    p = cfg.params
    delta, phi_pi = _drive(p)
    k = kernel_from_values(p["gammaT"], 1.0, delta, phi_pi)
    tau = _grid(cfg)
    r = g2_functions(k, tau, strict=False)
    cols, data = ["tau_over_T"], [tau]
    for name in ("g11", "g22", "g12", "G11", "G12"):
        v = getattr(r, name)
        if v is not None:
            cols.append(name)
            data.append(v)
    notes = []
    if r.undefined:
        notes.append("omitted (singular coefficient): " + ", ".join(r.undefined))
    return cols, np.column_stack(data), notes


def _run_cascade(cfg):
    from .cascade import (EXCITED, GROUND, build_chain, delayed_g2, output_observables,
                          propagate, reduced_state)
    p = cfg.params
    params = _system({"gammaT": p["gammaT"], "omega0T_over_pi": p["omega0T_over_pi"] or 2000.0})
    delta, phi_pi = _drive(p)
    Om = 2 * p["gammaT"] * p["Omega_over_2gamma"]
    rho0 = GROUND if p["initial"] == "ground" else EXCITED
    scale = p["Omega_over_2gamma"] ** 2 if p["Omega_over_2gamma"] > 0 else 1.0
    t = _grid(cfg)
    if t.min() < 0:
        raise ConfigurationError("times must be non-negative", "grid.start")
    max_k = cfg.options["max_k"]
    rows = []
    for tt in t:
        ch = build_chain(params, delta, Om, None, float(tt), max_k=max_k, phi_pi=phi_pi)
        if cfg.options["observable"] == "population":
            pop = reduced_state(propagate(ch), rho0).excited_population
            n = output_observables(ch, rho0, float(tt)).n_A_out
            rows.append([tt, pop, n, pop / scale, n / scale])
        else:
            G = delayed_g2(ch, rho0, 0.0, float(tt))
            rows.append([tt, G, G / scale])
    if cfg.options["observable"] == "population":
        cols = ["t_over_T", "excited_population", "n_A_out", "excited_population_scaled",
                "n_A_out_scaled"]
    else:
        cols = ["tau_over_T", "G22_0_tau", "G22_0_tau_scaled"]
    return cols, np.array(rows, dtype=float).reshape(len(rows), len(cols)), []


_RUNNERS = {
    "spontaneous": _run_spontaneous,
    "spectra": _run_spectra,
    "reflectance": _run_reflectance,
    "two_phonon_spectra": _run_two_phonon,
    "g2": _run_g2,
    "cascade": _run_cascade,
}


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return "%.16e" % v


def _header(cfg: RunConfig, notes: List[str], scenario: str) -> List[str]:
    lines = [f"giantatom {__version__}",
             f"scenario: {scenario}",
             f"quantity: {_DESCRIPTIONS[scenario]}",
             "units: hbar = v_g = 1, T = 1; inputs are the dimensionless combinations in config",
             f"config: {cfg.canonical_json()}"]
    lines += notes
    return lines


def write_dataset(path: str, cfg: RunConfig, scenario: str, columns, rows, notes) -> None:
    rows = np.asarray(rows, dtype=float)
    if rows.size and not np.all(np.isfinite(rows)):
        from .errors import NumericalError
        raise NumericalError(f"non-finite values in {scenario} output")
    if cfg.format == "csv":
        out = ["# " + line for line in _header(cfg, notes, scenario)]
        out.append(",".join(columns))
        out += [",".join(_fmt(v) for v in row) for row in rows]
        text = "\n".join(out) + "\n"
    else:
        doc = {"meta": {"library": f"giantatom {__version__}", "scenario": scenario,
                        "quantity": _DESCRIPTIONS[scenario], "notes": notes,
                        "config": cfg.to_dict()},
               "columns": list(columns),
               "data": [[float(v) for v in row] for row in rows]}
        text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_dataset(path: str) -> Tuple[RunConfig, List[str], np.ndarray]:
    """Parse a dataset written by this module back into (config, columns, data)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".json"):
        doc = json.loads(text)
        cfg = parse_config(doc["meta"]["config"])
        return cfg, doc["columns"], np.array(doc["data"], dtype=float)
    cfg = None
    body = []
    for line in text.splitlines():
        if line.startswith("# config: "):
            cfg = parse_config(json.loads(line[len("# config: "):]))
        elif not line.startswith("#"):
            body.append(line)
    columns = body[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in body[1:]], dtype=float)
    return cfg, columns, data.reshape(len(body) - 1, len(columns))


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

def run_scenario(cfg: RunConfig, out_dir: Optional[str] = None, threads: int = 1) -> List[str]:
    """Run a configuration and write its dataset(s). Returns the written paths."""
    out_dir = out_dir or cfg.out or os.environ.get(OUTPUT_ENV) or "."
    os.makedirs(out_dir, exist_ok=True)
    ext = cfg.format
    if cfg.scenario != "sweep":
        cols, rows, notes = _RUNNERS[cfg.scenario](cfg)
        path = os.path.join(out_dir, f"{cfg.scenario}.{ext}")
        write_dataset(path, cfg, cfg.scenario, cols, rows, notes)
        return [path]
    return sweep(cfg, out_dir, threads)


def sweep(cfg: RunConfig, out_dir: str, threads: int = 1) -> List[str]:
    """One dataset per value of the sweep axis plus a combined long table."""
    sw = cfg.sweep
    inner, axis, values = sw["scenario"], sw["axis"], sw["values"]
    if not values:
        warnings.warn("sweep has no values; nothing written", stacklevel=2)
        return []

    def point(v):
        params = dict(cfg.params)
        params[axis] = v
        sub = RunConfig(inner, params, dict(cfg.grid), dict(cfg.options), None, cfg.format)
        sub = parse_config(sub.to_dict())
        return sub, _RUNNERS[inner](sub)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(point, values))
    else:
        results = [point(v) for v in values]
    paths = []
    long_rows = []
    long_cols = None
    for i, (v, (sub, (cols, rows, notes))) in enumerate(zip(values, results)):
        path = os.path.join(out_dir, f"sweep_{inner}_{axis}_{i:03d}.{cfg.format}")
        write_dataset(path, sub, inner, cols, rows, notes)
        paths.append(path)
        if long_cols is None:
            long_cols = [axis] + list(cols)
        if list(cols) != long_cols[1:]:
            raise ConfigurationError("sweep points produced different column sets", "sweep.axis")
        rows = np.asarray(rows, dtype=float)
        long_rows.append(np.column_stack([np.full(len(rows), v), rows]))
    path = os.path.join(out_dir, f"sweep_{inner}_{axis}.{cfg.format}")
    write_dataset(path, cfg, inner, long_cols, np.vstack(long_rows), [f"long format over {axis}"])
    paths.append(path)
    return paths


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="simulate", description=__doc__.splitlines()[0])
    ap.add_argument("scenario", choices=SCENARIOS)
    ap.add_argument("--config", required=True, help="JSON configuration file")
    ap.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or .)")
    ap.add_argument("--format", choices=FORMATS, default=None)
    ap.add_argument("--threads", type=int, default=1)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        if args.threads < 1:
            raise ConfigurationError("must be at least 1", "--threads")
        cfg = load_config(args.config, args.scenario)
        if args.format:
            cfg.format = args.format
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            paths = run_scenario(cfg, args.out, args.threads)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (GiantAtomError, ArithmeticError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
