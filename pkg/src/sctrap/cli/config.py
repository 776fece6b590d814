"""Run configuration: TOML files with unit-suffixed keys, converted to SI.

A key such as ``w_um = 10`` names the quantity ``w`` in micrometres.  Keys
the schema marks as angular (``omega*``, ``Omega*``, ``g_m`` in the gate
sections) accept a frequency suffix (Hz, kHz, MHz, GHz), multiplied by
2 pi, or ``_rad_s`` taken as is.  Every value is stored in SI
under its base name.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import tomli
import tomli_w

from ..constants import BE9_ION_MASS
from ..errors import ConfigError, UnitError

COMMANDS = ("field-solve", "trap-analyze", "resonator-fit", "gate-power", "gate-sim")


# suffix -> (dimension, factor to SI)
UNITS = {
    "m": ("length", 1.0), "mm": ("length", 1e-3), "um": ("length", 1e-6),
    "nm": ("length", 1e-9),
    "Hz": ("frequency", 1.0), "kHz": ("frequency", 1e3), "MHz": ("frequency", 1e6),
    "GHz": ("frequency", 1e9),
    "rad_s": ("angular", 1.0),
    "V": ("voltage", 1.0), "mV": ("voltage", 1e-3),
    "A": ("current", 1.0), "mA": ("current", 1e-3),
    "T": ("field", 1.0), "mT": ("field", 1e-3), "uT": ("field", 1e-6),
    "T_per_m": ("gradient", 1.0),
    "J_per_T": ("moment", 1.0),
    "deg": ("angle", 1.0),
    "s": ("time", 1.0), "ms": ("time", 1e-3), "us": ("time", 1e-6),
    "W": ("power", 1.0), "mW": ("power", 1e-3), "uW": ("power", 1e-6),
    "amu": ("mass", 1.66053906660e-27), "kg": ("mass", 1.0),
}
# output suffix used when a parsed config is written back out
SI_SUFFIX = {"length": "m", "frequency": "Hz", "angular": "rad_s", "voltage": "V",
             "current": "A", "field": "T", "gradient": "T_per_m", "moment": "J_per_T",
             "angle": "deg", "time": "s", "power": "W", "mass": "kg"}
PLAIN = ("float", "int", "str", "bool", "floats", "path")


@dataclass(frozen=True)
class Key:
    dim: str
    required: bool = False
    default: object = None
    choices: tuple = ()


def _q(dim, required=False, default=None, choices=()):
    return Key(dim, required, default, choices)


_MESH = {"min_cell": _q("length", default=25e-9), "growth_ratio": _q("float", default=1.3)}

SCHEMAS = {
    "field-solve": {
        "geometry": {
            "preset": _q("str", True, choices=("coplanar", "round_wire", "slab",
                                                "trap3d_microwave")),
            "w": _q("length"), "s": _q("length"), "t": _q("length"),
            "radius": _q("length"), "thickness": _q("length"), "height": _q("length"),
            "gap": _q("length"), "ground_width": _q("length"),
            "lambda": _q("length", default=50e-9),
            "current": _q("current", default=1.0),
        },
        "mesh": dict(_MESH),
        "probe": {"theta_HF": _q("angle", default=36.0), "theta_LF": _q("angle", default=-53.0)},
    },
    "trap-analyze": {
        "geometry": {
            "gap": _q("length", default=100e-6), "t": _q("length", default=1.2e-6),
            "rf_width": _q("length", default=50e-6), "dc_width": _q("length", default=5e-6),
            "mw_width": _q("length", default=20e-6),
            "rf_mw_distance": _q("length", default=80e-6),
            "rf_dc_gap": _q("length", default=5e-6),
        },
        "drive": {
            "Omega_rf": _q("angular", True), "V_rf": _q("voltage", True),
            "V_inner": _q("voltage", default=0.0), "V_endcap": _q("voltage", default=0.0),
            "omega_axial": _q("angular"),
        },
        "ion": {"mass": _q("mass", default=BE9_ION_MASS),
                "charge": _q("int", default=1), "name": _q("str", default="9Be+")},
        "mesh": dict(_MESH, search_half=_q("length", default=20e-6)),
    },
    "resonator-fit": {
        "input": {"trace": _q("path"), "sidecar": _q("path"),
                  "model": _q("str", choices=("notch", "coupled"))},
        "synthesize": {
            "kind": _q("str", default="notch-S21", choices=("notch-S21", "reflection-S11")),
            "f_r": _q("frequency"), "g_m": _q("frequency", default=0.0),
            "Q_int": _q("float"), "Q_ext": _q("float"),
            "f_start": _q("frequency"), "f_stop": _q("frequency"),
            "n_points": _q("int", default=2001), "sigma": _q("float", default=0.0),
            "amplitude": _q("float", default=1.0), "phase": _q("angle", default=0.0),
            "delay": _q("time", default=0.0),
        },
    },
    "gate-power": {
        "physics": {
            "mu_parallel": _q("moment"), "dBdr_single_photon": _q("gradient"),
            "B_H0": _q("field"), "b_j": _q("float"), "q0": _q("length"),
            "phi": _q("angle"), "theta_HF": _q("angle"), "g_m": _q("angular"),
            "omega_rock": _q("angular"), "omega_r": _q("angular"),
            "Omega_M": _q("angular"), "Omega_S": _q("angular"), "rabi_ratio": _q("float"),
        },
        "grid": {
            "schemes": _q("strs", default=["MS", "SS"]),
            "Q_int_list": _q("floats", default=[1e3, 1e4, 1e5, 1e6]),
            "Q_ext_min": _q("float", default=10.0), "Q_ext_max": _q("float", default=1e6),
            "n_Q_ext": _q("int", default=50),
            "Q_int_min": _q("float"), "Q_int_max": _q("float"), "n_Q_int": _q("int"),
        },
    },
    "gate-sim": {
        "drive": {
            "Omega_S": _q("angular", True), "ratio": _q("float", default=15.0),
            "delta": _q("angular"), "duration": _q("time"),
            "n_max": _q("int", default=10), "steps_per_limit": _q("int", default=1),
            "sample_every": _q("int", default=10),
        },
        "sweep": {"ratio_list": _q("floats")},
    },
}


@dataclass
class RunConfig:
    command: str
    parameters: dict
    out_dir: str | None = None
    seed: int = 0
    source_hash: str = ""
    meta: dict = field(default_factory=dict)

    def section(self, name):
        return self.parameters.get(name, {})


def _split_key(key, schema):
    """(base, suffix) for ``key``; plain keys have no suffix."""
    if key in schema and schema[key].dim in PLAIN + ("strs",):
        return key, None
    for suf in sorted(UNITS, key=len, reverse=True):
        if key.endswith("_" + suf):
            base = key[: -len(suf) - 1]
            if base in schema:
                return base, suf
    base = key
    if base in schema and schema[base].dim not in PLAIN + ("strs",):
        raise UnitError(f"key {key!r} needs a unit suffix for {schema[base].dim}")
    return key, None


def _convert(section, key, base, suffix, spec: Key, value):
    where = f"[{section}] {key}"
    if suffix is None:
        return _plain(where, spec, value)
    dim, factor = UNITS[suffix]
    want = spec.dim
    if want == "angular" and dim == "frequency":
        factor *= 2 * math.pi
    elif dim != want:
        raise UnitError(f"{where}: suffix '_{suffix}' is a {dim}, expected {want}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number")
    return float(value) * factor


def _plain(where, spec, value):
    if spec.dim == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if spec.dim == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if spec.dim == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if spec.dim in ("str", "path"):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        if spec.choices and value not in spec.choices:
            raise ConfigError(f"{where}: {value!r} not one of {spec.choices}")
        return value
    if spec.dim == "floats":
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{where}: expected a list of numbers")
        return [float(v) for v in value]
    if spec.dim == "strs":
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{where}: expected a list of strings")
        return list(value)
    raise ConfigError(f"{where}: unsupported type")


def validate(command, raw: dict) -> dict:
    """Check ``raw`` against the command schema and convert to SI."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    schema = SCHEMAS[command]
    out = {}
    for section, body in raw.items():
        if section not in schema:
            raise ConfigError(f"unknown section [{section}] for {command}")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        keys = schema[section]
        vals = {}
        for key, value in body.items():
            base, suffix = _split_key(key, keys)
            if base not in keys:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            if base in vals:
                raise ConfigError(f"[{section}] {base} given more than once")
            vals[base] = _convert(section, key, base, suffix, keys[base], value)
        out[section] = vals
    for section, keys in schema.items():
        vals = out.setdefault(section, {})
        for base, spec in keys.items():
            if base not in vals:
                if spec.required:
                    unit = "" if spec.dim in PLAIN else f" (with a {spec.dim} unit suffix)"
                    raise ConfigError(f"[{section}] missing required {base!r}{unit}")
                if spec.default is not None:
                    vals[base] = spec.default
    return out


def parse_config(path, command=None) -> RunConfig:
    """Read and validate a run config; ``command`` may come from the CLI."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = tomli.loads(data.decode("utf-8"))
    except (tomli.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    run = raw.pop("run", {})
    if not isinstance(run, dict):
        raise ConfigError("[run] must be a table")
    unknown = set(run) - {"command", "out_dir", "seed"}
    if unknown:
        raise ConfigError(f"unknown key(s) in [run]: {sorted(unknown)}")
    cmd = run.get("command", command)
    if command is not None and cmd != command:
        raise ConfigError(f"config is for {cmd!r}, not {command!r}")
    if cmd is None:
        raise ConfigError("no command given")
    seed = run.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("[run] seed must be an integer")
    params = validate(cmd, raw)
    # resolve relative input paths against the config location
    for spec_sec, keys in SCHEMAS[cmd].items():
        for base, spec in keys.items():
            v = params[spec_sec].get(base)
            if spec.dim == "path" and v is not None and not Path(v).is_absolute():
                params[spec_sec][base] = str((path.parent / v).resolve())
    return RunConfig(cmd, params, run.get("out_dir"), seed,
                     hashlib.sha256(data).hexdigest(), {"path": str(path)})


def dump_config(cfg: RunConfig) -> str:
    """TOML text of a parsed config with SI suffixes (parses back identically)."""
    doc = {"run": {"command": cfg.command, "seed": cfg.seed}}
    if cfg.out_dir is not None:
        doc["run"]["out_dir"] = cfg.out_dir
    schema = SCHEMAS[cfg.command]
    for section, vals in cfg.parameters.items():
        body = {}
        for base, v in vals.items():
            dim = schema[section][base].dim
            key = base if dim in PLAIN + ("strs",) else f"{base}_{SI_SUFFIX[dim]}"
            body[key] = v
        if body:
            doc[section] = body
    return tomli_w.dumps(doc)
