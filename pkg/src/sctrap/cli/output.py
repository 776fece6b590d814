"""Deterministic writers: plot-data CSV/JSON descriptors and the run manifest."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..fieldsolver import FieldMap, write_fieldmap

PLOT_KINDS = ("heatmap", "line", "fieldmap")


def fmt(v):
    """Shortest round-trip text for a float (stable across runs)."""
    return repr(float(v))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, data):
    path = Path(path)
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path, header, rows):
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating, int, np.integer))
                        and not isinstance(v, bool) else v for v in r])
    return path


def _axis(name, unit, scale="linear"):
    return {"name": name, "unit": unit, "scale": scale}


def emit_plotdata(results, kind, stem):
    """Write plot data for an external plotter; returns the written paths.

    heatmap: dict with x, y, z (len(x) x len(y)) and x_name/y_name/z_name,
             optional *_unit and *_scale entries.
    line:    dict with x, series {name: values}, x_name and optional units.
    fieldmap: a FieldMap, written in the field-solver export format.
    """
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unsupported plot kind {kind!r}")
    stem = Path(stem)
    if kind == "fieldmap":
        if not isinstance(results, FieldMap):
            raise ConfigError("fieldmap plot data needs a FieldMap")
        paths = write_fieldmap(results, stem)
        desc = {"kind": "fieldmap", "data": paths[0].name,
                "axes": [_axis("x_m", "m"), _axis("z_m", "m")],
                "values": results.kind}
    elif kind == "heatmap":
        x, y = np.asarray(results["x"], float), np.asarray(results["y"], float)
        z = np.asarray(results["z"], float)
        if z.shape != (x.size, y.size):
            raise ConfigError("heatmap z must have shape (len(x), len(y))")
        names = results["x_name"], results["y_name"], results["z_name"]
        rows = ((x[i], y[j], z[i, j]) for i in range(x.size) for j in range(y.size))
        csv_path = write_csv(stem.with_suffix(".csv"), names, rows)
        paths = [csv_path]
        desc = {"kind": "heatmap", "data": csv_path.name,
                "axes": [_axis(names[0], results.get("x_unit", ""), results.get("x_scale", "linear")),
                         _axis(names[1], results.get("y_unit", ""), results.get("y_scale", "linear"))],
                "values": _axis(names[2], results.get("z_unit", ""), results.get("z_scale", "linear"))}
    else:
        x = np.asarray(results["x"], float)
        series = results["series"]
        header = [results["x_name"]] + list(series)
        cols = [np.asarray(v, float) for v in series.values()]
        if any(c.shape != x.shape for c in cols):
            raise ConfigError("line series must match x")
        csv_path = write_csv(stem.with_suffix(".csv"), header,
                             zip(x, *cols) if cols else ((v,) for v in x))
        paths = [csv_path]
        desc = {"kind": "line", "data": csv_path.name,
                "axes": [_axis(header[0], results.get("x_unit", ""), results.get("x_scale", "linear"))],
                "series": [_axis(n, results.get("y_unit", ""), results.get("y_scale", "linear"))
                           for n in series]}
    desc_path = write_json(stem.with_name(stem.name + ".plot.json"), desc)
    return list(paths) + [desc_path]


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    version: str
    seed: int
    status: str = "ok"
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    files: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    error: dict | None = None

    def add_files(self, out_dir, paths):
        out_dir = Path(out_dir)
        for p in paths:
            p = Path(p)
            self.files.append({"path": str(p.relative_to(out_dir)), "sha256": sha256_file(p),
                               "bytes": p.stat().st_size})

    def to_dict(self):
        return {"command": self.command, "config_sha256": self.config_hash,
                "toolkit_version": self.version, "seed": self.seed, "status": self.status,
                "timings_s": self.timings, "warnings": self.warnings,
                "files": sorted(self.files, key=lambda f: f["path"]),
                "results": self.results, "error": self.error}

    def write(self, out_dir):
        return write_json(Path(out_dir) / "manifest.json", self.to_dict())
