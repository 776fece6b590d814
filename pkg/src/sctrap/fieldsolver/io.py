"""FieldMap export: CSV grid plus a JSON sidecar."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .fieldmap import FieldMap


def _columns(fmap: FieldMap):
    if fmap.is_scalar:
        comps = {"v": fmap.values}
    else:
        comps = {"x": fmap.values[..., 0], "z": fmap.values[..., 1]}
    cols = {}
    for name, arr in comps.items():
        cols[f"re_{name}"] = np.real(arr).ravel()
        cols[f"im_{name}"] = np.imag(arr).ravel()
    return cols


def write_fieldmap(fmap: FieldMap, stem) -> list[Path]:
    """Write ``stem.csv`` (x, z, Re/Im components per node) and ``stem.json``."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    X, Z = fmap.mesh.node_grid()
    cols = _columns(fmap)
    csv_path = stem.with_suffix(".csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_m", "z_m"] + list(cols))
        data = np.column_stack([X.ravel(), Z.ravel()] + list(cols.values()))
        for row in data:
            w.writerow([repr(float(v)) for v in row])
    side = {
        "kind": fmap.kind,
        "units": fmap.units,
        "coordinate_units": "m",
        "shape": list(fmap.mesh.shape),
        "frequency_Hz": fmap.frequency,
        "source": fmap.source,
        "residual": fmap.residual,
        "columns": ["x_m", "z_m"] + list(cols),
    }
    json_path = stem.with_suffix(".json")
    json_path.write_text(json.dumps(side, indent=2, sort_keys=True, default=float))
    return [csv_path, json_path]
