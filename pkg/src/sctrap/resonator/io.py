"""Trace I/O: CSV (frequency_Hz, re, im) with a JSON sidecar."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .models import SpectrumTrace


def write_trace(trace: SpectrumTrace, stem) -> list[Path]:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    csv_path = stem.with_suffix(".csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency_Hz", "re", "im"])
        for f, s in zip(trace.frequencies, trace.s_values):
            w.writerow([repr(float(f)), repr(float(s.real)), repr(float(s.imag))])
    side = {"power_W": trace.input_power, "type": trace.kind, "sigma": trace.sigma}
    side.update(trace.meta)
    json_path = stem.with_suffix(".json")
    json_path.write_text(json.dumps(side, indent=2, sort_keys=True))
    return [csv_path, json_path]


def read_trace(csv_path, sidecar=None) -> SpectrumTrace:
    """Read a trace CSV; the sidecar defaults to the same stem with .json."""
    csv_path = Path(csv_path)
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    side_path = Path(sidecar) if sidecar else csv_path.with_suffix(".json")
    meta = json.loads(side_path.read_text()) if side_path.exists() else {}
    kind = meta.pop("type", "notch-S21")
    power = float(meta.pop("power_W", 0.0) or 0.0)
    sigma = meta.pop("sigma", None)
    return SpectrumTrace(data[:, 0], data[:, 1] + 1j * data[:, 2], power, kind, sigma, meta)
