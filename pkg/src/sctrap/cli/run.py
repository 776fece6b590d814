"""Command pipelines behind ``toolkit <command> <config>``."""
from __future__ import annotations

import math
import os
import time
import warnings
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .. import __version__
from ..constants import E_CHARGE
from ..errors import ConfigError, DomainError
from .config import RunConfig
from .output import RunManifest, emit_plotdata, write_csv, write_json

# reference value for the SS gate infidelity at a carrier/sideband ratio of 15
SS_REFERENCE_INFIDELITY = 7e-4


def thread_count():
    """Worker count for sweeps from TOOLKIT_THREADS (default 1)."""
    raw = os.environ.get("TOOLKIT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"TOOLKIT_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


class _Run:
    def __init__(self, cfg: RunConfig, out_dir: Path, manifest: RunManifest):
        self.cfg = cfg
        self.out = out_dir
        self.manifest = manifest
        self.paths = []

    @contextmanager
    def timed(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.manifest.timings[name] = time.perf_counter() - t0

    def emit(self, paths):
        self.paths.extend(Path(p) for p in paths)

    def json(self, name, data):
        self.emit([write_json(self.out / name, data)])


# -- field-solve -----------------------------------------------------------

def _need(sec, *names, section="geometry", preset=""):
    missing = [n for n in names if sec.get(n) is None]
    if missing:
        raise ConfigError(f"[{section}] {preset} needs {', '.join(missing)}")


def _field_solve(r: _Run):
    from ..fieldsolver import (build_mesh, corner_field, coplanar_waveguide, field_gradient_at,
                               round_wire, slab, solve_magnetoquasistatic,
                               trap3d_microwave_cross_section, unit)

    g = r.cfg.section("geometry")
    m = r.cfg.section("mesh")
    probe = r.cfg.section("probe")
    preset, lam, current = g["preset"], g["lambda"], g["current"]
    # presets carry unit current weights; the drive current enters the solve once
    if preset == "coplanar":
        _need(g, "w", "s", "t", preset=preset)
        geo = coplanar_waveguide(g["w"], g["s"], g["t"], lam, ground_width=g.get("ground_width"))
    elif preset == "round_wire":
        _need(g, "radius", preset=preset)
        geo = round_wire(g["radius"], lam)
    elif preset == "slab":
        _need(g, "thickness", "height", preset=preset)
        geo = slab(g["thickness"], g["height"], lam, g.get("gap"))
    else:
        kw = {k: g[k] for k in ("gap", "t") if g.get(k) is not None}
        geo = trap3d_microwave_cross_section(lambda0=lam, **kw)
    with r.timed("mesh"):
        mesh = build_mesh(geo, m["min_cell"], m["growth_ratio"])
    with r.timed("solve"):
        fmap = solve_magnetoquasistatic(mesh, geo, current)
    summary = {"preset": preset, "nodes": int(mesh.x.size * mesh.z.size),
               "shape": list(mesh.shape), "residual": fmap.residual, "current_A": current,
               "max_abs_B_T": float(fmap.magnitude().max())}
    with r.timed("probes"):
        if preset == "coplanar":
            summary["corner_field_T"] = corner_field(fmap, (0.5 * g["w"], g["t"]), lam)
        if preset == "trap3d_microwave":
            for name in ("theta_HF", "theta_LF"):
                summary[f"dBx_dr_{name}_T_per_m"] = field_gradient_at(
                    fmap, (0.0, 0.0), unit(probe[name]), "x")
    r.json("field_summary.json", summary)
    with r.timed("write"):
        r.emit(emit_plotdata(fmap, "fieldmap", r.out / "fieldmap"))
    r.manifest.results.update(summary)


# -- trap-analyze ----------------------------------------------------------

def _trap_analyze(r: _Run):
    from ..fieldsolver import trap3d_cross_section, unit
    from .. import trapstatics as ts

    g = r.cfg.section("geometry")
    d = r.cfg.section("drive")
    ion_sec = r.cfg.section("ion")
    m = r.cfg.section("mesh")
    ion = ts.IonSpecies(ion_sec["mass"], ion_sec["charge"] * E_CHARGE, ion_sec["name"])
    geo = trap3d_cross_section(**g)
    drive = ts.TrapDrive(d["Omega_rf"], d["V_rf"],
                         {"inner": d["V_inner"], "endcap": d["V_endcap"]})
    if d["V_endcap"]:
        r.manifest.warnings.append("endcap bias has no electrode in the 2D cut and is ignored")
    with r.timed("solve_and_analyze"):
        res, rf_map, dc_map = ts.solve_trap(geo, drive, ion, m["search_half"], m["min_cell"],
                                            m["growth_ratio"], d.get("omega_axial"))
    half = m["search_half"]
    region = (-half, half, -half, half)
    total, _ = ts.trap_potential(rf_map, dc_map, ion, drive, region, d.get("omega_axial"))
    r.emit([_write_text(r.out / "trap_analysis.json", res.to_json() + "\n")])
    r.manifest.warnings.extend(res.warnings)
    # potential along both principal axes through the minimum, in meV
    s = np.linspace(-half, half, 201)
    x0, z0 = res.minimum_location
    series = {}
    for name, th in (("HF", res.theta_HF), ("LF", res.theta_LF)):
        u = unit(th)
        e = total.sample(x0 + s * u[0], z0 + s * u[1])
        series[f"U_{name}_meV"] = (e - res.minimum_value) / E_CHARGE * 1e3
    r.emit(emit_plotdata({"x": s, "x_name": "r_m", "x_unit": "m", "series": series,
                          "y_unit": "meV"}, "line", r.out / "potential_axes"))
    r.manifest.results.update({
        "f_HF_Hz": res.omega_HF / (2 * math.pi), "f_LF_Hz": res.omega_LF / (2 * math.pi),
        "theta_HF_deg": res.theta_HF, "theta_LF_deg": res.theta_LF,
        "trap_depth_eV": res.trap_depth, "q": res.mathieu["q"],
        "a_HF": res.mathieu["a_HF"], "a_LF": res.mathieu["a_LF"], "stable": res.stable})


def _write_text(path, text):
    Path(path).write_text(text)
    return Path(path)


# -- resonator-fit ---------------------------------------------------------

def _synthesize(sec, seed):
    from ..resonator import SpectrumTrace
    from ..resonator.models import coupled_core, notch_core

    _need(sec, "f_r", "Q_int", "Q_ext", "f_start", "f_stop", section="synthesize")
    if not sec["f_stop"] > sec["f_start"] or sec["n_points"] < 10:
        raise ConfigError("[synthesize] needs f_stop > f_start and at least 10 points")
    f = np.linspace(sec["f_start"], sec["f_stop"], sec["n_points"])
    if sec["kind"] == "notch-S21":
        s = notch_core(f, sec["f_r"], sec["Q_int"], sec["Q_ext"])
    else:
        s = coupled_core(f, sec["f_r"], sec["g_m"], sec["Q_int"], sec["Q_ext"])
    f0 = 0.5 * (f[0] + f[-1])
    s = s * sec["amplitude"] * np.exp(1j * math.radians(sec["phase"])) \
        * np.exp(-2j * math.pi * (f - f0) * sec["delay"])
    sigma = sec["sigma"]
    if sigma > 0:
        rng = np.random.default_rng(seed)
        s = s + sigma * (rng.standard_normal(f.size) + 1j * rng.standard_normal(f.size))
    return SpectrumTrace(f, s, 0.0, sec["kind"], sigma or None)


def _resonator_fit(r: _Run):
    from ..resonator import fit_coupled, fit_notch, read_trace, write_trace
    from ..resonator.models import coupled_core, notch_core

    inp = r.cfg.section("input")
    if inp.get("trace"):
        try:
            trace = read_trace(inp["trace"], inp.get("sidecar"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read trace: {exc}") from exc
    else:
        trace = _synthesize(r.cfg.section("synthesize"), r.cfg.seed)
        r.emit(write_trace(trace, r.out / "trace"))
    model = inp.get("model") or ("notch" if trace.kind == "notch-S21" else "coupled")
    want = "notch-S21" if model == "notch" else "reflection-S11"
    if trace.kind != want:
        raise ConfigError(f"model {model!r} needs a {want} trace, got {trace.kind}")
    with r.timed("fit"):
        fit = fit_notch(trace) if model == "notch" else fit_coupled(trace)
    r.emit([_write_text(r.out / "fit.json", fit.to_json() + "\n")])
    p, bg = fit.params, fit.background
    f = trace.frequencies
    core = (notch_core(f, p.f_r, p.Q_int, p.Q_ext) if model == "notch"
            else coupled_core(f, p.f_r, p.g_m, p.Q_int, p.Q_ext))
    fitted = bg["amplitude"] * np.exp(1j * bg["phase_rad"]) \
        * np.exp(-2j * math.pi * (f - bg["f_ref_Hz"]) * bg["delay_s"]) * core
    r.emit(emit_plotdata({"x": f, "x_name": "frequency_Hz", "x_unit": "Hz",
                          "series": {"abs_S_data": np.abs(trace.s_values),
                                     "abs_S_fit": np.abs(fitted)}},
                         "line", r.out / "fit_curve"))
    r.manifest.results.update({"model": model, "f_r_Hz": p.f_r, "Q_int": p.Q_int,
                               "Q_ext": p.Q_ext, "g_m_Hz": p.g_m,
                               "residual_norm": fit.residual_norm})


# -- gate-power ------------------------------------------------------------

_PHYS_FIELDS = {"phi": "phi_deg", "theta_HF": "theta_HF_deg"}


def _gate_power(r: _Run):
    from .. import gatepower as gp

    phys = {_PHYS_FIELDS.get(k, k): v for k, v in r.cfg.section("physics").items()}
    try:
        p = gp.REFERENCE_GATE.scaled(**phys)
    except ValueError as exc:
        raise ConfigError(f"[physics] {exc}") from exc
    grid = r.cfg.section("grid")
    bad = set(grid["schemes"]) - set(gp.SCHEMES)
    if bad or not grid["schemes"]:
        raise ConfigError(f"[grid] schemes must be drawn from {gp.SCHEMES}")
    if grid.get("n_Q_int"):
        _need(grid, "Q_int_min", "Q_int_max", section="grid")
        q_int = np.logspace(math.log10(grid["Q_int_min"]), math.log10(grid["Q_int_max"]),
                            grid["n_Q_int"])
    else:
        q_int = np.asarray(grid["Q_int_list"], float)
    if grid["n_Q_ext"] < 2 or not grid["Q_ext_max"] > grid["Q_ext_min"] > 0:
        raise ConfigError("[grid] needs 0 < Q_ext_min < Q_ext_max and n_Q_ext >= 2")
    if np.any(q_int <= 0):
        raise ConfigError("[grid] Q_int values must be positive")
    q_ext = np.logspace(math.log10(grid["Q_ext_min"]), math.log10(grid["Q_ext_max"]),
                        grid["n_Q_ext"])
    minima = {}
    for scheme in grid["schemes"]:
        with r.timed(f"power_map_{scheme}"):
            pm = gp.power_map(p, q_int, q_ext, scheme)
        r.emit(emit_plotdata({"x": q_int, "y": q_ext, "z": pm.P_total,
                              "x_name": "Q_int", "y_name": "Q_ext", "z_name": "P_W",
                              "x_scale": "log", "y_scale": "log", "z_unit": "W",
                              "z_scale": "log"}, "heatmap", r.out / f"power_map_{scheme}"))
        names = list(pm.components)
        rows = ((q_int[i], q_ext[j], *(pm.components[n][i, j] for n in names))
                for i in range(q_int.size) for j in range(q_ext.size))
        r.emit([write_csv(r.out / f"power_components_{scheme}.csv",
                          ["Q_int", "Q_ext"] + [f"{n}_W" for n in names], rows)])
        rows = []
        with r.timed(f"optimize_{scheme}"):
            for qi in list(q_int) + [math.inf]:
                b = gp.minimum_power(p, qi, scheme)
                i = int(np.argmin(np.abs(q_int - qi))) if math.isfinite(qi) else None
                rows.append({"Q_int": qi, "optimal_Q_ext": b.optimal_Q_ext,
                             "P_min_W": b.P_total, "components_W": b.components,
                             "grid_argmin_Q_ext": pm.argmin_q_ext(i) if i is not None else None})
        minima[scheme] = rows
    r.json("power_minima.json", {"minima": minima, "physics": _physics_dict(p)})
    r.manifest.results["P_min_W"] = {s: {repr(float(row["Q_int"])): row["P_min_W"] for row in rows}
                                     for s, rows in minima.items()}


def _physics_dict(p):
    from dataclasses import asdict
    return asdict(p)


# -- gate-sim --------------------------------------------------------------

def _gate_sim(r: _Run):
    from .. import gatedynamics as gd

    d = r.cfg.section("drive")
    if d["n_max"] < 1 or d["steps_per_limit"] < 1 or d["sample_every"] < 1:
        raise ConfigError("[drive] n_max, steps_per_limit and sample_every must be >= 1")
    try:
        cfg = gd.gate_config(d["Omega_S"], d["ratio"], d["n_max"], d["steps_per_limit"],
                             d.get("delta"), d.get("duration"))
    except ValueError as exc:
        raise ConfigError(f"[drive] {exc}") from exc
    psi0 = gd.initial_state(cfg.n_max)
    with r.timed("evolve"):
        full = gd.evolve(cfg, psi0, d["sample_every"])
    with r.timed("evolve_effective"):
        ideal = gd.evolve_effective(cfg, psi0, d["sample_every"])
    rep = gd.bell_infidelity(full, ideal)
    r.emit([gd.write_trajectory(r.out / "trajectory.csv", full, ideal)])
    band = {"reference": SS_REFERENCE_INFIDELITY,
            "within_factor_3": SS_REFERENCE_INFIDELITY / 3 <= rep.full
            <= 3 * SS_REFERENCE_INFIDELITY}
    result = {"ratio": d["ratio"], "infidelity_full": rep.full, "infidelity_spin": rep.spin,
              "n_steps": cfg.n_steps, "dt_s": cfg.dt, "duration_s": cfg.duration,
              "n_max": cfg.n_max, "norm_drift": full.meta["norm_drift"],
              "concurrence_ideal": gd.concurrence(gd.reduced_spin(ideal.final, cfg.n_max)),
              "concurrence_full": gd.concurrence(gd.reduced_spin(full.final, cfg.n_max))}
    if math.isclose(d["ratio"], 15.0):
        result["reference_band"] = band
        if not band["within_factor_3"]:
            r.manifest.warnings.append(
                f"infidelity {rep.full:.3g} outside a factor 3 of {SS_REFERENCE_INFIDELITY:g}")
    ratios = r.cfg.section("sweep").get("ratio_list")
    if ratios:
        try:
            with r.timed("ratio_sweep"):
                table = gd.infidelity_vs_ratio(ratios, cfg, workers=thread_count())
        except ValueError as exc:
            raise ConfigError(f"[sweep] {exc}") from exc
        t = np.array(table)
        r.emit(emit_plotdata({"x": t[:, 0], "x_name": "ratio",
                              "series": {"infidelity_full": t[:, 1],
                                         "infidelity_spin": t[:, 2]},
                              "y_scale": "log"}, "line", r.out / "infidelity_vs_ratio"))
        result["sweep"] = [{"ratio": a, "infidelity_full": b, "infidelity_spin": c}
                           for a, b, c in table]
    r.json("gate_sim.json", result)
    r.manifest.results.update({k: v for k, v in result.items() if k != "sweep"})


PIPELINES = {
    "field-solve": _field_solve,
    "trap-analyze": _trap_analyze,
    "resonator-fit": _resonator_fit,
    "gate-power": _gate_power,
    "gate-sim": _gate_sim,
}


def run(cfg: RunConfig, out_dir) -> RunManifest:
    """Execute ``cfg`` writing into ``out_dir``; errors propagate after the
    manifest (with the error recorded) has been written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    manifest = RunManifest(cfg.command, cfg.source_hash, __version__, cfg.seed)
    r = _Run(cfg, out, manifest)
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            PIPELINES[cfg.command](r)
        for w in caught:
            msg = str(w.message)
            if msg not in manifest.warnings:
                manifest.warnings.append(msg)
    except (DomainError, ConfigError) as exc:
        manifest.status = "error"
        manifest.error = {"type": type(exc).__name__, "message": str(exc),
                          "exit_code": 1 if isinstance(exc, DomainError) else 2}
        raise
    finally:
        manifest.timings["total"] = time.perf_counter() - t0
        manifest.add_files(out, r.paths)
        manifest.write(out)
    return manifest
