import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sctrap.cli import UnitError, dump_config, emit_plotdata, main, parse_config
from sctrap.errors import ConfigError
from sctrap.fieldsolver import FieldMap
from sctrap.gatepower import REFERENCE_GATE, minimum_power

from conftest import uniform_mesh

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def outputs(out_dir):
    """Bytes of every emitted file except the manifest (which holds timings)."""
    return {p.relative_to(out_dir).as_posix(): p.read_bytes()
            for p in sorted(Path(out_dir).rglob("*"))
            if p.is_file() and p.name != "manifest.json"}


# -- parse_config ---------------------------------------------------------

def test_reference_config_in_si():
    cfg = parse_config(CONFIGS / "gate_power_reference.toml")
    phys = cfg.section("physics")
    assert cfg.command == "gate-power"
    assert phys["omega_rock"] == pytest.approx(2.7646e7, rel=1e-4)
    assert phys["g_m"] == pytest.approx(2 * math.pi * 30e6)
    assert phys["q0"] == 9.30e-9
    assert phys["phi"] == 45.0
    assert len(cfg.source_hash) == 64


def test_missing_required_field(tmp_path):
    p = write(tmp_path, '[run]\ncommand = "trap-analyze"\n[drive]\nV_rf_V = 10\n')
    with pytest.raises(ConfigError, match="Omega_rf"):
        parse_config(p)


def test_duplicate_key(tmp_path):
    p = write(tmp_path, '[drive]\nOmega_S_kHz = 2\nOmega_S_kHz = 3\n')
    with pytest.raises(ConfigError, match="line"):
        parse_config(p, "gate-sim")
    p = write(tmp_path, '[drive]\nOmega_S_kHz = 2\nOmega_S_Hz = 3\n')
    with pytest.raises(ConfigError, match="more than once"):
        parse_config(p, "gate-sim")


def test_unknown_key_and_section(tmp_path):
    p = write(tmp_path, '[drive]\nOmega_S_kHz = 2\nbogus = 1\n')
    with pytest.raises(ConfigError, match="bogus"):
        parse_config(p, "gate-sim")
    p = write(tmp_path, '[drive]\nOmega_S_kHz = 2\n[extra]\nx = 1\n')
    with pytest.raises(ConfigError, match="extra"):
        parse_config(p, "gate-sim")


def test_unit_errors(tmp_path):
    p = write(tmp_path, '[drive]\nOmega_S_um = 2\n')
    with pytest.raises(UnitError, match="_um"):
        parse_config(p, "gate-sim")
    p = write(tmp_path, '[drive]\nOmega_S = 2\n')
    with pytest.raises(UnitError):
        parse_config(p, "gate-sim")


def test_command_mismatch(tmp_path):
    p = write(tmp_path, '[run]\ncommand = "gate-sim"\n[drive]\nOmega_S_kHz = 2\n')
    with pytest.raises(ConfigError):
        parse_config(p, "gate-power")


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.toml")))
def test_dump_round_trip(tmp_path, name):
    cfg = parse_config(CONFIGS / name)
    again = parse_config(write(tmp_path, dump_config(cfg)))
    assert again.command == cfg.command and again.seed == cfg.seed
    assert again.parameters == cfg.parameters
    assert dump_config(again) == dump_config(cfg)


# -- exit codes and stdout ------------------------------------------------

def test_success_prints_manifest_path(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["gate-power", str(CONFIGS / "gate_power_reference.toml"), "--out", str(out)]) == 0
    printed = capsys.readouterr().out.strip()
    assert printed == str(out / "manifest.json")
    man = json.loads(Path(printed).read_text())
    assert man["status"] == "ok" and man["error"] is None
    listed = {f["path"] for f in man["files"]}
    assert listed == set(outputs(out))


def test_config_error_exit_2(tmp_path, capsys):
    p = write(tmp_path, '[run]\ncommand = "trap-analyze"\n[drive]\nV_rf_V = 10\n')
    assert main(["trap-analyze", str(p), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr()
    assert "Omega_rf" in err.err and err.out == ""


def test_domain_error_exit_1(tmp_path, capsys):
    p = write(tmp_path, """
[synthesize]
f_r_GHz = 6.0
Q_int = 1e4
Q_ext = 1e9
f_start_GHz = 5.998
f_stop_GHz = 6.002
n_points = 1001
sigma = 0.01
""")
    out = tmp_path / "o"
    assert main(["resonator-fit", str(p), "--out", str(out)]) == 1
    captured = capsys.readouterr()
    assert captured.out.strip() == str(out / "manifest.json")
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "error" and man["error"]["exit_code"] == 1


def test_usage_error_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["not-a-command", "x.toml"])
    assert exc.value.code == 2


def test_console_script_stdout(tmp_path):
    out = tmp_path / "o"
    proc = subprocess.run([sys.executable, "-m", "sctrap.cli", "gate-power",
                           str(CONFIGS / "gate_power_reference.toml"), "--out", str(out)],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.strip().splitlines() == [str(out / "manifest.json")]


# -- pipelines ----------------------------------------------------------------

def test_gate_power_map_matches_optimizer(tmp_path):
    out = tmp_path / "o"
    assert main(["gate-power", str(CONFIGS / "gate_power_reference.toml"), "--out", str(out)]) == 0
    with open(out / "power_map_SS.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["Q_int", "Q_ext", "P_W"]
    data = np.array(rows[1:], float)
    best = data[np.argmin(data[:, 2])]
    ref = minimum_power(REFERENCE_GATE, best[0], "SS")
    q_ext = np.unique(data[:, 1])
    step = math.log(q_ext[1] / q_ext[0])
    assert abs(math.log(best[1] / ref.optimal_Q_ext)) <= step
    assert best[2] >= ref.P_total * (1 - 1e-12)
    minima = json.loads((out / "power_minima.json").read_text())["minima"]
    inf_row = [r for r in minima["SS"] if r["Q_int"] == "inf"][0]
    assert inf_row["P_min_W"] == pytest.approx(0.653e-3, rel=2e-3)


def test_resonator_round_trip(tmp_path):
    for name in ("resonator_notch.toml", "resonator_coupled.toml"):
        out = tmp_path / name
        assert main(["resonator-fit", str(CONFIGS / name), "--out", str(out)]) == 0
        cfg = parse_config(CONFIGS / name).section("synthesize")
        res = json.loads((out / "manifest.json").read_text())["results"]
        assert res["f_r_Hz"] == pytest.approx(cfg["f_r"], rel=1e-3)
        assert res["Q_int"] == pytest.approx(cfg["Q_int"], rel=1e-3)
        assert res["Q_ext"] == pytest.approx(cfg["Q_ext"], rel=1e-3)


def test_gate_sim_records_band(tmp_path):
    p = write(tmp_path, '[drive]\nOmega_S_kHz = 2\nratio = 15\nn_max = 6\nsample_every = 50\n')
    out = tmp_path / "o"
    assert main(["gate-sim", str(p), "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    band = man["results"]["reference_band"]
    assert band["reference"] == 7e-4
    assert band["within_factor_3"] == (7e-4 / 3 <= man["results"]["infidelity_full"] <= 2.1e-3)
    if not band["within_factor_3"]:
        assert any("factor 3" in w for w in man["warnings"])


def test_seeded_noise_is_reproducible(tmp_path):
    text = (CONFIGS / "resonator_notch.toml").read_text() + "sigma = 0.01\n"
    p = write(tmp_path, text)
    runs = []
    for k, seed in enumerate((7, 7, 8)):
        out = tmp_path / f"o{k}"
        assert main(["resonator-fit", str(p), "--out", str(out), "--seed", str(seed)]) == 0
        runs.append(outputs(out))
    assert runs[0] == runs[1]
    assert runs[0]["trace.csv"] != runs[2]["trace.csv"]


def test_gate_power_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["gate-power", str(CONFIGS / "gate_power_reference.toml"), "--out", str(out)]) == 0
    assert outputs(a) == outputs(b)


# -- plot data ----------------------------------------------------------------

def test_emit_heatmap(tmp_path):
    paths = emit_plotdata({"x": [1.0, 2.0], "y": [10.0, 20.0, 30.0], "z": np.ones((2, 3)),
                           "x_name": "Q_int", "y_name": "Q_ext", "z_name": "P_W"},
                          "heatmap", tmp_path / "hm")
    rows = list(csv.reader(open(paths[0])))
    assert rows[0] == ["Q_int", "Q_ext", "P_W"] and len(rows) == 7
    desc = json.loads(paths[-1].read_text())
    assert desc["kind"] == "heatmap" and desc["data"] == "hm.csv"


def test_emit_line_and_fieldmap(tmp_path):
    paths = emit_plotdata({"x": [0.0, 1.0], "x_name": "r_m",
                           "series": {"U_HF_meV": [0.0, 2.0]}, "y_unit": "meV"},
                          "line", tmp_path / "line")
    assert list(csv.reader(open(paths[0])))[0] == ["r_m", "U_HF_meV"]
    assert json.loads(paths[-1].read_text())["series"][0]["unit"] == "meV"
    mesh = uniform_mesh(1e-6, 5)
    fmap = FieldMap(mesh, "potential", np.zeros(mesh.shape))
    paths = emit_plotdata(fmap, "fieldmap", tmp_path / "fm")
    assert list(csv.reader(open(paths[0])))[0][:2] == ["x_m", "z_m"]


def test_emit_rejects_unknown_kind(tmp_path):
    with pytest.raises(ConfigError):
        emit_plotdata({}, "scatter", tmp_path / "x")
    with pytest.raises(ConfigError):
        emit_plotdata({"x": [0.0], "x_name": "a", "series": {"b": [1.0, 2.0]}}, "line",
                      tmp_path / "y")
