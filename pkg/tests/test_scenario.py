import csv
import io
import json
import math
import os

import numpy as np
import pytest
import yaml

from cofloat.scenario import (ConfigError, ScenarioConfig, WrenchProfile,
                              _canonical, build_world, format_rank_report,
                              human_wrench, load_scenario, rank_report, run)


@pytest.fixture(scope="module")
def pvc():
    return load_scenario("pvc_float")


# -- loading and canonical form -------------------------------------------------

def test_presets_load(pvc):
    assert pvc.name == "pvc_float"
    assert len(pvc.tree["robots"]) == 3
    assert pvc.tree["payload"]["bodies"][0]["mass"] == 15.6
    assert pvc.tree["robots"][0]["mode"] == "float"

    hinged = load_scenario("hinged_two_humans")
    assert hinged.tree["payload"]["hinge"] is not None
    assert len(hinged.tree["payload"]["bodies"]) == 2
    assert len(hinged.tree["payload"]["grips"]) == 2
    assert all(r["mode"] == "approx_float" for r in hinged.tree["robots"])

    wtd = load_scenario("walk_the_dog")
    assert wtd.tree["payload"] is None
    assert len(wtd.tree["robots"]) == 1
    assert wtd.tree["robots"][0]["mode"] == "gravity_comp"


def test_calibration_materialized_into_config(pvc):
    d = pvc.tree["robots"][0]["delta"]
    assert d["dr"] == pytest.approx(0.119324, abs=1e-5)
    assert d["z_off"] == pytest.approx(0.061826, abs=1e-5)


def test_canonical_save_idempotent(tmp_path, pvc):
    p1 = tmp_path / "a.yaml"
    pvc.save(str(p1))
    cfg2 = load_scenario(str(p1))
    p2 = tmp_path / "b.yaml"
    cfg2.save(str(p2))
    assert p1.read_text() == p2.read_text()


def test_missing_file_raises():
    with pytest.raises(ConfigError, match="no such scenario"):
        load_scenario("nope_not_here")


def test_schema_violation_names_field_and_line(tmp_path):
    text = """name: bad
robots:
  - base_pose: [0.0, 0.0]
"""
    p = tmp_path / "bad.yaml"
    p.write_text(text)
    with pytest.raises(ConfigError, match=r"robots\.0\.base_pose") as ei:
        load_scenario(str(p))
    assert "line 3" in str(ei.value)


def test_unreachable_grasp_rejected(tmp_path):
    cfg = {
        "name": "far",
        "robots": [{"base_pose": [0.0, 0.0, 0.0]}],
        "payload": {
            "bodies": [{"mass": 2.0, "inertia": [0.1, 0.1, 0.1]}],
            "attachments": [{"robot": 0, "body": 0, "point": [0.0, 0.0, 0.0]}],
            "initial_poses": [{"position": [0.9, 0.0, 0.42]}],
        },
    }
    p = tmp_path / "far.yaml"
    p.write_text(yaml.safe_dump(cfg))
    with pytest.raises(ConfigError, match="initial grasp unreachable"):
        load_scenario(str(p))


def test_rates_must_divide(tmp_path):
    cfg = {"name": "r", "robots": [], "rates": {"physics_hz": 4000.0,
                                                "control_hz": 300.0}}
    p = tmp_path / "r.yaml"
    p.write_text(yaml.safe_dump(cfg))
    with pytest.raises(ConfigError, match="divide"):
        load_scenario(str(p))


# -- wrench profiles -------------------------------------------------------------

def test_profile_constant_zero():
    prof = WrenchProfile(kind="constant")
    f, m = human_wrench(prof, 3.0)
    assert np.allclose(f, 0.0) and np.allclose(m, 0.0)


def test_profile_ramp_hold_midpoint():
    prof = WrenchProfile(kind="ramp_hold", force=[0.0, 0.0, 10.0],
                         ramp_s=1.0, start=0.0)
    f, _ = human_wrench(prof, 0.5)
    assert f[2] == pytest.approx(5.0)
    f, _ = human_wrench(prof, 2.0)
    assert f[2] == pytest.approx(10.0)


def test_profile_piecewise_requires_increasing_times():
    with pytest.raises(ConfigError, match="increase"):
        WrenchProfile(kind="piecewise",
                      points=[[0, 0, 0, 0, 0, 0, 0], [0, 1, 0, 0, 0, 0, 0]])


def test_profile_piecewise_is_continuous():
    prof = WrenchProfile(kind="piecewise",
                         points=[[0, 0, 0, 0, 0, 0, 0],
                                 [1, 0, 4, 0, 0, 0, 0],
                                 [2, 0, 0, 0, 0, 0, 0]])
    ts = np.linspace(-0.5, 2.5, 400)
    vals = np.array([human_wrench(prof, t)[0][1] for t in ts])
    assert np.abs(np.diff(vals)).max() < 4.0 * (ts[1] - ts[0]) * 1.01
    assert human_wrench(prof, 0.5)[0][1] == pytest.approx(2.0)


def test_profile_sine_sweep_instantaneous_frequency():
    # spectrogram oracle: the chirp's ridge frequency tracks
    # f0 + (f1 - f0) t / T
    from scipy.signal import stft
    prof = WrenchProfile(kind="sine_sweep", amplitude=5.0,
                         axis=[1.0, 0.0, 0.0], f0=0.2, f1=1.0, sweep_s=40.0)
    fs = 50.0
    ts = np.arange(0.0, 40.0, 1.0 / fs)
    sig = np.array([human_wrench(prof, t)[0][0] for t in ts])
    freqs, times, Z = stft(sig, fs=fs, nperseg=256)
    mag = np.abs(Z)
    for ti, t in enumerate(times):
        if t < 4.0 or t > 36.0:
            continue
        ridge = freqs[mag[:, ti].argmax()]
        expect = 0.2 + (1.0 - 0.2) * t / 40.0
        assert ridge == pytest.approx(expect, abs=0.25)


def test_profile_hold_is_spring_damper():
    prof = WrenchProfile(kind="hold", stiffness=200.0, damping=10.0,
                         anchor=[1.0, 0.0, 0.0])
    cfg = {"grip": "g", "profile": {"kind": "hold", "stiffness": 200.0}}
    # direct evaluation through attach_humans is covered by the hinged
    # preset; here just the dataclass plumbing
    assert prof.stiffness == 200.0


def test_interactive_in_batch_warns_and_zeroes(tmp_path):
    cfg = {
        "name": "inter",
        "duration": 0.1,
        "robots": [{"base_pose": [0.0, 0.0, 0.0], "mode": "gravity_comp"}],
        "payload": None,
        "humans": [{"grip": "robot:0", "profile": {"kind": "interactive"}}],
    }
    p = tmp_path / "i.yaml"
    p.write_text(yaml.safe_dump(cfg))
    rep = run(load_scenario(str(p)))
    assert rep.ok
    events = [json.loads(l) for l in rep.telemetry["events.jsonl"].splitlines()]
    assert any(e["kind"] == "interactive_profile_in_batch" for e in events)
    assert rep.peak_human_force == 0.0


# -- runner ------------------------------------------------------------------------

def test_zero_duration_run_is_empty_success(pvc):
    rep = run(pvc, duration=0.0)
    assert rep.ok
    lines = rep.telemetry["payload.csv"].splitlines()
    assert len(lines) == 1 and lines[0].startswith("tick,t,b0_px")
    assert len(rep.telemetry["robots.csv"].splitlines()) == 1


def test_run_writes_outputs(tmp_path, pvc):
    rep = run(pvc, duration=0.05, out_dir=str(tmp_path))
    for name in ("payload.csv", "robots.csv", "events.jsonl",
                 "summary.json", "config.yaml"):
        assert (tmp_path / name).exists()
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["ok"] is True
    assert summary["name"] == "pvc_float"


def test_telemetry_decimation_default_100hz(pvc):
    rep = run(pvc, duration=0.2)
    rows = rep.telemetry["payload.csv"].splitlines()[1:]
    ticks = [int(r.split(",")[0]) for r in rows]
    assert all(t % 40 == 0 for t in ticks)


@pytest.mark.slow
def test_determinism_byte_identical(pvc):
    a = run(pvc, duration=1.5, seed=7)
    b = run(pvc, duration=1.5, seed=7)
    assert a.telemetry["payload.csv"] == b.telemetry["payload.csv"]
    assert a.telemetry["robots.csv"] == b.telemetry["robots.csv"]
    assert a.telemetry["events.jsonl"] == b.telemetry["events.jsonl"]


# -- rank report --------------------------------------------------------------------

def test_rank_report_rigid(pvc):
    rows = rank_report(pvc)
    by_label = {r["label"]: r["rank"] for r in rows}
    assert by_label["1 robot"] == 3
    assert by_label["2 robots"] == 5
    assert by_label["3 robots"] == 6
    assert by_label["3 robots, collinear wrists"] == 5
    text = format_rank_report(rows)
    assert "collinear" in text


def test_rank_report_hinged():
    rows = rank_report(load_scenario("hinged_two_humans"))
    by_label = {r["label"]: r["rank"] for r in rows}
    assert by_label["3 robots"] == 7
    assert by_label["3 robots, collinear wrists"] == 5


@pytest.mark.slow
def test_hinged_preset_articulates_with_pinned_com():
    # two held humans scissor the hinged pair: the hinge swings tens of
    # degrees while the assembly's COM stays within 5 cm
    rep = run(load_scenario("hinged_two_humans"))
    assert rep.ok
    rows = list(csv.DictReader(io.StringIO(rep.telemetry["payload.csv"])))
    h = np.degrees([float(r["hinge_angle"]) for r in rows])
    b0 = np.stack([[float(r["b0_px"]), float(r["b0_py"])] for r in rows])
    b1 = np.stack([[float(r["b1_px"]), float(r["b1_py"])] for r in rows])
    com = (5.0 * b0 + 4.0 * b1) / 9.0
    walk = np.linalg.norm(com - com[0], axis=1)
    assert h.max() - h.min() > 10.0
    assert walk.max() < 0.05


def test_rank_report_needs_payload():
    with pytest.raises(ConfigError, match="payload"):
        rank_report(load_scenario("walk_the_dog"))
