"""Declarative experiments: config loading, scripted human wrenches, the
batch runner with telemetry, and manipulability reports.

A scenario file is a single YAML document.  Loading materializes every
default (including the calibrated manipulator geometry) so the canonical
saved form is a complete, reproducible record of the experiment.
"""

from __future__ import annotations

import bisect
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .delta import DeltaParams, calibrate, fk as _fk
from .manip_ctrl import ManipModel, Mode, TeamGeometry, startup_calibration
from .mobase import BaseParams
from .multibody import (Hinge, PayloadBody, PayloadModel, RobotSpec,
                        SimulationFault, World, manipulability)
from .sea import SeaParams
from .spatial import Pose, rot_x, rot_y, rot_z


class ConfigError(ValueError):
    """Scenario file failed validation; message names the field (and line)."""


# ---------------------------------------------------------------------------
# wrench profiles

PROFILE_KINDS = ("constant", "ramp_hold", "sine_sweep", "piecewise",
                 "hold", "interactive")


@dataclass
class WrenchProfile:
    """Deterministic human wrench as a function of time (world frame)."""

    kind: str
    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    moment: np.ndarray = field(default_factory=lambda: np.zeros(3))
    start: float = 0.0
    end: float = math.inf
    ramp_s: float = 0.0
    amplitude: float = 0.0
    axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    f0: float = 0.1
    f1: float = 1.0
    sweep_s: float = 10.0
    points: list = field(default_factory=list)   # rows [t, fx fy fz mx my mz]
    stiffness: float = 200.0    # hold: virtual hand spring, N/m
    damping: float = 30.0       # hold: virtual hand damping, N*s/m
    anchor: list | None = None  # hold: world anchor; None pins the start pose

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ConfigError(f"unknown profile kind {self.kind!r}")
        self.force = np.asarray(self.force, dtype=float).reshape(3)
        self.moment = np.asarray(self.moment, dtype=float).reshape(3)
        self.axis = np.asarray(self.axis, dtype=float).reshape(3)
        if self.kind == "piecewise":
            pts = np.asarray(self.points, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 7:
                raise ConfigError(
                    "piecewise profile rows must be [t, fx, fy, fz, mx, my, mz]")
            if np.any(np.diff(pts[:, 0]) <= 0):
                raise ConfigError("piecewise profile times must increase")
            self.points = pts
            self._tgrid = [float(v) for v in pts[:, 0]]


_ZERO3 = np.zeros(3)


def human_wrench(profile: WrenchProfile, t: float):
    """Evaluate a profile: returns (force, moment) in the world frame."""
    k = profile.kind
    if k == "interactive":
        return _ZERO3, _ZERO3
    if k == "constant":
        if profile.start <= t <= profile.end:
            return profile.force, profile.moment
        return _ZERO3, _ZERO3
    if k == "ramp_hold":
        if t < profile.start or t > profile.end:
            return _ZERO3, _ZERO3
        if profile.ramp_s > 0 and t < profile.start + profile.ramp_s:
            s = (t - profile.start) / profile.ramp_s
            return s * profile.force, s * profile.moment
        return profile.force, profile.moment
    if k == "sine_sweep":
        if t < profile.start or t > profile.start + profile.sweep_s:
            return _ZERO3, _ZERO3
        tt = t - profile.start
        T = profile.sweep_s
        phase = 2.0 * math.pi * (profile.f0 * tt +
                                 (profile.f1 - profile.f0) * tt * tt / (2.0 * T))
        amp = profile.amplitude
        if profile.ramp_s > 0.0:
            # ease the excitation in and out: a step-started sine carries a
            # mean-velocity component that winds up free payload modes
            amp *= min(1.0, tt / profile.ramp_s, (T - tt) / profile.ramp_s)
        return amp * math.sin(phase) * profile.axis, _ZERO3
    # piecewise linear; the time grid is a plain list for cheap bisection
    tgrid = profile._tgrid
    if t <= tgrid[0]:
        row = profile.points[0, 1:]
    elif t >= tgrid[-1]:
        row = profile.points[-1, 1:]
    else:
        i = bisect.bisect_right(tgrid, t) - 1
        s = (t - tgrid[i]) / (tgrid[i + 1] - tgrid[i])
        row = (1 - s) * profile.points[i, 1:] + s * profile.points[i + 1, 1:]
    return row[:3], row[3:]


# ---------------------------------------------------------------------------
# config handling

def _schema():
    import importlib.resources as res
    with res.files("cofloat").joinpath("schema/scenario.schema.json").open() as f:
        return json.load(f)


def _yaml_lines(text: str):
    """Map config tree paths to 1-based line numbers via the YAML node graph."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return {}
    lines = {}

    def walk(node, path):
        lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for kn, vn in node.value:
                walk(vn, path + (kn.value,))
        elif isinstance(node, yaml.SequenceNode):
            for i, vn in enumerate(node.value):
                walk(vn, path + (i,))

    if root is not None:
        walk(root, ())
    return lines


ROBOT_DEFAULTS = {
    "mode": "float",
    "recenter": True,
    "base_pose": [0.0, 0.0, 0.0],
}
CONTROL_DEFAULTS = {
    "c_spring": 300.0, "eps": 0.03, "k_rest": 2000.0, "band": 0.02,
    "b_rest": 80.0, "lead_s": 0.025, "active_damping": 3.0,
}
MANIP_DEFAULTS = {"wrist_mass": 0.6, "joint_inertia": [0.0, 0.0, 0.0]}
RATE_DEFAULTS = {"physics_hz": 4000.0, "sea_hz": 800.0, "control_hz": 100.0,
                 "telemetry_hz": 100.0}
STARTUP_DEFAULTS = {"hold_s": 0.6, "quiescence_s": 0.5}
CAL_DEFAULTS = {"home_z": 0.420, "K_zz": 2000.0}


def _sea_dict_defaults(d):
    p = SeaParams()
    out = {
        "k": p.k, "tau_max": p.tau_max, "motor_inertia": p.motor_inertia,
        "motor_damping": p.motor_damping, "kp": p.kp, "ki": p.ki, "kd": p.kd,
        "motor_tau_max": p.motor_tau_max,
        "encoder_bits": p.encoder_bits, "quantize": p.quantize,
    }
    out.update(d or {})
    return out


def _base_dict_defaults(d):
    p = BaseParams()
    out = {
        "wheel_radius": p.wheel_radius, "half_length": p.half_length,
        "half_width": p.half_width,
        "twist_time_constant": p.twist_time_constant,
        "v_max": p.v_max, "w_max": p.w_max, "kp_xy": p.kp_xy,
        "kd_xy": p.kd_xy, "kp_yaw": p.kp_yaw, "kd_yaw": p.kd_yaw,
        "slip_gains": None,
    }
    out.update(d or {})
    return out


def _delta_dict_defaults(d, sea_k, physics_hz):
    dd = dict(d or {})
    out = {
        "L1": dd.get("L1", 0.200), "L2": dd.get("L2", 0.368),
        "theta_min_deg": dd.get("theta_min_deg", -15.0),
        "theta_max_deg": dd.get("theta_max_deg", 100.0),
        "workspace_radius": dd.get("workspace_radius", 0.15),
        "home_theta_deg": dd.get("home_theta_deg", 36.6),
    }
    cal = dict(CAL_DEFAULTS)
    cal.update(dd.get("calibration", {}) or {})
    if "dr" in dd and "z_off" in dd:
        out["dr"] = dd["dr"]
        out["z_off"] = dd["z_off"]
    else:
        dr, z_off = calibrate(
            out["L1"], out["L2"], math.radians(out["home_theta_deg"]),
            cal["home_z"], cal["K_zz"], sea_k)
        out["dr"] = float(dr)
        out["z_off"] = float(z_off)
    out["calibration"] = cal
    return out


def _canonical(cfg: dict) -> dict:
    """Materialize every default; returns a plain-types config tree."""
    out = {
        "name": cfg.get("name", "scenario"),
        "duration": float(cfg.get("duration", 10.0)),
        "seed": int(cfg.get("seed", 0)),
        "gravity": float(cfg.get("gravity", 9.81)),
    }
    rates = dict(RATE_DEFAULTS)
    rates.update(cfg.get("rates", {}) or {})
    out["rates"] = {k: float(v) for k, v in sorted(rates.items())}
    startup = dict(STARTUP_DEFAULTS)
    startup.update(cfg.get("startup", {}) or {})
    out["startup"] = {k: float(v) for k, v in sorted(startup.items())}

    robots = []
    for rd in cfg.get("robots", []):
        r = dict(ROBOT_DEFAULTS)
        r["base_pose"] = [float(v) for v in
                          (rd.get("base_pose", [0.0, 0.0, 0.0]))]
        r["mode"] = rd.get("mode", "float")
        r["recenter"] = bool(rd.get("recenter", True))
        r["sea"] = _sea_dict_defaults(rd.get("sea"))
        r["delta"] = _delta_dict_defaults(
            rd.get("delta"), r["sea"]["k"], rates["physics_hz"])
        manip = dict(MANIP_DEFAULTS)
        manip.update(rd.get("manip", {}) or {})
        r["manip"] = manip
        control = dict(CONTROL_DEFAULTS)
        control.update(rd.get("control", {}) or {})
        r["control"] = control
        r["base"] = _base_dict_defaults(rd.get("base"))
        robots.append(r)
    out["robots"] = robots

    pd = cfg.get("payload")
    if pd is None:
        out["payload"] = None
    else:
        bodies = []
        for b in pd["bodies"]:
            inertia = b["inertia"]
            arr = np.asarray(inertia, dtype=float)
            if arr.shape == (3,):
                arr = np.diag(arr)
            bodies.append({
                "mass": float(b["mass"]),
                "inertia": [[float(x) for x in row] for row in arr],
                "com_offset": [float(v) for v in b.get("com_offset", [0, 0, 0])],
            })
        hinge = pd.get("hinge")
        if hinge is not None:
            hinge = {
                "body_a": int(hinge["body_a"]), "body_b": int(hinge["body_b"]),
                "pivot": [float(v) for v in hinge["pivot"]],
                "axis": [float(v) for v in hinge["axis"]],
                "damping": float(hinge.get("damping", 0.2)),
            }
        out["payload"] = {
            "bodies": bodies,
            "hinge": hinge,
            "attachments": [
                {"robot": int(a["robot"]), "body": int(a.get("body", 0)),
                 "point": [float(v) for v in a["point"]]}
                for a in pd.get("attachments", [])
            ],
            "grips": {
                name: {"body": int(g.get("body", 0)),
                       "point": [float(v) for v in g["point"]]}
                for name, g in sorted((pd.get("grips") or {}).items())
            },
            "initial_poses": [
                {"position": [float(v) for v in p.get("position", [0, 0, 0])],
                 "rpy_deg": [float(v) for v in p.get("rpy_deg", [0, 0, 0])]}
                for p in pd.get("initial_poses",
                                [{} for _ in pd["bodies"]])
            ],
        }

    humans = []
    for h in cfg.get("humans", []) or []:
        prof = dict(h["profile"])
        prof["kind"] = prof.get("kind", "constant")
        humans.append({"grip": h["grip"], "profile": prof})
    out["humans"] = humans
    out["output"] = {
        "dir": (cfg.get("output", {}) or {}).get("dir"),
        "full_rate": bool((cfg.get("output", {}) or {}).get("full_rate", False)),
    }
    return out


@dataclass
class ScenarioConfig:
    """Validated, fully-materialized scenario description."""

    tree: dict

    @property
    def name(self) -> str:
        return self.tree["name"]

    @property
    def duration(self) -> float:
        return self.tree["duration"]

    def canonical_yaml(self) -> str:
        return yaml.safe_dump(self.tree, sort_keys=True,
                              default_flow_style=None, width=100)

    def save(self, path: str):
        with open(path, "w") as f:
            f.write(self.canonical_yaml())


def preset_path(name: str) -> str:
    import importlib.resources as res
    p = res.files("cofloat").joinpath(f"presets/{name}.yaml")
    return str(p)


def load_scenario(path: str) -> ScenarioConfig:
    """Load, validate and canonicalize a scenario file.

    `path` may also be the bare name of a shipped preset.  Schema errors
    name the offending field and its line in the file.
    """
    if not os.path.exists(path) and "/" not in path and "." not in path:
        cand = preset_path(path)
        if os.path.exists(cand):
            path = cand
    if not os.path.exists(path):
        raise ConfigError(f"no such scenario file or preset: {path}")
    with open(path) as f:
        text = f.read()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = f" (line {mark.line + 1})" if mark else ""
        raise ConfigError(f"yaml parse error{line}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("scenario file must be a mapping")

    import jsonschema
    lines = _yaml_lines(text)
    try:
        jsonschema.validate(raw, _schema())
    except jsonschema.ValidationError as e:
        path_t = tuple(e.absolute_path)
        line = lines.get(path_t)
        where = ".".join(str(p) for p in path_t) or "<root>"
        lineinfo = f" (line {line})" if line else ""
        raise ConfigError(f"field {where}{lineinfo}: {e.message}") from e

    cfg = ScenarioConfig(_canonical(raw))
    _semantic_checks(cfg)
    return cfg


def _semantic_checks(cfg: ScenarioConfig):
    t = cfg.tree
    r = t["rates"]
    for key in ("sea_hz", "control_hz", "telemetry_hz"):
        if r["physics_hz"] % r[key] != 0:
            raise ConfigError(f"field rates.{key}: must divide physics_hz")
    pay = t["payload"]
    if pay is not None:
        nb = len(pay["bodies"])
        for i, a in enumerate(pay["attachments"]):
            if a["robot"] >= len(t["robots"]):
                raise ConfigError(
                    f"field payload.attachments.{i}.robot: no such robot")
            if a["body"] >= nb:
                raise ConfigError(
                    f"field payload.attachments.{i}.body: no such body")
        if pay["hinge"] is not None and nb < 2:
            raise ConfigError("field payload.hinge: needs two bodies")
        for name, g in pay["grips"].items():
            if g["body"] >= nb:
                raise ConfigError(f"field payload.grips.{name}.body: no such body")
    for i, h in enumerate(t["humans"]):
        grip = h["grip"]
        known = set((pay or {"grips": {}})["grips"].keys())
        if not (isinstance(grip, str) and (
                grip in known or grip.startswith("robot:"))):
            raise ConfigError(
                f"field humans.{i}.grip: unknown grip {grip!r}")
        WrenchProfile(**_profile_kwargs(h["profile"]))  # validates
    # reachability is checked by world construction below; surface the
    # canonical message here
    try:
        build_world(cfg)
    except ValueError as e:
        if "unreachable" in str(e):
            raise ConfigError("initial grasp unreachable") from e
        raise


def _profile_kwargs(p: dict) -> dict:
    kw = dict(p)
    kind = kw.pop("kind")
    out = {"kind": kind}
    for name in ("force", "moment", "axis"):
        if name in kw:
            out[name] = kw.pop(name)
    for name in ("start", "end", "ramp_s", "amplitude", "f0", "f1", "sweep_s",
                 "stiffness", "damping"):
        if name in kw:
            out[name] = float(kw.pop(name))
    if "anchor" in kw:
        out["anchor"] = kw.pop("anchor")
    if "points" in kw:
        out["points"] = kw.pop("points")
    if kw:
        raise ConfigError(f"unknown profile fields: {sorted(kw)}")
    return out


# ---------------------------------------------------------------------------
# world construction and commissioning

def _rpy(deg):
    r, p, y = (math.radians(v) for v in deg)
    return rot_z(y) @ rot_y(p) @ rot_x(r)


def build_world(cfg: ScenarioConfig) -> World:
    t = cfg.tree
    robots = []
    for rd in t["robots"]:
        d = rd["delta"]
        dp = DeltaParams(
            L1=d["L1"], L2=d["L2"], dr=d["dr"], z_off=d["z_off"],
            theta_min=math.radians(d["theta_min_deg"]),
            theta_max=math.radians(d["theta_max_deg"]),
            workspace_radius=d["workspace_radius"],
            home_theta=math.radians(d["home_theta_deg"]))
        s = rd["sea"]
        sea = SeaParams(
            k=s["k"], tau_max=s["tau_max"], motor_inertia=s["motor_inertia"],
            motor_damping=s["motor_damping"], kp=s["kp"], ki=s["ki"],
            kd=s["kd"], rate=t["rates"]["sea_hz"],
            physics_rate=t["rates"]["physics_hz"],
            motor_tau_max=s["motor_tau_max"],
            encoder_bits=s["encoder_bits"], quantize=s["quantize"])
        manip = ManipModel(delta=dp,
                           joint_inertia=rd["manip"]["joint_inertia"],
                           wrist_mass=rd["manip"]["wrist_mass"],
                           g=t["gravity"])
        b = rd["base"]
        base = BaseParams(
            wheel_radius=b["wheel_radius"], half_length=b["half_length"],
            half_width=b["half_width"],
            twist_time_constant=b["twist_time_constant"],
            v_max=b["v_max"], w_max=b["w_max"], kp_xy=b["kp_xy"],
            kd_xy=b["kd_xy"], kp_yaw=b["kp_yaw"], kd_yaw=b["kd_yaw"])
        slip = b["slip_gains"]
        robots.append(RobotSpec(
            delta=dp, sea=sea, manip=manip, base=base,
            base_pose=np.asarray(rd["base_pose"], dtype=float),
            slip_gains=None if slip is None else np.asarray(slip, dtype=float),
            recenter=rd["recenter"]))

    payload = None
    poses = None
    pd = t["payload"]
    if pd is not None:
        bodies = [PayloadBody(b["mass"], np.asarray(b["inertia"]),
                              np.asarray(b["com_offset"]))
                  for b in pd["bodies"]]
        hinge = None
        if pd["hinge"] is not None:
            h = pd["hinge"]
            hinge = Hinge(h["body_a"], h["body_b"], np.asarray(h["pivot"]),
                          np.asarray(h["axis"]), h["damping"])
        payload = PayloadModel(
            bodies=bodies, hinge=hinge,
            attachments=[(a["robot"], a["body"], np.asarray(a["point"]))
                         for a in pd["attachments"]],
            grips={name: (g["body"], np.asarray(g["point"]))
                   for name, g in pd["grips"].items()})
        poses = [Pose(_rpy(p["rpy_deg"]), np.asarray(p["position"]))
                 for p in pd["initial_poses"]]

    world = World(
        robots, payload, payload_poses=poses,
        physics_hz=t["rates"]["physics_hz"], sea_hz=t["rates"]["sea_hz"],
        control_hz=t["rates"]["control_hz"], gravity=t["gravity"],
        seed=t["seed"])
    return world


class InteractiveWrench:
    """Mutable holder for a live human wrench (driven by the bridge)."""

    def __init__(self):
        self.force = np.zeros(3)
        self.moment = np.zeros(3)

    def __call__(self, t, grip_pos=None, grip_vel=None):
        return self.force, self.moment


def attach_humans(world: World, cfg: ScenarioConfig, interactive_ok=False):
    """Bind the configured wrench profiles to the world's grip points.

    Returns {grip_name: InteractiveWrench} for profiles of interactive kind
    (empty in batch runs, where such profiles stay at zero with a warning
    event).
    """
    holders = {}
    pay = cfg.tree["payload"]
    for h in cfg.tree["humans"]:
        grip = h["grip"]
        prof = WrenchProfile(**_profile_kwargs(h["profile"]))
        if grip.startswith("robot:"):
            target = ("robot", int(grip.split(":", 1)[1]))
            point = np.zeros(3)
        else:
            g = pay["grips"][grip]
            target = g["body"]
            point = np.asarray(g["point"], dtype=float)
        if prof.kind == "interactive":
            if not interactive_ok:
                world._event("interactive_profile_in_batch", grip=grip)
                fn = lambda t, gp, gv: (np.zeros(3), np.zeros(3))
            else:
                fn = InteractiveWrench()
                holders[grip] = fn
        elif prof.kind == "hold":
            if prof.anchor is not None:
                anchor = np.asarray(prof.anchor, dtype=float).reshape(3)
            elif isinstance(target, tuple):
                ri = target[1]
                anchor = world.wrist_positions()[ri]
            else:
                bs = world.bodies[target]
                rel = point - world.payload.bodies[target].com_offset
                anchor = bs.pos + bs.R @ rel

            def fn(t, gp, gv, _k=prof.stiffness, _b=prof.damping, _a=anchor,
                   _start=prof.start, _end=prof.end):
                if t < _start or t > _end:
                    return _ZERO3, _ZERO3
                return _k * (_a - gp) - _b * gv, _ZERO3
        else:
            fn = (lambda p: (lambda t, gp, gv: human_wrench(p, t)))(prof)
        world.human_loads.append((target, point, fn, grip))
    return holders


def commission(world: World, cfg: ScenarioConfig):
    """Run the startup hold, calibrate each robot and engage its mode."""
    t = cfg.tree
    hold = t["startup"]["hold_s"]
    quiesce = t["startup"]["quiescence_s"]
    world.run(hold)
    snap = world.system_state()
    states = []
    for i, r in enumerate(world.robots):
        st = startup_calibration(snap, i, r.spec.manip, r.spec.sea.k,
                                 quiescence_s=quiesce)
        c = t["robots"][i]["control"]
        st.c_spring = c["c_spring"]
        st.eps = c["eps"]
        st.k_rest = c["k_rest"]
        st.band = c["band"]
        st.b_rest = c["b_rest"]
        st.lead_s = c["lead_s"]
        st.active_damping = c["active_damping"]
        if world.robots[i].attach is not None:
            st.grasp_offset = world.robots[i].attach[1].copy()
        states.append(st)
    attached = [i for i, r in enumerate(world.robots) if r.attach is not None]
    team = None
    if attached:
        offsets = np.stack([world.robots[i].attach[1] for i in attached])
        f0 = np.stack([states[i].f_pay_nominal for i in attached])
        team = TeamGeometry(offsets=offsets, f0=f0, weight=f0.sum(axis=0))
    for i, r in enumerate(world.robots):
        mode = {"float": Mode.FLOAT, "approx_float": Mode.APPROX_FLOAT,
                "gravity_comp": Mode.GRAVITY_COMP}[t["robots"][i]["mode"]]
        states[i].mode = mode
        r.controller.state = states[i]
        if r.attach is not None and team is not None:
            r.controller.team = team
            r.controller.index = attached.index(i)
        r.hold_tau = None
        world._event("mode_engaged", robot=i, mode=mode.value)
    return team


def set_robot_mode(world: World, ri: int, mode: Mode):
    """Switch one robot's control mode at runtime (bridge SetMode)."""
    r = world.robots[ri]
    x = _fk(r.theta, r.spec.delta, check_limits=False)
    if mode is Mode.APPROX_FLOAT and r.controller.state.mode is not mode:
        if r.controller.team is not None:
            R_pay = world.payload_rotation_seen_by(ri)
            from .manip_ctrl import payload_share_statics
            forces, _ = payload_share_statics(r.controller.team, R_pay)
            r.controller.state.f_pay_nominal = forces[r.controller.index]
    r.controller.set_mode(mode, wrist_z=float(x[2]))
    world._event("mode_changed", robot=ri, mode=mode.value)


# ---------------------------------------------------------------------------
# telemetry

def _fmt(x) -> str:
    return repr(float(x))


def _quat(R) -> np.ndarray:
    """Rotation matrix to unit quaternion (w, x, y, z), w >= 0."""
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s,
                      (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] > R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s,
                      0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s,
                      (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    if q[0] < 0:
        q = -q
    return q


class TelemetryWriter:
    """CSV-per-subsystem logs plus a JSON-lines event stream."""

    def __init__(self, world: World, out_dir: str | None, full_rate: bool,
                 telemetry_hz: float):
        self.world = world
        self.dir = out_dir
        self.every = (1 if full_rate else
                      int(round(world.physics_hz / telemetry_hz)))
        self._events_flushed = 0
        self.payload_buf = io.StringIO()
        self.robots_buf = io.StringIO()
        nb = len(world.bodies)
        cols = ["tick", "t"]
        for b in range(nb):
            cols += [f"b{b}_{c}" for c in
                     ("px", "py", "pz", "qw", "qx", "qy", "qz",
                      "vx", "vy", "vz", "wx", "wy", "wz")]
        cols += ["hinge_angle"]
        self.payload_buf.write(",".join(cols) + "\n")
        rcols = (["tick", "t", "robot", "mode",
                  "base_x", "base_y", "base_yaw",
                  "odom_x", "odom_y", "odom_yaw",
                  "tw_vx", "tw_vy", "tw_w",
                  "wrist_x", "wrist_y", "wrist_z"]
                 + [f"theta{i}" for i in (1, 2, 3)]
                 + [f"beta{i}" for i in (1, 2, 3)]
                 + [f"alpha{i}" for i in (1, 2, 3)]
                 + [f"tau_est{i}" for i in (1, 2, 3)]
                 + [f"tau_cmd{i}" for i in (1, 2, 3)]
                 + ["fcom_x", "fcom_y", "fcom_z", "clamped"])
        self.robots_buf.write(",".join(rcols) + "\n")

    def sample(self):
        w = self.world
        if w.tick % self.every != 0:
            return
        row = [str(w.tick), _fmt(w.t)]
        for bs in w.bodies:
            q = _quat(bs.R)
            w_world = bs.R @ bs.omega
            row += [_fmt(v) for v in bs.pos]
            row += [_fmt(v) for v in q]
            row += [_fmt(v) for v in bs.vel]
            row += [_fmt(v) for v in w_world]
        h = w.hinge_angle()
        row.append(_fmt(h) if h is not None else "")
        self.payload_buf.write(",".join(row) + "\n")
        wr = w.wrist_positions() if w.robots else np.zeros((0, 3))
        for ri, r in enumerate(w.robots):
            tau_est = r.spec.sea.k * (r.beta - r.theta)
            row = [str(w.tick), _fmt(w.t), str(ri),
                   r.controller.state.mode.value,
                   _fmt(r.base.pose[0]), _fmt(r.base.pose[1]),
                   _fmt(r.base.pose[2]),
                   _fmt(r.base.odom_pose[0]), _fmt(r.base.odom_pose[1]),
                   _fmt(r.base.odom_pose[2]),
                   _fmt(r.base.twist[0]), _fmt(r.base.twist[1]),
                   _fmt(r.base.twist[2]),
                   _fmt(wr[ri][0]), _fmt(wr[ri][1]), _fmt(wr[ri][2])]
            row += [_fmt(v) for v in r.theta]
            row += [_fmt(v) for v in r.beta]
            row += [_fmt(v) for v in r.alpha]
            row += [_fmt(v) for v in tau_est]
            row += [_fmt(v) for v in r.tau_cmd]
            row += [_fmt(v) for v in r.f_com]
            row.append("1" if r.clamped else "0")
            self.robots_buf.write(",".join(row) + "\n")

    def finish(self) -> dict:
        w = self.world
        out = {
            "payload.csv": self.payload_buf.getvalue(),
            "robots.csv": self.robots_buf.getvalue(),
            "events.jsonl": "".join(
                json.dumps(e, sort_keys=True, default=str) + "\n"
                for e in w.events),
        }
        if self.dir:
            os.makedirs(self.dir, exist_ok=True)
            for name, text in out.items():
                with open(os.path.join(self.dir, name), "w") as f:
                    f.write(text)
        return out


# ---------------------------------------------------------------------------
# runner

@dataclass
class RunReport:
    name: str
    ok: bool
    fault: str | None
    sim_time: float
    ticks: int
    peak_human_force: float
    payload_displacement: float
    max_pos_residual: float
    max_vel_residual: float
    torque_saturation_count: int
    telemetry: dict
    summary: dict


def run(cfg: ScenarioConfig, out_dir: str | None = None,
        duration: float | None = None, seed: int | None = None,
        full_rate: bool | None = None, command_log: list | None = None,
        world: World | None = None) -> RunReport:
    """Execute a scenario to completion and write its telemetry.

    command_log replays bridge commands: a list of (tick, robot, mode)
    mode-switch entries and (tick, grip, force, moment) wrench entries,
    applied at their recorded control ticks.
    """
    tree = dict(cfg.tree)
    if duration is not None:
        tree = json.loads(json.dumps(tree))
        tree["duration"] = float(duration)
    if seed is not None:
        tree = json.loads(json.dumps(tree))
        tree["seed"] = int(seed)
    cfg = ScenarioConfig(tree)
    out_dir = out_dir if out_dir is not None else cfg.tree["output"]["dir"]
    full = (cfg.tree["output"]["full_rate"]
            if full_rate is None else full_rate)

    if world is None:
        world = build_world(cfg)
    holders = attach_humans(world, cfg,
                            interactive_ok=command_log is not None)
    tw = TelemetryWriter(world, out_dir, full, cfg.tree["rates"]["telemetry_hz"])

    fault = None
    p0 = world.bodies[0].pos.copy() if world.bodies else np.zeros(3)
    peak_force = 0.0
    cmd_queue = sorted(command_log or [], key=lambda c: c[0])
    cmd_i = 0
    try:
        commission(world, cfg)
        n = int(round(cfg.duration * world.physics_hz))
        start_tick = world.tick
        while world.tick - start_tick < n:
            while cmd_i < len(cmd_queue) and cmd_queue[cmd_i][0] <= world.tick:
                _apply_command(world, holders, cmd_queue[cmd_i])
                cmd_i += 1
            tw.sample()
            world.step()
            if world.human_loads and world.tick % tw.every == 0:
                ftot = 0.0
                for target, point, force, moment, gvel in (
                        world._last_lean.humans
                        if getattr(world, "_last_lean", None) else []):
                    ftot += math.sqrt(float(force @ force))
                peak_force = max(peak_force, ftot)
        if n > 0:
            tw.sample()
    except (SimulationFault, FloatingPointError) as e:
        fault = str(e)
    except ValueError as e:
        if "quiescence" in str(e):
            fault = str(e)
        else:
            raise

    disp = (float(np.linalg.norm(world.bodies[0].pos - p0))
            if world.bodies else 0.0)
    telemetry = tw.finish()
    summary = {
        "name": cfg.name,
        "ok": fault is None,
        "fault": fault,
        "sim_time": world.t,
        "ticks": world.tick,
        "peak_human_force_N": peak_force,
        "payload_displacement_m": disp,
        "max_constraint_residual_m": world.max_pos_residual,
        "max_velocity_residual": world.max_vel_residual,
        "torque_saturation_count": world.clamp_count,
        "seed": cfg.tree["seed"],
    }
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "summary.json"), "w") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
        cfg.save(os.path.join(out_dir, "config.yaml"))
    return RunReport(
        name=cfg.name, ok=fault is None, fault=fault, sim_time=world.t,
        ticks=world.tick, peak_human_force=peak_force,
        payload_displacement=disp,
        max_pos_residual=world.max_pos_residual,
        max_vel_residual=world.max_vel_residual,
        torque_saturation_count=world.clamp_count,
        telemetry=telemetry, summary=summary)


def _apply_command(world, holders, cmd):
    kind = cmd[1]
    if kind == "set_mode":
        _, _, ri, mode = cmd
        set_robot_mode(world, ri, Mode(mode))
    elif kind == "apply_wrench":
        _, _, grip, force, moment = cmd
        if grip in holders:
            holders[grip].force = np.asarray(force, dtype=float)
            holders[grip].moment = np.asarray(moment, dtype=float)


# ---------------------------------------------------------------------------
# manipulability report

def rank_report(cfg: ScenarioConfig, collinear_span: float = 0.7) -> list[dict]:
    """Ranks of the payload control map for robot subsets of the scenario.

    Emits one row per team size (1..N robots at their configured grasps),
    a degenerate row with all wrists moved onto a line, and the hinged rank
    when the payload is articulated.
    """
    tree = json.loads(json.dumps(cfg.tree))
    pay = tree["payload"]
    if pay is None:
        raise ConfigError("rank report needs a payload")
    rows = []
    n = len(tree["robots"])

    def world_for(robots_keep, attachments, bodies=None, hinge=None,
                  poses=None):
        sub = json.loads(json.dumps(tree))
        sub["robots"] = [sub["robots"][i] for i in robots_keep]
        sub["payload"]["attachments"] = attachments
        sub["humans"] = []
        if bodies is not None:
            sub["payload"]["bodies"] = bodies
        if hinge is not None or bodies is not None:
            sub["payload"]["hinge"] = hinge
        if poses is not None:
            sub["payload"]["initial_poses"] = poses
        return build_world(ScenarioConfig(sub))

    att = pay["attachments"]
    for k in range(1, n + 1):
        keep = list(range(k))
        sub_att = [
            {"robot": keep.index(a["robot"]), "body": a["body"],
             "point": a["point"]}
            for a in att if a["robot"] in keep
        ]
        w = world_for(keep, sub_att)
        rows.append({
            "label": f"{k} robot{'s' if k > 1 else ''}",
            "robots": k,
            "payload": pay["hinge"] and "hinged" or "rigid",
            "rank": manipulability(w),
        })

    if n >= 3:
        # all wrists on a line through the first body's frame
        body = att[0]["body"] if att else 0
        z = att[0]["point"][2] if att else 0.0
        xs = np.linspace(-collinear_span / 2, collinear_span / 2, n)
        col_att = [{"robot": i, "body": body,
                    "point": [float(xs[i]), 0.0, z]} for i in range(n)]
        sub = json.loads(json.dumps(tree))
        for i, a in enumerate(col_att):
            bp = sub["payload"]["initial_poses"][body]["position"]
            sub["robots"][i]["base_pose"] = [bp[0] + a["point"][0],
                                             bp[1] + a["point"][1], 0.0]
        sub["payload"]["attachments"] = col_att
        sub["payload"]["hinge"] = None
        sub["payload"]["bodies"] = sub["payload"]["bodies"][:1]
        sub["payload"]["initial_poses"] = sub["payload"]["initial_poses"][:1]
        sub["payload"]["grips"] = {}
        sub["humans"] = []
        w = build_world(ScenarioConfig(sub))
        rows.append({"label": f"{n} robots, collinear wrists", "robots": n,
                     "payload": "rigid", "rank": manipulability(w)})
    return rows


def format_rank_report(rows) -> str:
    out = ["robots  payload   rank  arrangement"]
    for r in rows:
        out.append(f"{r['robots']:>6}  {r['payload']:<8} {r['rank']:>4}  "
                   f"{r['label']}")
    return "\n".join(out)
