"""Realtime telemetry/command bridge between a running world and the
browser cockpit.

Transport is a single bidirectional WebSocket per client carrying
JSON-encoded messages of kind "hello", "frame", "command" and "error"
(schema in docs/bridge-protocol.md, versioned; unknown fields are
ignored).  One loop owns the world and steps it against the wall clock;
network I/O happens on a separate thread and talks to the stepping loop
through queues.  Commands are stamped with the control tick at which they
are applied, which makes a recorded session replayable bit-for-bit by the
batch runner.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .manip_ctrl import Mode
from .multibody import SimulationFault, World, manipulability
from .scenario import (ScenarioConfig, TelemetryWriter, attach_humans,
                       build_world, commission, set_robot_mode)

PROTOCOL_VERSION = 1
FORCE_LIMIT = 50.0    # N, safety clamp on live wrenches
MOMENT_LIMIT = 10.0   # N*m
FRAME_HZ = 30.0
CLIENT_QUEUE = 8      # outbound frames per client before dropping oldest


@dataclass
class Command:
    """A client request, validated and safety-clamped."""

    kind: str                     # apply_wrench | set_mode | pause | resume | reset
    grip: str | None = None
    force: np.ndarray | None = None
    moment: np.ndarray | None = None
    robot: int | None = None
    mode: str | None = None
    clamped: bool = False


def clamp_wrench(force, moment) -> tuple[np.ndarray, np.ndarray, bool]:
    """Clamp wrench norms to the safety bounds, preserving direction."""
    f = np.asarray(force, dtype=float).reshape(3)
    m = np.asarray(moment, dtype=float).reshape(3)
    clamped = False
    fn = float(np.linalg.norm(f))
    if fn > FORCE_LIMIT:
        f = f * (FORCE_LIMIT / fn)
        clamped = True
    mn = float(np.linalg.norm(m))
    if mn > MOMENT_LIMIT:
        m = m * (MOMENT_LIMIT / mn)
        clamped = True
    return f, m, clamped


def decode_command(data) -> Command:
    """Parse one client message; raises ValueError on malformed input."""
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    try:
        msg = json.loads(data)
    except json.JSONDecodeError as e:
        raise ValueError(f"malformed message: {e}") from e
    if not isinstance(msg, dict) or msg.get("kind") != "command":
        raise ValueError("expected a command message")
    ctype = msg.get("type")
    if ctype == "apply_wrench":
        grip = msg.get("grip")
        if not isinstance(grip, str):
            raise ValueError("apply_wrench needs a grip id")
        f, m, clamped = clamp_wrench(msg.get("force", [0, 0, 0]),
                                     msg.get("moment", [0, 0, 0]))
        return Command("apply_wrench", grip=grip, force=f, moment=m,
                       clamped=clamped)
    if ctype == "set_mode":
        mode = msg.get("mode")
        if mode not in ("float", "approx_float", "gravity_comp"):
            raise ValueError(f"unknown mode {mode!r}")
        robot = msg.get("robot")
        if not isinstance(robot, int):
            raise ValueError("set_mode needs a robot index")
        return Command("set_mode", robot=robot, mode=mode)
    if ctype in ("pause", "resume", "reset"):
        return Command(ctype)
    raise ValueError(f"unknown command type {ctype!r}")


def encode_frame(frame: dict) -> bytes:
    """Serialize a telemetry frame (kind/v fields are added here)."""
    out = {"kind": "frame", "v": PROTOCOL_VERSION}
    out.update(frame)
    return json.dumps(out, separators=(",", ":")).encode("utf-8")


def decode_frame(data) -> dict:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    msg = json.loads(data)
    if msg.get("kind") != "frame":
        raise ValueError("expected a frame message")
    return msg


def encode_command(cmd: Command) -> bytes:
    msg = {"kind": "command", "v": PROTOCOL_VERSION, "type": cmd.kind}
    if cmd.kind == "apply_wrench":
        msg["grip"] = cmd.grip
        msg["force"] = [float(v) for v in cmd.force]
        msg["moment"] = [float(v) for v in cmd.moment]
    elif cmd.kind == "set_mode":
        msg["robot"] = cmd.robot
        msg["mode"] = cmd.mode
    return json.dumps(msg, separators=(",", ":")).encode("utf-8")


def _quat(R):
    from .scenario import _quat as q
    return q(R)


class BridgeSession:
    """A commissioned world plus the command/frame machinery, no networking.

    The real-time server wraps this; tests and the replay path drive it
    directly.  Commands are applied at the next control tick and recorded
    as (tick, ...) rows compatible with scenario.run(command_log=...).
    """

    def __init__(self, cfg: ScenarioConfig, out_dir: str | None = None,
                 full_rate: bool = False):
        self.cfg = cfg
        self.world: World = build_world(cfg)
        self.holders = attach_humans(self.world, cfg, interactive_ok=True)
        self.writer = TelemetryWriter(
            self.world, out_dir, full_rate, cfg.tree["rates"]["telemetry_hz"])
        commission(self.world, cfg)
        self.pending: deque = deque()
        self.command_log: list = []
        self.paused = False
        self.wrench_clamped: dict = {}
        self._ctrl_every = self.world._ctrl_every

    # -- commands ---------------------------------------------------------

    def submit(self, cmd: Command):
        """Queue a command for the next control tick."""
        self.pending.append(cmd)

    def _next_ctrl_tick(self) -> int:
        t = self.world.tick
        return t + (-t) % self._ctrl_every

    def _apply_pending(self):
        at_boundary = self.world.tick % self._ctrl_every == 0
        deferred = deque()
        while self.pending:
            cmd = self.pending.popleft()
            if cmd.kind in ("pause", "resume", "reset"):
                pass                      # scheduling: applies immediately
            elif not at_boundary:
                deferred.append(cmd)      # simulation inputs wait for a tick
                continue
            tick = self.world.tick
            if cmd.kind == "apply_wrench":
                if cmd.grip in self.holders:
                    h = self.holders[cmd.grip]
                    h.force = cmd.force.copy()
                    h.moment = cmd.moment.copy()
                    self.wrench_clamped[cmd.grip] = cmd.clamped
                    self.command_log.append(
                        (tick, "apply_wrench", cmd.grip,
                         [float(v) for v in cmd.force],
                         [float(v) for v in cmd.moment]))
            elif cmd.kind == "set_mode":
                if 0 <= cmd.robot < len(self.world.robots):
                    set_robot_mode(self.world, cmd.robot, Mode(cmd.mode))
                    self.command_log.append(
                        (tick, "set_mode", cmd.robot, cmd.mode))
            elif cmd.kind == "pause":
                self.paused = True
            elif cmd.kind == "resume":
                self.paused = False
            elif cmd.kind == "reset":
                self._reset()
        self.pending = deferred

    def _reset(self):
        self.world = build_world(self.cfg)
        self.holders = attach_humans(self.world, self.cfg, interactive_ok=True)
        self.writer = TelemetryWriter(
            self.world, self.writer.dir, self.writer.every == 1,
            self.cfg.tree["rates"]["telemetry_hz"])
        commission(self.world, self.cfg)
        self.command_log = []
        self.wrench_clamped = {}

    # -- stepping -----------------------------------------------------------

    def step(self):
        """One physics step with command application at tick boundaries."""
        self._apply_pending()
        self.writer.sample()
        self.world.step()

    def step_to(self, tick: int):
        while self.world.tick < tick and not self.paused:
            self.step()

    # -- frames -------------------------------------------------------------

    def make_frame(self) -> dict:
        w = self.world
        robots = []
        wr = w.wrist_positions() if w.robots else np.zeros((0, 3))
        for ri, r in enumerate(w.robots):
            tau_est = r.spec.sea.k * (r.beta - r.theta)
            robots.append({
                "base": [float(v) for v in r.base.pose],
                "wrist": [float(v) for v in wr[ri]],
                "theta": [float(v) for v in r.theta],
                "alpha": [float(v) for v in r.alpha],
                "tau": [float(v) for v in tau_est],
                "f_com": [float(v) for v in r.f_com],
                "clamped": bool(r.clamped),
                "mode": r.controller.state.mode.value,
                "z0": float(r.controller.state.z0),
                "eps": float(r.controller.state.eps),
                "workspace": [float(r.spec.delta.workspace_radius),
                              float(r.controller.state.band)],
            })
        payload = None
        if w.payload is not None:
            bodies = []
            for bs, b in zip(w.bodies, w.payload.bodies):
                q = _quat(bs.R)
                bodies.append({"pos": [float(v) for v in bs.pos],
                               "quat": [float(v) for v in q]})
            h = w.hinge_angle()
            payload = {
                "bodies": bodies,
                "hinge": float(h) if h is not None else None,
                "rank": manipulability(w),
            }
        wrenches = []
        for grip, holder in self.holders.items():
            wrenches.append({
                "grip": grip,
                "force": [float(v) for v in holder.force],
                "moment": [float(v) for v in holder.moment],
                "clamped": bool(self.wrench_clamped.get(grip, False)),
            })
        return {
            "tick": w.tick,
            "t": w.t,
            "paused": self.paused,
            "fault": w.fault,
            "payload": payload,
            "robots": robots,
            "wrenches": wrenches,
            "grips": sorted(self.holders.keys()),
        }

    def hello(self) -> bytes:
        t = self.cfg.tree
        msg = {
            "kind": "hello",
            "v": PROTOCOL_VERSION,
            "scenario": self.cfg.name,
            "robots": len(self.world.robots),
            "grips": sorted(self.holders.keys()),
            "rates": t["rates"],
            "frame_hz": FRAME_HZ,
            "safety": {"force": FORCE_LIMIT, "moment": MOMENT_LIMIT},
        }
        return json.dumps(msg, separators=(",", ":")).encode("utf-8")

    def finish(self):
        telemetry = self.writer.finish()
        log_text = "".join(
            json.dumps(list(row), sort_keys=False) + "\n"
            for row in self.command_log)
        if self.writer.dir:
            import os
            with open(os.path.join(self.writer.dir, "commands.jsonl"), "w") as f:
                f.write(log_text)
        return telemetry, log_text


def load_command_log(text: str) -> list:
    """Parse a commands.jsonl recording back into run(command_log=...) rows."""
    rows = []
    for line in text.splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        rows.append(tuple(row))
    return rows


def _static_request_handler(front_dir):
    """Serve the built cockpit over plain HTTP on the same port."""
    import os
    from websockets.datastructures import Headers
    from websockets.http11 import Response

    types = {".html": "text/html", ".js": "text/javascript",
             ".css": "text/css", ".map": "application/json"}

    def process_request(connection, request):
        if "websocket" in request.headers.get("Upgrade", "").lower():
            return None
        path = request.path.split("?", 1)[0]
        if front_dir is not None:
            if path == "/":
                cand = os.path.join(front_dir, "static", "index.html")
            elif path.endswith(".js"):
                cand = os.path.join(front_dir, "dist", path.lstrip("/"))
            else:
                cand = os.path.join(front_dir, "static", path.lstrip("/"))
            cand = os.path.realpath(cand)
            if cand.startswith(os.path.realpath(front_dir)) and (
                    os.path.isfile(cand)):
                with open(cand, "rb") as f:
                    body = f.read()
                ctype = types.get(os.path.splitext(cand)[1], "text/plain")
                return Response(200, "OK", Headers([
                    ("Content-Type", ctype),
                    ("Content-Length", str(len(body)))]), body)
        return connection.respond(
            404, "cockpit not built; run tsc in frontend/ "
                 "or connect a WebSocket client directly\n")

    return process_request


def _find_frontend() -> str | None:
    import os
    here = os.path.dirname(os.path.abspath(__file__))
    for root in (os.getcwd(), os.path.join(here, "..", "..", "..")):
        cand = os.path.join(root, "frontend")
        if os.path.isfile(os.path.join(cand, "static", "index.html")):
            return os.path.abspath(cand)
    return None


def serve(cfg: ScenarioConfig, port: int = 8700, out_dir: str | None = None,
          duration: float | None = None, static_dir: str | None = None):
    """Step the scenario in real time and serve frames/commands on a socket.

    Blocks until the scenario duration elapses (or forever when duration is
    None and the config duration is 0).  Sim time tracks the wall clock;
    frames are broadcast at 30 Hz with per-client drop-oldest queues.  The
    same port answers plain HTTP requests with the built cockpit.
    """
    import asyncio
    import websockets

    session = BridgeSession(cfg, out_dir=out_dir)
    world = session.world
    dur = duration if duration is not None else cfg.duration
    inbox: deque = deque()
    clients: dict = {}
    lock = threading.Lock()
    stop = threading.Event()
    loop_holder = {}

    async def handler(ws):
        q: asyncio.Queue = asyncio.Queue(maxsize=CLIENT_QUEUE)
        with lock:
            clients[ws] = q
        await ws.send(session.hello().decode())
        try:
            async def rx():
                async for raw in ws:
                    try:
                        cmd = decode_command(raw)
                    except ValueError as e:
                        await ws.send(json.dumps(
                            {"kind": "error", "v": PROTOCOL_VERSION,
                             "message": str(e)}))
                        continue
                    with lock:
                        inbox.append(cmd)

            async def tx():
                while True:
                    data = await q.get()
                    await ws.send(data)

            await asyncio.gather(rx(), tx())
        finally:
            with lock:
                clients.pop(ws, None)

    front = static_dir if static_dir is not None else _find_frontend()

    async def main_srv():
        loop_holder["loop"] = asyncio.get_running_loop()
        async with websockets.serve(
                handler, "127.0.0.1", port,
                process_request=_static_request_handler(front)):
            while not stop.is_set():
                await asyncio.sleep(0.05)

    th = threading.Thread(target=lambda: asyncio.run(main_srv()), daemon=True)
    th.start()

    def broadcast(data: bytes):
        loop = loop_holder.get("loop")
        if loop is None:
            return
        text = data.decode()
        with lock:
            targets = list(clients.values())
        for q in targets:
            def push(q=q):
                if q.full():
                    try:
                        q.get_nowait()   # drop oldest
                    except Exception:
                        pass
                q.put_nowait(text)
            loop.call_soon_threadsafe(push)

    frame_every = max(1, int(round(world.physics_hz / FRAME_HZ)))
    tick0 = world.tick          # commissioning already ran
    # duration counts from the end of commissioning, exactly like the
    # batch runner, so a recorded session replays to the same telemetry
    n_ticks = int(round(dur * world.physics_hz))

    def running():
        return dur == 0.0 or world.tick - tick0 < n_ticks

    t0 = time.monotonic()
    pause_offset = 0.0
    try:
        while running():
            with lock:
                while inbox:
                    session.submit(inbox.popleft())
            if session.paused:
                time.sleep(0.01)
                pause_offset += 0.01
                session._apply_pending()
                continue
            wall = time.monotonic() - t0 - pause_offset
            target_tick = min(tick0 + int(wall * world.physics_hz),
                              world.tick + int(0.25 * world.physics_hz))
            while world.tick < target_tick and running():
                session.step()
                if world.tick % frame_every == 0:
                    broadcast(encode_frame(session.make_frame()))
            time.sleep(0.0015)
        if dur > 0.0:
            session.writer.sample()
    except (SimulationFault, KeyboardInterrupt):
        pass
    finally:
        stop.set()
        th.join(timeout=2.0)
    return session.finish()
