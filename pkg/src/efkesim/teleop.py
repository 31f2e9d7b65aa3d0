"""Live teleoperation bridge.

One authoritative session advances the planar simulation at a fixed tick
and streams state frames over a WebSocket; the first client is the
operator, later clients are read-only spectators.  Incoming messages are
queued and applied at tick boundaries, so command latency is at most one
tick.  Crawl speeds come from the calibrated sweep table (bilinear
lookup over amplitude and release time at 20 ms zipping time), not from
per-tick episode simulation.
"""

from __future__ import annotations

import asyncio
import json
import logging
import math
from dataclasses import dataclass, replace
from importlib import resources

import websockets
from websockets.asyncio.server import serve as ws_serve

from . import planar
from .planar import Pose2D, Scenario, TurnCalibration
from .waveform import DEFAULT_DIRECTION_MAP

log = logging.getLogger("efkesim.teleop")

SIM_TICK_HZ = 100.0
BROADCAST_HZ = 30.0

AMPLITUDE_BOUNDS_KV = (0.0, 8.0)
ZT_BOUNDS_MS = (5.0, 200.0)
RT_BOUNDS_MS = (0.0, 1000.0)


@dataclass
class SpeedMap:
    """Bilinear velocity lookup over (amplitude, release time)."""

    amplitude_kv: list[float]
    rt_ms: list[float]
    velocity_mm_s: list[list[float]]
    zt_ms: float = 20.0

    @classmethod
    def bundled(cls) -> "SpeedMap":
        d = json.loads(
            resources.files("efkesim.data").joinpath("teleop_speed_table.json").read_text()
        )
        return cls(
            amplitude_kv=d["amplitude_kv"],
            rt_ms=d["rt_ms"],
            velocity_mm_s=d["velocity_mm_s"],
            zt_ms=d["zt_ms"],
        )

    def lookup(self, amplitude_kv: float, rt_ms: float) -> float:
        def _interp_axis(axis, v):
            if v <= axis[0]:
                return 0, 0.0
            if v >= axis[-1]:
                return len(axis) - 2, 1.0
            for i in range(len(axis) - 1):
                if axis[i] <= v <= axis[i + 1]:
                    return i, (v - axis[i]) / (axis[i + 1] - axis[i])
            return len(axis) - 2, 1.0

        i, fa = _interp_axis(self.amplitude_kv, amplitude_kv)
        j, fr = _interp_axis(self.rt_ms, rt_ms)
        g = self.velocity_mm_s
        v = (
            g[i][j] * (1 - fa) * (1 - fr)
            + g[i + 1][j] * fa * (1 - fr)
            + g[i][j + 1] * (1 - fa) * fr
            + g[i + 1][j + 1] * fa * fr
        )
        return max(v, 0.0)  # backslide regimes never drive a commanded direction backwards


@dataclass
class SessionState:
    scenario: Scenario
    pose: Pose2D
    command: str = "stop"
    mode: str = "four-electrode"
    drive_left: bool = False
    drive_right: bool = False
    amplitude_kv: float = 5.0
    zt_ms: float = 20.0
    rt_ms: float = 80.0
    t_s: float = 0.0
    contact: bool = False
    goal_reached: bool = False
    real_time_factor: float = 1.0


class TeleopSession:
    """Authoritative simulation loop plus message handling."""

    def __init__(
        self,
        scenario: Scenario,
        speed_map: SpeedMap | None = None,
        turn_calibration: TurnCalibration | None = None,
        real_time_factor: float = 1.0,
    ):
        self.state = SessionState(
            scenario=scenario, pose=scenario.start, real_time_factor=real_time_factor
        )
        self.speed_map = speed_map or SpeedMap.bundled()
        self.turning = turn_calibration or TurnCalibration.bundled()
        self.ticks = 0

    # -- message protocol -------------------------------------------------

    def apply_message(self, message: dict) -> dict | None:
        """Apply one protocol message; returns an error reply or None."""
        mtype = message.get("type")
        st = self.state
        if mtype == "command":
            d = message.get("direction")
            if d not in ("+x", "-x", "+y", "-y", "stop"):
                return {"type": "error", "message": f"unknown direction {d!r}"}
            st.command = d
        elif mtype == "drive":
            st.drive_left = bool(message.get("left", False))
            st.drive_right = bool(message.get("right", False))
        elif mtype == "set_waveform":
            a = float(message.get("amplitude_kv", st.amplitude_kv))
            zt = float(message.get("zt_ms", st.zt_ms))
            rt = float(message.get("rt_ms", st.rt_ms))
            for name, v, (lo, hi) in (
                ("amplitude_kv", a, AMPLITUDE_BOUNDS_KV),
                ("zt_ms", zt, ZT_BOUNDS_MS),
                ("rt_ms", rt, RT_BOUNDS_MS),
            ):
                if not lo <= v <= hi:
                    return {
                        "type": "error",
                        "message": f"{name} {v:g} outside [{lo:g}, {hi:g}]",
                    }
            st.amplitude_kv, st.zt_ms, st.rt_ms = a, zt, rt
        elif mtype == "reset":
            st.pose = st.scenario.start
            st.goal_reached = False
            st.contact = False
        elif mtype == "mode":
            v = message.get("value")
            if v not in ("four-electrode", "dual"):
                return {"type": "error", "message": f"unknown mode {v!r}"}
            st.mode = v
            st.command = "stop"
            st.drive_left = st.drive_right = False
        else:
            return {"type": "error", "message": f"unknown message type {mtype!r}"}
        return None

    # -- simulation -------------------------------------------------------

    def speed_mm_s(self) -> float:
        return self.speed_map.lookup(self.state.amplitude_kv, self.state.rt_ms)

    def tick(self, dt: float) -> None:
        st = self.state
        if st.mode == "four-electrode":
            s = self.speed_mm_s()
            vx, vy = planar.four_electrode_velocity(
                st.command, {"+x": s, "-x": s, "+y": s, "-y": s}
            )
            c, sn = math.cos(st.pose.theta_rad), math.sin(st.pose.theta_rad)
            wx = (vx * c - vy * sn) * 1e-3
            wy = (vx * sn + vy * c) * 1e-3
            tentative = replace(st.pose, x_m=st.pose.x_m + wx * dt, y_m=st.pose.y_m + wy * dt)
        else:
            scale = self.speed_mm_s() / max(self.turning.active_speed_mm_s, 1e-9)
            cal = self.turning
            v_l, v_r = cal.side_speeds(st.drive_left, st.drive_right)
            yaw, fwd = planar.dual_robot_yaw(v_l * scale, v_r * scale, cal.track_width_mm)
            tentative = planar.step_pose(st.pose, fwd, yaw, dt)
        st.pose, st.contact = planar.collide(st.pose, tentative, st.scenario)
        st.t_s += dt
        if st.scenario.goal and not st.goal_reached and st.scenario.goal.contains(st.pose):
            st.goal_reached = True
        self.ticks += 1

    def state_frame(self) -> dict:
        st = self.state
        active = []
        if st.mode == "four-electrode" and st.command != "stop":
            active = [DEFAULT_DIRECTION_MAP[st.command]]
        elif st.mode == "dual":
            if st.drive_left:
                active.append("left")
            if st.drive_right:
                active.append("right")
        return {
            "type": "state",
            "t_s": round(st.t_s, 6),
            "pose": {
                "x_mm": round(st.pose.x_m * 1e3, 4),
                "y_mm": round(st.pose.y_m * 1e3, 4),
                "theta_deg": round(math.degrees(st.pose.theta_rad), 4),
            },
            "mode": st.mode,
            "command": st.command,
            "active": active,
            "contact": st.contact,
            "goal_reached": st.goal_reached,
            "waveform": {
                "amplitude_kv": st.amplitude_kv,
                "zt_ms": st.zt_ms,
                "rt_ms": st.rt_ms,
            },
            "speed_mm_s": round(self.speed_mm_s(), 4),
        }


class TeleopServer:
    def __init__(self, session: TeleopSession, host: str = "127.0.0.1", port: int = 8471,
                 serve_ui: bool = False, ui_root: str | None = None):
        self.session = session
        self.host = host
        self.port = port
        self.serve_ui = serve_ui
        self.ui_root = ui_root
        self.operator = None
        self.clients: dict = {}  # ws -> single-slot outbound queue
        self.inbox: asyncio.Queue = asyncio.Queue()
        self._wake = asyncio.Event()
        self._bound_port = port

    async def _sender(self, ws, queue: asyncio.Queue):
        # one in-flight frame per client; the broadcast path never awaits
        try:
            while True:
                frame = await queue.get()
                await ws.send(frame)
        except websockets.ConnectionClosed:
            pass

    async def _handler(self, ws):
        role = "operator" if self.operator is None else "spectator"
        if role == "operator":
            self.operator = ws
        queue: asyncio.Queue = asyncio.Queue(maxsize=1)
        self.clients[ws] = queue
        sender = asyncio.create_task(self._sender(ws, queue))
        self._wake.set()
        try:
            await ws.send(json.dumps({"type": "hello", "role": role,
                                      **_scenario_payload(self.session.state.scenario)}))
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send(json.dumps({"type": "error", "message": "invalid JSON"}))
                    continue
                if ws is not self.operator:
                    await ws.send(json.dumps({"type": "error", "message": "read-only client"}))
                    continue
                await self.inbox.put((ws, msg))
        except websockets.ConnectionClosed:
            pass
        finally:
            sender.cancel()
            self.clients.pop(ws, None)
            if ws is self.operator:
                self.operator = None
                # operator gone: stop the robot
                self.session.apply_message({"type": "command", "direction": "stop"})
                self.session.apply_message({"type": "drive", "left": False, "right": False})

    async def _loop(self):
        tick_dt = 1.0 / SIM_TICK_HZ
        ticks_per_broadcast = max(1, round(SIM_TICK_HZ / BROADCAST_HZ))
        n = 0
        while True:
            if not self.clients:
                # idle: no busy spin while nobody is connected
                self._wake.clear()
                await self._wake.wait()
                continue
            # drain queued messages at the tick boundary, arrival order
            while not self.inbox.empty():
                ws, msg = self.inbox.get_nowait()
                reply = self.session.apply_message(msg)
                if reply is not None:
                    try:
                        await ws.send(json.dumps(reply))
                    except websockets.ConnectionClosed:
                        pass
            self.session.tick(tick_dt)
            n += 1
            if n % ticks_per_broadcast == 0:
                frame = json.dumps(self.session.state_frame())
                for queue in list(self.clients.values()):
                    if queue.full():
                        queue.get_nowait()  # slow consumer: drop to latest state
                    queue.put_nowait(frame)
            await asyncio.sleep(tick_dt / self.session.state.real_time_factor)

    async def run(self, ready: asyncio.Event | None = None):
        process_request = _ui_request_handler(self.ui_root) if self.serve_ui else None
        async with ws_serve(self._handler, self.host, self.port,
                            process_request=process_request) as srv:
            for sock in srv.sockets:
                self._bound_port = sock.getsockname()[1]
                break
            log.info("teleop bridge on ws://%s:%d", self.host, self._bound_port)
            if ready is not None:
                ready.set()
            await self._loop()


def _scenario_payload(sc: Scenario) -> dict:
    return {
        "scenario": {
            "name": sc.name,
            "walls_mm": [[[w.x1 * 1e3, w.y1 * 1e3], [w.x2 * 1e3, w.y2 * 1e3]] for w in sc.walls],
            "footprint": {"length_mm": sc.footprint_length_m * 1e3,
                          "width_mm": sc.footprint_width_m * 1e3},
            "start": {"x_mm": sc.start.x_m * 1e3, "y_mm": sc.start.y_m * 1e3,
                      "theta_deg": math.degrees(sc.start.theta_rad)},
            "goal": {"x_mm": sc.goal.x_m * 1e3, "y_mm": sc.goal.y_m * 1e3,
                     "radius_mm": sc.goal.radius_m * 1e3} if sc.goal else None,
        }
    }


def _ui_request_handler(ui_root: str | None):
    import pathlib

    root = pathlib.Path(ui_root) if ui_root else pathlib.Path(__file__).parent.parent.parent / "frontend"

    def handler(connection, request):
        from websockets.http11 import Response
        from websockets.datastructures import Headers

        if request.headers.get("Upgrade", "").lower() == "websocket":
            return None  # proceed with the WebSocket handshake
        path = request.path.split("?", 1)[0]
        rel = "index.html" if path in ("/", "") else path.lstrip("/")
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            return Response(404, "Not Found", Headers({"Content-Type": "text/plain"}),
                            b"not found")
        ctype = {
            ".html": "text/html", ".js": "text/javascript", ".css": "text/css",
            ".json": "application/json", ".map": "application/json",
        }.get(target.suffix, "application/octet-stream")
        return Response(200, "OK", Headers({"Content-Type": ctype}), target.read_bytes())

    return handler


def serve_forever(scenario: Scenario, port: int = 8471, host: str = "127.0.0.1",
                  real_time_factor: float = 1.0, serve_ui: bool = False,
                  ui_root: str | None = None) -> None:
    session = TeleopSession(scenario, real_time_factor=real_time_factor)
    server = TeleopServer(session, host=host, port=port, serve_ui=serve_ui, ui_root=ui_root)
    try:
        asyncio.run(server.run())
    except KeyboardInterrupt:
        pass
