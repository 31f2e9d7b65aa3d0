"""Planar kinematics for the reconfigured 2-DoF robots.

Two configurations: a dual robot (two bodies joined side by side, steered
differentially like a two-track vehicle) and a four-electrode robot on a
single bladder that translates in +-x/+-y without rotating.  The planar
layer consumes time-averaged crawl speeds from the 1-D engine; it does
not co-simulate slug dynamics.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources

from .config import ConfigError
from .waveform import DIRECTIONS


@dataclass(frozen=True)
class Pose2D:
    x_m: float = 0.0
    y_m: float = 0.0
    theta_rad: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta_rad", _wrap_angle(self.theta_rad))


def _wrap_angle(a: float) -> float:
    """Normalize to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True)
class Wall:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ConfigError("wall coordinates must be finite")
        if self.x1 == self.x2 and self.y1 == self.y2:
            raise ConfigError("wall segment has zero length")


@dataclass(frozen=True)
class GoalRegion:
    x_m: float
    y_m: float
    radius_m: float

    def contains(self, pose: Pose2D) -> bool:
        return math.hypot(pose.x_m - self.x_m, pose.y_m - self.y_m) <= self.radius_m


@dataclass(frozen=True)
class Scenario:
    """Walled planar world with a start pose and optional goal."""

    walls: tuple[Wall, ...]
    footprint_length_m: float = 0.05
    footprint_width_m: float = 0.05
    start: Pose2D = field(default_factory=Pose2D)
    goal: GoalRegion | None = None
    name: str = "scenario"

    def __post_init__(self) -> None:
        if not (self.footprint_length_m > 0 and self.footprint_width_m > 0):
            raise ConfigError("footprint dimensions must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        known = {"walls_mm", "footprint", "start", "goal", "name"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario key(s): {sorted(unknown)}")
        walls = tuple(
            Wall(w[0][0] * 1e-3, w[0][1] * 1e-3, w[1][0] * 1e-3, w[1][1] * 1e-3)
            for w in data.get("walls_mm", [])
        )
        fp = data.get("footprint", {})
        start = data.get("start", {})
        goal = data.get("goal")
        return cls(
            walls=walls,
            footprint_length_m=fp.get("length_mm", 50.0) * 1e-3,
            footprint_width_m=fp.get("width_mm", 50.0) * 1e-3,
            start=Pose2D(
                start.get("x_mm", 0.0) * 1e-3,
                start.get("y_mm", 0.0) * 1e-3,
                math.radians(start.get("theta_deg", 0.0)),
            ),
            goal=GoalRegion(
                goal["x_mm"] * 1e-3, goal["y_mm"] * 1e-3, goal["radius_mm"] * 1e-3
            )
            if goal
            else None,
            name=data.get("name", "scenario"),
        )

    @classmethod
    def load(cls, path: str) -> "Scenario":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def bundled(cls, name: str = "winding_gap") -> "Scenario":
        text = resources.files("efkesim.data").joinpath(f"{name}.json").read_text()
        return cls.from_dict(json.loads(text))


def dual_robot_yaw(v_left_mm_s: float, v_right_mm_s: float, track_width_mm: float):
    """Yaw rate (deg/s, +ccw) and forward speed (mm/s) of the joined pair."""
    if not track_width_mm > 0:
        raise ConfigError(f"track_width_mm must be > 0, got {track_width_mm}")
    omega = (v_right_mm_s - v_left_mm_s) / track_width_mm  # rad/s
    forward = 0.5 * (v_left_mm_s + v_right_mm_s)
    return math.degrees(omega), forward


def step_pose(pose: Pose2D, forward_mm_s: float, yaw_deg_s: float, dt: float) -> Pose2D:
    """Exact unicycle arc update."""
    if not dt > 0:
        raise ConfigError(f"dt must be > 0, got {dt}")
    v = forward_mm_s * 1e-3
    w = math.radians(yaw_deg_s)
    if abs(w) < 1e-9:
        return Pose2D(
            pose.x_m + v * dt * math.cos(pose.theta_rad),
            pose.y_m + v * dt * math.sin(pose.theta_rad),
            pose.theta_rad + w * dt,
        )
    r = v / w
    th0 = pose.theta_rad
    th1 = th0 + w * dt
    return Pose2D(
        pose.x_m + r * (math.sin(th1) - math.sin(th0)),
        pose.y_m - r * (math.cos(th1) - math.cos(th0)),
        th1,
    )


@dataclass(frozen=True)
class TurnCalibration:
    """Differential-drive parameters fitted to the measured turn rates."""

    track_width_mm: float = 100.0
    passive_drag_ratio: float = 0.533
    right_side_factor: float = 0.8266
    active_speed_mm_s: float = 12.93

    @classmethod
    def bundled(cls) -> "TurnCalibration":
        text = resources.files("efkesim.data").joinpath("planar_calibration.json").read_text()
        d = json.loads(text)
        return cls(
            track_width_mm=d["track_width_mm"],
            passive_drag_ratio=d["passive_drag_ratio"],
            right_side_factor=d["right_side_factor"],
            active_speed_mm_s=d["active_speed_mm_s"],
        )

    def side_speeds(self, left_on: bool, right_on: bool) -> tuple[float, float]:
        """(v_left, v_right) in mm/s for a drive command."""
        v_l_active = self.active_speed_mm_s
        v_r_active = self.active_speed_mm_s * self.right_side_factor
        if left_on and right_on:
            return v_l_active, v_l_active  # symmetric straight drive
        if left_on:
            return v_l_active, v_l_active * self.passive_drag_ratio
        if right_on:
            return v_r_active * self.passive_drag_ratio, v_r_active
        return 0.0, 0.0


def four_electrode_velocity(command: str, speed_table: dict[str, float]) -> tuple[float, float]:
    """Body-frame velocity vector (mm/s) for a direction command."""
    if command == "stop":
        return 0.0, 0.0
    if command not in ("+x", "-x", "+y", "-y"):
        raise ConfigError(f"unknown direction command {command!r}")
    s = speed_table[command]
    return {
        "+x": (s, 0.0),
        "-x": (-s, 0.0),
        "+y": (0.0, s),
        "-y": (0.0, -s),
    }[command]


def _corners(pose: Pose2D, length: float, width: float) -> list[tuple[float, float]]:
    c, s = math.cos(pose.theta_rad), math.sin(pose.theta_rad)
    hx, hy = 0.5 * length, 0.5 * width
    out = []
    for dx, dy in ((hx, hy), (hx, -hy), (-hx, -hy), (-hx, hy)):
        out.append((pose.x_m + dx * c - dy * s, pose.y_m + dx * s + dy * c))
    return out


def _seg_intersect(p, q, a, b):
    """Parameter t along p->q of the crossing with segment a-b, or None."""
    rx, ry = q[0] - p[0], q[1] - p[1]
    sx, sy = b[0] - a[0], b[1] - a[1]
    denom = rx * sy - ry * sx
    if abs(denom) < 1e-18:
        return None
    t = ((a[0] - p[0]) * sy - (a[1] - p[1]) * sx) / denom
    u = ((a[0] - p[0]) * ry - (a[1] - p[1]) * rx) / denom
    if -1e-12 <= t <= 1.0 + 1e-12 and -1e-12 <= u <= 1.0 + 1e-12:
        return max(0.0, min(1.0, t))
    return None


def collide(
    pose: Pose2D,
    new_pose: Pose2D,
    scenario: Scenario,
    max_iters: int = 4,
) -> tuple[Pose2D, bool]:
    """Resolve footprint-vs-wall contact for one motion step.

    Corner paths are swept against every wall; the displacement component
    along the wall normal is removed (sliding preserved).  Works for
    per-step motion below half the footprint size; returns the corrected
    pose and a contact flag.
    """
    contact = False
    cur = new_pose
    for _ in range(max_iters):
        old_c = _corners(pose, scenario.footprint_length_m, scenario.footprint_width_m)
        new_c = _corners(cur, scenario.footprint_length_m, scenario.footprint_width_m)
        hit_normal = None
        hit_depth = 0.0
        for wall in scenario.walls:
            a, b = (wall.x1, wall.y1), (wall.x2, wall.y2)
            wx, wy = b[0] - a[0], b[1] - a[1]
            wlen = math.hypot(wx, wy)
            nx, ny = -wy / wlen, wx / wlen
            for p, q in zip(old_c, new_c):
                t = _seg_intersect(p, q, a, b)
                if t is None:
                    continue
                # depth of penetration past the wall along its normal
                dx, dy = q[0] - p[0], q[1] - p[1]
                side = dx * nx + dy * ny  # motion along the normal
                if abs(side) < 1e-15:
                    continue
                pen = abs((1.0 - t) * side)
                if pen > hit_depth:
                    hit_depth = pen
                    hit_normal = (nx, ny) if side > 0 else (-nx, -ny)
        if hit_normal is None:
            break
        contact = True
        # push the whole pose back along the wall normal, keep the tangential part
        eps = 1e-7
        cur = replace(
            cur,
            x_m=cur.x_m - hit_normal[0] * (hit_depth + eps),
            y_m=cur.y_m - hit_normal[1] * (hit_depth + eps),
        )
    return cur, contact


def footprint_intersects(pose: Pose2D, scenario: Scenario) -> bool:
    """True when any footprint edge crosses a wall (invalid placement)."""
    corners = _corners(pose, scenario.footprint_length_m, scenario.footprint_width_m)
    edges = list(zip(corners, corners[1:] + corners[:1]))
    for wall in scenario.walls:
        a, b = (wall.x1, wall.y1), (wall.x2, wall.y2)
        for p, q in edges:
            if _seg_intersect(p, q, a, b) is not None:
                return True
    return False


@dataclass
class TrajectoryPoint:
    t_s: float
    x_mm: float
    y_mm: float
    theta_deg: float
    command: str
    contact: bool


@dataclass
class ScenarioResult:
    trajectory: list[TrajectoryPoint]
    goal_reached: bool
    goal_time_s: float | None

    def to_csv(self, path: str) -> None:
        from .cli import fmt

        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("t_s,x_mm,y_mm,theta_deg,command,contact\n")
            for p in self.trajectory:
                fh.write(
                    ",".join(
                        [fmt(p.t_s), fmt(p.x_mm), fmt(p.y_mm), fmt(p.theta_deg), p.command,
                         "1" if p.contact else "0"]
                    )
                    + "\n"
                )


def load_command_script(path: str) -> list[tuple[float, str]]:
    cmds: list[tuple[float, str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            d = row["command"].strip()
            if d not in DIRECTIONS:
                raise ConfigError(f"unknown command {d!r} in script")
            cmds.append((float(row["t_s"]), d))
    return sorted(cmds, key=lambda c: c[0])


def bundled_script(name: str = "winding_gap_script") -> list[tuple[float, str]]:
    text = resources.files("efkesim.data").joinpath(f"{name}.csv").read_text()
    cmds = []
    for line in text.strip().splitlines()[1:]:
        t, d = line.split(",")
        cmds.append((float(t), d.strip()))
    return cmds


def run_scenario(
    scenario: Scenario,
    commands: list[tuple[float, str]],
    speed_table: dict[str, float],
    duration: float,
    dt: float = 0.02,
    log_every: int = 1,
) -> ScenarioResult:
    """Integrate a four-electrode robot through a command script.

    Commands hold until replaced; the robot translates in the commanded
    world direction (heading fixed), sliding along any wall it touches.
    """
    if not duration > 0:
        raise ConfigError("duration must be > 0")
    pose = scenario.start
    if footprint_intersects(pose, scenario):
        raise ConfigError("start pose penetrates a wall")
    cmds = sorted(commands, key=lambda c: c[0])
    traj: list[TrajectoryPoint] = []
    goal_reached = False
    goal_time = None
    active = "stop"
    n = int(round(duration / dt))
    ci = 0
    for i in range(n + 1):
        t = i * dt
        while ci < len(cmds) and cmds[ci][0] <= t:
            active = cmds[ci][1]
            ci += 1
        vx, vy = four_electrode_velocity(active, speed_table)
        c, s = math.cos(pose.theta_rad), math.sin(pose.theta_rad)
        wx = (vx * c - vy * s) * 1e-3
        wy = (vx * s + vy * c) * 1e-3
        tentative = replace(pose, x_m=pose.x_m + wx * dt, y_m=pose.y_m + wy * dt)
        new_pose, contact = collide(pose, tentative, scenario)
        pose = new_pose
        if scenario.goal and not goal_reached and scenario.goal.contains(pose):
            goal_reached = True
            goal_time = t
        if i % log_every == 0:
            traj.append(
                TrajectoryPoint(
                    t_s=t,
                    x_mm=pose.x_m * 1e3,
                    y_mm=pose.y_m * 1e3,
                    theta_deg=math.degrees(pose.theta_rad),
                    command=active,
                    contact=contact,
                )
            )
    return ScenarioResult(trajectory=traj, goal_reached=goal_reached, goal_time_s=goal_time)


def run_dual_scenario(
    scenario: Scenario,
    drives: list[tuple[float, bool, bool]],
    calibration: TurnCalibration,
    duration: float,
    dt: float = 0.02,
) -> ScenarioResult:
    """Integrate the dual robot under (t, left_on, right_on) drive commands."""
    pose = scenario.start
    traj: list[TrajectoryPoint] = []
    goal_reached = False
    goal_time = None
    left = right = False
    di = 0
    drives = sorted(drives, key=lambda d: d[0])
    n = int(round(duration / dt))
    for i in range(n + 1):
        t = i * dt
        while di < len(drives) and drives[di][0] <= t:
            left, right = drives[di][1], drives[di][2]
            di += 1
        v_l, v_r = calibration.side_speeds(left, right)
        yaw, fwd = dual_robot_yaw(v_l, v_r, calibration.track_width_mm)
        tentative = step_pose(pose, fwd, yaw, dt)
        pose, contact = collide(pose, tentative, scenario)
        if scenario.goal and not goal_reached and scenario.goal.contains(pose):
            goal_reached = True
            goal_time = t
        traj.append(
            TrajectoryPoint(t, pose.x_m * 1e3, pose.y_m * 1e3,
                            math.degrees(pose.theta_rad),
                            f"L{int(left)}R{int(right)}", contact)
        )
    return ScenarioResult(trajectory=traj, goal_reached=goal_reached, goal_time_s=goal_time)
