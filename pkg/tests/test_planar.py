import json
import math

import pytest

from efkesim.config import ConfigError
from efkesim.planar import (
    GoalRegion,
    Pose2D,
    Scenario,
    TurnCalibration,
    Wall,
    bundled_script,
    collide,
    dual_robot_yaw,
    four_electrode_velocity,
    run_dual_scenario,
    run_scenario,
    step_pose,
)


class TestDualRobotYaw:
    def test_equal_speeds_no_yaw(self):
        yaw, fwd = dual_robot_yaw(10.0, 10.0, 100.0)
        assert yaw == 0.0
        assert fwd == 10.0

    def test_antisymmetric(self):
        y1, _ = dual_robot_yaw(12.0, 4.0, 100.0)
        y2, _ = dual_robot_yaw(4.0, 12.0, 100.0)
        assert y1 == -y2
        assert y1 < 0  # left faster: clockwise (right turn)

    def test_track_width_must_be_positive(self):
        with pytest.raises(ConfigError):
            dual_robot_yaw(1.0, 2.0, 0.0)

    def test_calibrated_turn_rates(self):
        cal = TurnCalibration.bundled()
        v_l, v_r = cal.side_speeds(left_on=True, right_on=False)
        yaw, _ = dual_robot_yaw(v_l, v_r, cal.track_width_mm)
        assert yaw == pytest.approx(-3.46, rel=1e-6)
        v_l, v_r = cal.side_speeds(left_on=False, right_on=True)
        yaw, _ = dual_robot_yaw(v_l, v_r, cal.track_width_mm)
        assert yaw == pytest.approx(2.86, rel=1e-6)


class TestStepPose:
    def test_straight_line(self):
        p = step_pose(Pose2D(), 10.0, 0.0, 1.0)
        assert p.x_m == pytest.approx(0.010, rel=1e-12)
        assert p.y_m == 0.0

    def test_pure_rotation(self):
        p = step_pose(Pose2D(), 0.0, 90.0, 1.0)
        assert p.x_m == pytest.approx(0.0, abs=1e-15)
        assert p.y_m == pytest.approx(0.0, abs=1e-15)
        assert p.theta_rad == pytest.approx(math.pi / 2, rel=1e-12)

    def test_full_circle_closure(self):
        v, yaw = 10.0, 36.0  # 10 s per revolution
        pose = Pose2D(0.01, -0.02, 0.3)
        dt = 1e-3
        for _ in range(10_000):
            pose = step_pose(pose, v, yaw, dt)
        assert math.hypot(pose.x_m - 0.01, pose.y_m + 0.02) < 1e-9

    def test_rest_is_identity(self):
        p0 = Pose2D(0.1, 0.2, 0.5)
        p1 = step_pose(p0, 0.0, 0.0, 0.1)
        assert (p1.x_m, p1.y_m, p1.theta_rad) == (p0.x_m, p0.y_m, p0.theta_rad)

    def test_heading_normalized(self):
        p = step_pose(Pose2D(theta_rad=3.0), 0.0, 90.0, 2.0)
        assert -math.pi < p.theta_rad <= math.pi


class TestFourElectrode:
    TABLE = {"+x": 10.0, "-x": 10.0, "+y": 8.0, "-y": 8.0}

    def test_stop(self):
        assert four_electrode_velocity("stop", self.TABLE) == (0.0, 0.0)

    def test_directions(self):
        assert four_electrode_velocity("+x", self.TABLE) == (10.0, 0.0)
        assert four_electrode_velocity("-y", self.TABLE) == (0.0, -8.0)

    def test_opposites_cancel(self):
        vx1, vy1 = four_electrode_velocity("+x", self.TABLE)
        vx2, vy2 = four_electrode_velocity("-x", self.TABLE)
        assert (vx1 + vx2, vy1 + vy2) == (0.0, 0.0)

    def test_unknown_command(self):
        with pytest.raises(ConfigError):
            four_electrode_velocity("up", self.TABLE)

    def test_l_shaped_path(self):
        sc = Scenario(walls=(), start=Pose2D())
        script = [(0.0, "+x"), (2.0, "+y"), (4.0, "stop")]
        res = run_scenario(sc, script, self.TABLE, duration=5.0, dt=0.01)
        end = res.trajectory[-1]
        assert end.x_mm == pytest.approx(20.0, rel=1e-6)
        assert end.y_mm == pytest.approx(16.0, rel=1e-6)
        assert end.theta_deg == 0.0


class TestCollide:
    SC = Scenario(
        walls=(Wall(0.1, -0.5, 0.1, 0.5),),  # vertical wall at x = 100 mm
        footprint_length_m=0.05,
        footprint_width_m=0.05,
    )

    def test_open_space(self):
        p0 = Pose2D(0.0, 0.0, 0.0)
        p1 = Pose2D(0.01, 0.0, 0.0)
        out, contact = collide(p0, p1, self.SC)
        assert not contact
        assert out == p1

    def test_head_on_contact_removes_normal_motion(self):
        p0 = Pose2D(0.074, 0.0, 0.0)  # front edge 1 mm from the wall
        p1 = Pose2D(0.080, 0.0, 0.0)  # would penetrate 5 mm
        out, contact = collide(p0, p1, self.SC)
        assert contact
        assert out.x_m <= 0.075 + 1e-9
        assert out.y_m == p1.y_m  # tangential motion preserved

    def test_sliding_preserves_tangential(self):
        p0 = Pose2D(0.0749, 0.0, 0.0)
        p1 = Pose2D(0.0769, 0.01, 0.0)  # diagonal push into the wall
        out, contact = collide(p0, p1, self.SC)
        assert contact
        assert out.y_m == pytest.approx(0.01, rel=1e-9)
        assert out.x_m <= 0.075 + 1e-6

    def test_never_increases_speed(self):
        p0 = Pose2D(0.074, 0.0, 0.0)
        p1 = Pose2D(0.08, 0.003, 0.0)
        out, _ = collide(p0, p1, self.SC)
        moved = math.hypot(out.x_m - p0.x_m, out.y_m - p0.y_m)
        asked = math.hypot(p1.x_m - p0.x_m, p1.y_m - p0.y_m)
        assert moved <= asked + 1e-12

    def test_start_pose_penetration_rejected(self):
        sc = Scenario(walls=(Wall(0.0, -0.5, 0.0, 0.5),), start=Pose2D(0.01, 0.0, 0.0))
        with pytest.raises(ConfigError):
            run_scenario(sc, [(0.0, "stop")], {"+x": 1.0, "-x": 1.0, "+y": 1.0, "-y": 1.0},
                         duration=0.1)


class TestScenario:
    def test_corridor_traversal(self):
        # corridor 4 mm wider than the footprint, traversed end to end
        sc = Scenario(
            walls=(Wall(-0.05, -0.027, 0.4, -0.027), Wall(-0.05, 0.027, 0.4, 0.027)),
            start=Pose2D(0.0, 0.001, 0.0),  # slightly off-center
            goal=GoalRegion(0.35, 0.0, 0.03),
        )
        table = {"+x": 16.0, "-x": 16.0, "+y": 16.0, "-y": 16.0}
        res = run_scenario(sc, [(0.0, "+x")], table, duration=25.0, dt=0.02)
        assert res.goal_reached

    def test_empty_script_is_stationary(self):
        sc = Scenario.bundled("winding_gap")
        res = run_scenario(sc, [], {"+x": 10.0, "-x": 10.0, "+y": 10.0, "-y": 10.0},
                           duration=1.0)
        first, last = res.trajectory[0], res.trajectory[-1]
        assert (first.x_mm, first.y_mm) == (last.x_mm, last.y_mm)

    def test_winding_gap_reference_script(self):
        sc = Scenario.bundled("winding_gap")
        script = bundled_script()
        table = json.loads(
            __import__("importlib.resources", fromlist=["files"])
            .files("efkesim.data").joinpath("speed_table.json").read_text()
        )
        res = run_scenario(sc, script, table, duration=46.0, dt=0.02)
        assert res.goal_reached
        assert res.goal_time_s < 46.0

    def test_dual_left_only_ten_seconds(self):
        cal = TurnCalibration.bundled()
        sc = Scenario(walls=(), start=Pose2D())
        res = run_dual_scenario(sc, [(0.0, True, False)], cal, duration=10.0, dt=0.01)
        assert res.trajectory[-1].theta_deg == pytest.approx(-34.6, rel=0.10)

    def test_trajectory_csv(self, tmp_path):
        sc = Scenario(walls=(), start=Pose2D())
        res = run_scenario(sc, [(0.0, "+x")], {"+x": 10.0, "-x": 10.0, "+y": 10.0, "-y": 10.0},
                           duration=1.0, dt=0.1)
        p = tmp_path / "traj.csv"
        res.to_csv(str(p))
        lines = p.read_text().splitlines()
        assert lines[0] == "t_s,x_mm,y_mm,theta_deg,command,contact"
        assert len(lines) == len(res.trajectory) + 1


class TestScenarioIO:
    def test_bundled_scenario_loads(self):
        sc = Scenario.bundled("winding_gap")
        assert sc.goal is not None
        assert len(sc.walls) == 8
        assert sc.footprint_length_m == pytest.approx(0.05)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            Scenario.from_dict({"bogus": 1})

    def test_zero_length_wall_rejected(self):
        with pytest.raises(ConfigError):
            Wall(0.0, 0.0, 0.0, 0.0)
