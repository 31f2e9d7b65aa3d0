import copy

import pytest

from efkesim import calibration, engine
from efkesim.calibration import (
    DataPoint,
    SweepSpec,
    check_dominance,
    check_plateau,
    check_rise_then_fall,
    check_small_volume_weakness,
    grid_sweep,
    load_dataset,
    recommend_pattern,
    solve_turning,
    trend_check,
    weighted_rms,
)
from efkesim.config import ActuatorConfig, ConfigError


class TestDataPoint:
    def test_equality_residual(self):
        p = DataPoint(observable="velocity_mm_s", weight=1.0, source="x", target=10.0)
        assert p.residual(12.0) == pytest.approx(0.2)
        assert p.residual(10.0) == 0.0

    def test_hinge_upper(self):
        p = DataPoint(observable="stride_mm", weight=1.0, source="x", upper=0.2)
        assert p.residual(0.1) == 0.0
        assert p.residual(0.3) == pytest.approx(0.5)

    def test_interval(self):
        p = DataPoint(observable="velocity_mm_s", weight=1.0, source="x", lower=3.0, upper=8.0)
        assert p.residual(5.0) == 0.0
        assert p.residual(2.0) < 0.0
        assert p.residual(9.0) > 0.0

    def test_requires_source_and_target(self):
        with pytest.raises(ConfigError):
            DataPoint(observable="velocity_mm_s", weight=1.0, source="", target=1.0)
        with pytest.raises(ConfigError):
            DataPoint(observable="velocity_mm_s", weight=1.0, source="x")
        with pytest.raises(ConfigError):
            DataPoint(observable="velocity_mm_s", weight=0.0, source="x", target=1.0)

    def test_bundled_dataset_shape(self):
        ds = load_dataset()
        assert len(ds) == 11
        assert all(p.source for p in ds)
        assert {p.observable for p in ds} == {"velocity_mm_s", "stride_mm", "yaw_deg_s"}


class TestSolveTurning:
    def test_exact_when_feasible(self):
        sol = solve_turning(12.9, 3.46, 2.86)
        assert sol["feasible"]
        assert sol["yaw_right_deg_s"] == pytest.approx(3.46, rel=1e-9)
        assert sol["yaw_left_deg_s"] == pytest.approx(2.86, rel=1e-9)
        assert 0.0 < sol["passive_drag_ratio"] < 1.0

    def test_infeasible_when_too_slow(self):
        sol = solve_turning(2.0, 3.46, 2.86)
        assert not sol["feasible"]
        assert sol["yaw_right_deg_s"] < 3.46


class TestSweep:
    SPEC = SweepSpec(axes={"amplitude_kv": [4, 5], "rt_ms": [40, 80]}, duration_s=0.5)

    def test_row_count_is_axis_product(self, cfg):
        rows = grid_sweep(self.SPEC, cfg)
        assert len(rows) == 4

    def test_single_point_matches_run_episode(self, cfg, air):
        spec = SweepSpec(axes={"amplitude_kv": [5.0]}, duration_s=1.0)
        rows = grid_sweep(spec, cfg)
        from efkesim.waveform import HvWaveform

        tel = engine.run_episode(cfg, HvWaveform(5.0, 20.0, 80.0), air, duration=1.0)
        assert rows[0]["velocity_mm_s"] == pytest.approx(
            engine.average_velocity(tel).mm_s, rel=1e-12
        )

    def test_axis_order_is_canonical(self, cfg):
        a = SweepSpec(axes={"amplitude_kv": [4, 5], "rt_ms": [40, 80]}, duration_s=0.5)
        b = SweepSpec(axes={"rt_ms": [80, 40], "amplitude_kv": [5, 4]}, duration_s=0.5)
        rows_a = grid_sweep(a, cfg)
        rows_b = grid_sweep(b, cfg)
        assert rows_a == rows_b

    def test_parallel_matches_serial(self, cfg):
        rows1 = grid_sweep(self.SPEC, cfg, jobs=1)
        rows2 = grid_sweep(self.SPEC, cfg, jobs=2)
        assert rows1 == rows2

    def test_unknown_axis_rejected(self):
        with pytest.raises(ConfigError):
            SweepSpec(axes={"frequency_hz": [1.0]})

    def test_csv_roundtrip(self, cfg, tmp_path):
        rows = grid_sweep(self.SPEC, cfg)
        p = tmp_path / "sweep.csv"
        calibration.write_sweep_csv(rows, str(p))
        back = calibration.read_sweep_csv(str(p))
        assert len(back) == len(rows)
        assert back[0]["velocity_mm_s"] == pytest.approx(rows[0]["velocity_mm_s"], rel=1e-8)


def synth_rows(curve, zt=20.0, amp=5.0):
    return [
        {"zt_ms": zt, "amplitude_kv": amp, "rt_ms": rt, "velocity_mm_s": v, "ok": True}
        for rt, v in curve
    ]


class TestTrends:
    def test_unimodal_passes(self):
        rows = synth_rows([(10, 1.0), (20, 3.0), (40, 5.0), (80, 4.0), (160, 2.0)])
        reps = check_rise_then_fall(rows)
        assert all(r.passed for r in reps)

    def test_monotone_fails(self):
        rows = synth_rows([(10, 1.0), (20, 2.0), (40, 3.0), (80, 4.0), (160, 5.0)])
        reps = check_rise_then_fall(rows)
        assert not any(r.passed for r in reps)

    def test_insufficient_coverage_raises(self):
        rows = synth_rows([(10, 1.0), (20, 2.0)])
        with pytest.raises(ConfigError):
            check_rise_then_fall(rows)

    def test_plateau_detection(self):
        rows = synth_rows([(10, 0.5), (20, 4.0), (40, 4.1), (80, 3.9), (160, 4.0), (320, 1.0)])
        rep = check_plateau(rows, group={"zt_ms": 20.0, "amplitude_kv": 5.0}, window=4,
                            rel_tol=0.25)
        assert rep.passed

    def test_plateau_absent(self):
        rows = synth_rows([(10, 1.0), (20, 2.0), (40, 4.0), (80, 8.0), (160, 16.0), (320, 32.0)])
        rep = check_plateau(rows, group={"zt_ms": 20.0, "amplitude_kv": 5.0}, window=4,
                            rel_tol=0.1)
        assert not rep.passed

    def test_dominance(self):
        rows = [
            {"electrode_length_mm": 25.0, "velocity_mm_s": 12.0, "ok": True},
            {"electrode_length_mm": 15.0, "velocity_mm_s": 1.0, "ok": True},
        ]
        assert check_dominance(rows).passed
        rows[1]["velocity_mm_s"] = 20.0
        assert not check_dominance(rows).passed

    def test_small_volume_weakness(self):
        rows = [
            {"electrode_length_mm": 15.0, "oil_volume_ml": 5.0, "velocity_mm_s": 0.5, "ok": True},
            {"electrode_length_mm": 15.0, "oil_volume_ml": 8.0, "velocity_mm_s": 5.0, "ok": True},
        ]
        assert check_small_volume_weakness(rows).passed
        rows[0]["velocity_mm_s"] = 3.0
        assert not check_small_volume_weakness(rows).passed

    def test_verdicts_are_pure(self):
        rows = synth_rows([(10, 1.0), (20, 3.0), (40, 5.0), (80, 4.0), (160, 2.0)])
        r1 = trend_check(copy.deepcopy(rows))
        r2 = trend_check(copy.deepcopy(rows))
        assert r1 == r2


class TestRecommend:
    def test_dominant_cell_wins(self):
        rows = synth_rows([(40, 1.0), (80, 9.0), (160, 2.0)])
        recs = recommend_pattern(rows)
        assert recs[0].rt_ms == 80

    def test_zero_stability_weight_is_argmax(self):
        rows = synth_rows([(40, 3.0), (80, 5.0), (160, 4.9)])
        recs = recommend_pattern(rows, stability_weight=0.0)
        assert recs[0].rt_ms == 80

    def test_tie_breaks_to_larger_rt(self):
        rows = synth_rows([(40, 5.0), (80, 5.0), (160, 5.0)])
        recs = recommend_pattern(rows, stability_weight=0.0)
        assert recs[0].rt_ms == 160


class TestCalibrate:
    def test_one_point_one_param_exact(self):
        # a single equality target with one free scale parameter is fittable
        base = ActuatorConfig()
        target_cfg = base.replaced(mu_dynamic=base.mu_dynamic * 1.35,
                                   mu_static=base.mu_static)
        from efkesim.waveform import HvWaveform

        tel = engine.run_episode(target_cfg, HvWaveform(5.0, 20.0, 80.0), duration=2.0)
        target_v = engine.average_velocity(tel).mm_s
        ds = [DataPoint(observable="velocity_mm_s", weight=1.0, source="synthetic",
                        target=target_v)]
        fit = calibration.calibrate(
            ds, free_params=("mu_dynamic",), init=base, seed=0, restarts=2,
            max_evals_per_restart=60, velocity_duration=2.0,
        )
        assert abs(fit.residuals[0]) < 0.02
        lo, hi = calibration.DEFAULT_BOUNDS["mu_dynamic"]
        assert lo <= fit.parameters["mu_dynamic"] <= hi

    def test_never_worse_than_init(self):
        ds = load_dataset()
        base = ActuatorConfig()
        _, res0 = calibration.evaluate_dataset(ds, base)
        rms0 = weighted_rms(ds, res0)
        fit = calibration.calibrate(ds, init=base, seed=1, restarts=1,
                                    max_evals_per_restart=25)
        assert fit.rms <= rms0 + 1e-12

    def test_empty_dataset_rejected(self):
        with pytest.raises(ConfigError):
            calibration.calibrate([], init=ActuatorConfig())

    def test_empty_free_set_rejected(self):
        with pytest.raises(ConfigError):
            calibration.calibrate(load_dataset(), free_params=(), init=ActuatorConfig())


def test_calibrate_one_point_duration_kwarg_supported():
    # velocity_duration is honoured so short dev fits stay cheap
    ds = [DataPoint(observable="velocity_mm_s", weight=1.0, source="synthetic", target=5.0)]
    vals, res = calibration.evaluate_dataset(ds, ActuatorConfig(), velocity_duration=1.0)
    assert len(vals) == 1
