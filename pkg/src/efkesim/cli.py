"""Command-line entry point for batch workflows.

All numeric output is printed with 9 significant digits so repeated runs
produce byte-identical files.  Exit codes: 0 success, 1 validation
error, 2 numeric failure, 3 failed trend or acceptance check.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from importlib import resources

from . import calibration, engine, planar
from .config import ActuatorConfig, ConfigError, Environment, load_json
from .physics import NumericError
from .waveform import PRESETS, HvWaveform, preset

log = logging.getLogger("efkesim")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2
EXIT_CHECK_FAILED = 3


def fmt(x) -> str:
    """Canonical 9-significant-digit rendering for CSV/JSON output."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    if x != x:  # nan
        return "nan"
    return f"{x:.9g}"


def json_ready(obj):
    """Round floats to the documented output precision, recursively."""
    if isinstance(obj, float):
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return json_ready(dataclasses.asdict(obj))
    return obj


def write_json(data, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(json_ready(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclasses.dataclass
class RunConfig:
    """Validated run request assembled from defaults, file and flags."""

    actuator: ActuatorConfig
    environment: Environment
    waveform: HvWaveform
    duration_s: float = 5.0
    dt_s: float = engine.DT_DEFAULT
    log_hz: float = engine.LOG_HZ_DEFAULT
    seed: int = 0


def load_config(path: str | None, preset_name: str | None = None,
                overrides: dict | None = None) -> RunConfig:
    """Merge a JSON config file over documented defaults.

    Recognized top-level keys: actuator, environment, waveform (or
    preset), duration_s, dt_us, log_hz, seed.  Unknown keys are rejected.
    """
    data = load_json(path) if path else {}
    known = {"actuator", "environment", "waveform", "preset", "duration_s", "dt_us",
             "log_hz", "seed"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")

    actuator = ActuatorConfig.from_dict({**data.get("actuator", {})})
    env = Environment.from_dict(data.get("environment", {}))
    if preset_name:
        wf = preset(preset_name)
    elif "preset" in data:
        wf = preset(data["preset"])
    elif "waveform" in data:
        wf = HvWaveform.from_dict(data["waveform"])
    else:
        wf = preset("5kv-20-80")
    run = RunConfig(
        actuator=actuator,
        environment=env,
        waveform=wf,
        duration_s=data.get("duration_s", 5.0),
        dt_s=data.get("dt_us", engine.DT_DEFAULT * 1e6) * 1e-6,
        log_hz=data.get("log_hz", engine.LOG_HZ_DEFAULT),
        seed=data.get("seed", 0),
    )
    for ov_key, ov_val in (overrides or {}).items():
        setattr(run, ov_key, ov_val)
    if not run.duration_s > 0:
        raise ConfigError(f"duration_s must be > 0, got {run.duration_s}")
    if not 0 < run.dt_s <= engine.DT_CAP:
        raise ConfigError(f"dt_us must be in (0, {engine.DT_CAP * 1e6:g}], got {run.dt_s * 1e6}")
    return run


def _bundled_path(name: str) -> str:
    return str(resources.files("efkesim.data").joinpath(name))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--preset", help="waveform preset name (see `presets`)")
    p.add_argument("--duration", type=float, help="episode duration, s")
    p.add_argument("--dt-us", type=float, help="integration step, microseconds")
    p.add_argument("--out", help="output directory", default=".")
    p.add_argument("--seed", type=int, default=0)


def _runconfig_from_args(args) -> RunConfig:
    overrides = {}
    if args.duration is not None:
        overrides["duration_s"] = args.duration
    if getattr(args, "dt_us", None) is not None:
        overrides["dt_s"] = args.dt_us * 1e-6
    if args.seed is not None:
        overrides["seed"] = args.seed
    return load_config(args.config, args.preset, overrides)


def cmd_simulate(args) -> int:
    run = _runconfig_from_args(args)
    tel = engine.run_episode(run.actuator, run.waveform, run.environment,
                             duration=run.duration_s, dt=run.dt_s, log_hz=run.log_hz)
    os.makedirs(args.out, exist_ok=True)
    tel.to_csv(os.path.join(args.out, "telemetry.csv"))
    summary = tel.summary()
    write_json(summary, os.path.join(args.out, "summary.json"))
    vel = engine.average_velocity(tel)
    print(f"velocity: {fmt(vel.mm_s)} mm/s ({fmt(vel.bl_s)} BL/s) over {fmt(tel.duration)} s")
    print(f"kernel: {engine.kernel_name()}; outputs in {args.out}")
    return EXIT_OK


def cmd_stride(args) -> int:
    run = _runconfig_from_args(args)
    duration = args.cycles * run.waveform.period_s
    tel = engine.run_episode(run.actuator, run.waveform, run.environment,
                             duration=duration, dt=run.dt_s, log_hz=run.log_hz)
    rep = engine.stride_per_cycle(tel)
    print("per-cycle strides (mm):", ", ".join(fmt(s) for s in rep.per_cycle_mm))
    print(f"steady stride: {fmt(rep.steady_mm)} mm")
    os.makedirs(args.out, exist_ok=True)
    write_json({"per_cycle_mm": rep.per_cycle_mm, "steady_mm": rep.steady_mm},
               os.path.join(args.out, "stride.json"))
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.spec in ("pattern", "design", "acceptance"):
        spec_path = _bundled_path(f"{args.spec}_sweep.json")
    else:
        spec_path = args.spec
    spec = calibration.SweepSpec.from_dict(load_json(spec_path))
    base = ActuatorConfig.from_dict(load_json(args.config).get("actuator", {})) \
        if args.config else ActuatorConfig()
    rows = calibration.grid_sweep(spec, base, jobs=args.jobs)
    os.makedirs(os.path.dirname(os.path.abspath(args.table)), exist_ok=True)
    calibration.write_sweep_csv(rows, args.table)
    bad = sum(1 for r in rows if not r.get("ok", True))
    print(f"{len(rows)} rows -> {args.table}" + (f" ({bad} flagged)" if bad else ""))
    return EXIT_OK


def cmd_trend_check(args) -> int:
    rows = calibration.read_sweep_csv(args.table)
    trends = None
    if args.trends and args.trends != "default":
        trends = load_json(args.trends)
    reports = calibration.trend_check(rows, trends)
    failed = [r for r in reports if not r.passed]
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.details}")
    if args.out:
        write_json([dataclasses.asdict(r) for r in reports], args.out)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_calibrate(args) -> int:
    dataset = calibration.load_dataset(args.dataset)
    init = ActuatorConfig.from_dict(load_json(args.config).get("actuator", {})) \
        if args.config else ActuatorConfig()
    fit = calibration.calibrate(
        dataset,
        init=init,
        seed=args.seed,
        restarts=args.restarts,
        max_evals_per_restart=args.max_evals,
        verbose=args.verbose,
    )
    report = fit.to_dict()
    report["points"] = [
        {"observable": p.observable, "source": p.source, "value": v, "residual": r}
        for p, v, r in zip(dataset, fit.values, fit.residuals)
    ]
    write_json(report, args.fit_out)
    print(f"weighted RMS relative error: {fmt(fit.rms)} ({fit.evaluations} evaluations)")
    print(f"fit report -> {args.fit_out}")
    return EXIT_OK


def cmd_recommend(args) -> int:
    rows = calibration.read_sweep_csv(args.table)
    recs = calibration.recommend_pattern(rows, stability_weight=args.stability_weight)
    for r in recs:
        print(f"{fmt(r.amplitude_kv)} kV, ZT {fmt(r.zt_ms)} ms -> RT {fmt(r.rt_ms)} ms "
              f"({fmt(r.velocity_mm_s)} mm/s)")
    if args.out:
        write_json([dataclasses.asdict(r) for r in recs], args.out)
    return EXIT_OK


def cmd_scenario(args) -> int:
    sc = planar.Scenario.bundled("winding_gap") if args.scenario == "winding-gap" \
        else planar.Scenario.load(args.scenario)
    if args.script == "winding-gap":
        script = planar.bundled_script("winding_gap_script")
    else:
        script = planar.load_command_script(args.script)
    if args.speed_table:
        table = load_json(args.speed_table)
    else:
        table = json.loads(resources.files("efkesim.data").joinpath("speed_table.json").read_text())
    duration = args.duration if args.duration else (script[-1][0] + 10.0 if script else 10.0)
    res = planar.run_scenario(sc, script, table, duration=duration, dt=args.dt)
    os.makedirs(args.out, exist_ok=True)
    res.to_csv(os.path.join(args.out, "trajectory.csv"))
    write_json({"goal_reached": res.goal_reached, "goal_time_s": res.goal_time_s},
               os.path.join(args.out, "scenario_summary.json"))
    print(f"goal_reached: {res.goal_reached}"
          + (f" at {fmt(res.goal_time_s)} s" if res.goal_reached else ""))
    return EXIT_OK if res.goal_reached or not sc.goal else EXIT_CHECK_FAILED


def cmd_teleop_serve(args) -> int:
    from . import teleop

    sc = planar.Scenario.bundled("winding_gap") if args.scenario == "winding-gap" \
        else planar.Scenario.load(args.scenario)
    teleop.serve_forever(
        scenario=sc,
        port=args.port,
        host=args.host,
        real_time_factor=args.rtf,
        serve_ui=args.serve_ui,
    )
    return EXIT_OK


def cmd_presets(_args) -> int:
    for name, w in sorted(PRESETS.items()):
        print(f"{name}: {fmt(w.amplitude_kv)} kV, ZT {fmt(w.zt_ms)} ms, RT {fmt(w.rt_ms)} ms, "
              f"{w.polarity_mode}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="efkesim",
        description="Electrohydraulic crawling-robot simulator and calibration toolkit",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one locomotion episode")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stride", help="measure per-cycle stride")
    _add_common(p)
    p.add_argument("--cycles", type=int, default=3)
    p.set_defaults(func=cmd_stride)

    p = sub.add_parser("sweep", help="grid sweep over patterns/design parameters")
    p.add_argument("--spec", required=True,
                   help="sweep spec JSON path, or bundled name: pattern|design|acceptance")
    p.add_argument("--config", help="base actuator config JSON")
    p.add_argument("--table", default="sweep.csv", help="output CSV")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trend-check", help="verify qualitative trends on a sweep table")
    p.add_argument("--table", required=True)
    p.add_argument("--trends", default="default", help="'default' or a trend spec JSON")
    p.add_argument("--out", help="write JSON report here")
    p.set_defaults(func=cmd_trend_check)

    p = sub.add_parser("calibrate", help="fit model parameters to the measurement dataset")
    p.add_argument("--dataset", help="dataset JSON (bundled measurements when omitted)")
    p.add_argument("--config", help="initial actuator config JSON")
    p.add_argument("--fit-out", default="fit.json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-evals", type=int, default=400)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("recommend", help="recommend operating patterns from a sweep table")
    p.add_argument("--table", required=True)
    p.add_argument("--stability-weight", type=float, default=0.3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("scenario", help="run a planar navigation scenario")
    p.add_argument("--scenario", default="winding-gap",
                   help="scenario JSON path or 'winding-gap'")
    p.add_argument("--script", default="winding-gap",
                   help="command script CSV path or 'winding-gap'")
    p.add_argument("--speed-table", help="per-direction speed JSON")
    p.add_argument("--duration", type=float)
    p.add_argument("--dt", type=float, default=0.02)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("teleop-serve", help="serve the live teleoperation bridge")
    p.add_argument("--scenario", default="winding-gap")
    p.add_argument("--port", type=int, default=8471)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--rtf", type=float, default=1.0, help="real-time factor")
    p.add_argument("--serve-ui", action="store_true", help="also serve the browser client")
    p.set_defaults(func=cmd_teleop_serve)

    p = sub.add_parser("presets", help="list bundled waveform presets")
    p.set_defaults(func=cmd_presets)
    return ap


def dispatch(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("EFKE_LOG", "WARNING").upper())
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
