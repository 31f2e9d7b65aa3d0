"""Grid sweeps, trend verification and derivative-free model calibration.

The bundled measurement dataset transcribes the bench values the model is
fitted to; each point carries a human-readable source note.  Residuals
are relative (targets span two orders of magnitude), inequality targets
contribute hinge loss, and yaw targets are closed-form solvable by the
planar sub-fit so they only penalise configurations whose straight-line
speed is too low to realise the measured turn rates.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.optimize import minimize

from . import engine
from .config import ActuatorConfig, ConfigError, Environment
from .physics import NumericError
from .waveform import HvWaveform

YAW_TRACK_WIDTH_MM = 100.0  # two 50 mm robots joined side by side

# Free parameters of the default fit; everything else (geometry, masses,
# dielectric constants) stays at its configured value.
DEFAULT_FREE_PARAMS = (
    "mu_static",
    "mu_dynamic",
    "coupling_efficiency",
    "slug_fraction",
    "reflux_coefficient",
    "slug_damping",
    "residual_tau0_ms",
    "residual_voltage_exponent",
)

DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "mu_static": (0.02, 0.9),
    "mu_dynamic": (0.001, 0.6),
    "coupling_efficiency": (0.05, 1.0),
    "slug_fraction": (0.02, 0.95),
    "reflux_coefficient": (0.002, 2.0),
    "slug_damping": (0.002, 2.0),
    "residual_tau0_ms": (1.0, 200.0),
    "residual_voltage_exponent": (0.0, 30.0),
}

# positive scale parameters are searched in log space
_LOG_PARAMS = {
    "mu_static",
    "mu_dynamic",
    "coupling_efficiency",
    "slug_fraction",
    "reflux_coefficient",
    "slug_damping",
    "residual_tau0_ms",
}


@dataclass(frozen=True)
class DataPoint:
    """One measured observable with an equality or inequality target."""

    observable: str  # velocity_mm_s | stride_mm | yaw_deg_s
    weight: float
    source: str
    target: float | None = None
    lower: float | None = None
    upper: float | None = None
    config: dict = field(default_factory=dict)
    waveform: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.observable not in ("velocity_mm_s", "stride_mm", "yaw_deg_s"):
            raise ConfigError(f"unknown observable {self.observable!r}")
        if not self.weight > 0:
            raise ConfigError("dataset point weight must be > 0")
        if not self.source:
            raise ConfigError("dataset point must carry a source note")
        if self.target is None and self.lower is None and self.upper is None:
            raise ConfigError("dataset point needs a target or a bound")

    def residual(self, value: float) -> float:
        """Relative residual; 0 inside an inequality/interval target."""
        if self.target is not None:
            return (value - self.target) / self.target
        if self.lower is not None and value < self.lower:
            return (value - self.lower) / self.lower
        if self.upper is not None and value > self.upper:
            scale = self.upper if self.upper != 0 else 1.0
            return (value - self.upper) / scale
        return 0.0


def load_dataset(path: str | None = None) -> list[DataPoint]:
    """Load a dataset file; the bundled measurement set when path is None."""
    if path is None:
        text = resources.files("efkesim.data").joinpath("measurements.json").read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    raw = json.loads(text)
    return [DataPoint(**row) for row in raw]


def _apply_overrides(base: ActuatorConfig, overrides: dict) -> ActuatorConfig:
    ov = dict(overrides)
    kwargs = {}
    for key in ("electrode_length_mm", "oil_volume_ml"):
        if key in ov:
            kwargs[key] = ov.pop(key)
    return base.variant(**kwargs, **ov)


def _waveform_for(point: DataPoint) -> HvWaveform:
    wf = {"amplitude_kv": 5.0, "zt_ms": 20.0, "rt_ms": 80.0}
    wf.update(point.waveform)
    return HvWaveform.from_dict(wf)


@dataclass
class EpisodeCache:
    """Per-parameter-vector cache: dataset rows often share an episode."""

    hits: int = 0
    misses: int = 0
    store: dict = field(default_factory=dict)

    def run(self, cfg: ActuatorConfig, w: HvWaveform, env: Environment, duration: float,
            dt: float):
        key = (
            hashlib.sha1(
                json.dumps(
                    [cfg.to_dict(), w.to_dict(), env.to_dict(), duration, dt], sort_keys=True
                ).encode()
            ).hexdigest()
        )
        if key in self.store:
            self.hits += 1
            return self.store[key]
        self.misses += 1
        tel = engine.run_episode(cfg, w, env, duration=duration, dt=dt)
        self.store[key] = tel
        return tel


def solve_turning(v_active_mm_s: float, right_turn_deg_s: float, left_turn_deg_s: float,
                  track_width_mm: float = YAW_TRACK_WIDTH_MM) -> dict:
    """Closed-form planar sub-fit for the dual-robot turn rates.

    Driving one side while the other is dragged passively yields
    |yaw| = v_active * (1 - drag_ratio) / track_width.  The drag ratio is
    solved from the left-active (right-turn) rate and the per-side speed
    asymmetry from the right-active rate; both targets are matched exactly
    whenever the straight-line speed is fast enough.
    """
    w_m = track_width_mm * 1e-3
    v_act = v_active_mm_s * 1e-3
    omega_right = math.radians(right_turn_deg_s)
    omega_left = math.radians(left_turn_deg_s)
    feasible = v_act > 0 and omega_right * w_m < v_act
    drag_ratio = 1.0 - omega_right * w_m / v_act if feasible else 0.0
    drag_ratio = min(max(drag_ratio, 0.0), 1.0)
    right_side_factor = omega_left / omega_right if omega_right > 0 else 1.0
    achieved_right = v_act * (1.0 - drag_ratio) / w_m
    achieved_left = achieved_right * right_side_factor
    return {
        "track_width_mm": track_width_mm,
        "passive_drag_ratio": drag_ratio,
        "right_side_factor": right_side_factor,
        "active_speed_mm_s": v_active_mm_s,
        "yaw_right_deg_s": math.degrees(achieved_right),
        "yaw_left_deg_s": math.degrees(achieved_left),
        "feasible": feasible,
    }


def evaluate_dataset(
    dataset: list[DataPoint],
    config: ActuatorConfig,
    dt: float = engine.DT_DEFAULT,
    velocity_duration: float = 5.0,
    stride_cycles: int = 3,
) -> tuple[list[float], list[float]]:
    """Model observables and relative residuals for every dataset point."""
    cache = EpisodeCache()
    values: list[float] = []
    residuals: list[float] = []

    # straight-line speed of the default build, for the yaw sub-fit
    yaw_rows = [p for p in dataset if p.observable == "yaw_deg_s"]
    v_active = None
    if yaw_rows:
        w = HvWaveform(5.0, 20.0, 80.0)
        tel = cache.run(config, w, Environment(), velocity_duration, dt)
        v_active = engine.average_velocity(tel).mm_s

    for p in dataset:
        cfg = _apply_overrides(config, p.config)
        env = Environment.from_dict(p.environment) if p.environment else Environment()
        w = _waveform_for(p)
        if p.observable == "velocity_mm_s":
            tel = cache.run(cfg, w, env, velocity_duration, dt)
            value = engine.average_velocity(tel).mm_s
        elif p.observable == "stride_mm":
            duration = stride_cycles * w.period_s
            tel = cache.run(cfg, w, env, duration, dt)
            value = engine.stride_per_cycle(tel).steady_mm
        else:  # yaw_deg_s
            side = p.extra.get("active_side", "left")
            sol = solve_turning(
                v_active if v_active is not None else 0.0,
                right_turn_deg_s=_yaw_target(dataset, "left"),
                left_turn_deg_s=_yaw_target(dataset, "right"),
            )
            value = sol["yaw_right_deg_s"] if side == "left" else sol["yaw_left_deg_s"]
        values.append(value)
        residuals.append(p.residual(value))
    return values, residuals


def _yaw_target(dataset: list[DataPoint], side: str) -> float:
    for p in dataset:
        if p.observable == "yaw_deg_s" and p.extra.get("active_side") == side:
            return float(p.target)
    return 3.0


def weighted_rms(dataset: list[DataPoint], residuals: list[float]) -> float:
    num = sum(p.weight * r * r for p, r in zip(dataset, residuals))
    den = sum(p.weight for p in dataset)
    return math.sqrt(num / den)


@dataclass
class FitResult:
    parameters: dict[str, float]
    residuals: list[float]
    values: list[float]
    rms: float
    evaluations: int
    restarts: int
    converged: bool
    history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "parameters": self.parameters,
            "residuals": self.residuals,
            "values": self.values,
            "weighted_rms": self.rms,
            "evaluations": self.evaluations,
            "restarts": self.restarts,
            "converged": self.converged,
        }


def _to_internal(name: str, x: float) -> float:
    return math.log10(x) if name in _LOG_PARAMS else x


def _from_internal(name: str, z: float) -> float:
    return 10.0**z if name in _LOG_PARAMS else z


def calibrate(
    dataset: list[DataPoint],
    free_params: tuple[str, ...] = DEFAULT_FREE_PARAMS,
    bounds: dict[str, tuple[float, float]] | None = None,
    init: ActuatorConfig | None = None,
    seed: int = 0,
    restarts: int = 5,
    max_evals_per_restart: int = 400,
    dt: float = engine.DT_DEFAULT,
    velocity_duration: float = 5.0,
    verbose: bool = False,
) -> FitResult:
    """Fit the free parameters to the dataset with restarted Nelder-Mead.

    Scale-like parameters are searched in log space.  Deterministic for a
    given seed; returns the best point ever evaluated, which is never
    worse than the initial point.
    """
    if not dataset:
        raise ConfigError("dataset is empty")
    if not free_params:
        raise ConfigError("free parameter set is empty")
    bounds = dict(DEFAULT_BOUNDS if bounds is None else bounds)
    base = init or ActuatorConfig()
    for name in free_params:
        lo, hi = bounds[name]
        x0 = getattr(base, name)
        if not lo <= x0 <= hi:
            raise ConfigError(f"init value {name}={x0} outside bounds [{lo}, {hi}]")

    z_bounds = [
        (_to_internal(n, bounds[n][0]), _to_internal(n, bounds[n][1])) for n in free_params
    ]
    z0 = np.array([_to_internal(n, getattr(base, n)) for n in free_params])

    best = {"z": z0.copy(), "f": math.inf, "evals": 0}

    def config_for(z: np.ndarray) -> ActuatorConfig:
        vals = {}
        for name, (lo, hi), zi in zip(free_params, z_bounds, z):
            zi = min(max(zi, lo), hi)
            vals[name] = _from_internal(name, zi)
        if "mu_static" in vals or "mu_dynamic" in vals:
            mu_d = vals.get("mu_dynamic", base.mu_dynamic)
            mu_s = vals.get("mu_static", base.mu_static)
            if mu_s < mu_d:
                vals["mu_static"] = mu_d  # keep the stick threshold physical
        return base.replaced(**vals)

    def objective(z: np.ndarray) -> float:
        cfg = config_for(z)
        try:
            _, residuals = evaluate_dataset(dataset, cfg, dt=dt,
                                            velocity_duration=velocity_duration)
        except (NumericError, ConfigError):
            return 1e6
        f = weighted_rms(dataset, residuals)
        best["evals"] += 1
        if f < best["f"]:
            best["f"] = f
            best["z"] = np.array(z, dtype=float)
            if verbose:
                print(f"  eval {best['evals']}: rms={f:.4f}")
        return f

    objective(z0)
    rng = np.random.default_rng(seed)
    converged = False
    for r in range(restarts):
        if r == 0:
            start = z0
        else:
            width = np.array([hi - lo for lo, hi in z_bounds])
            start = best["z"] + rng.uniform(-0.1, 0.1, len(z0)) * width
            start = np.clip(start, [lo for lo, _ in z_bounds], [hi for _, hi in z_bounds])
        res = minimize(
            objective,
            start,
            method="Nelder-Mead",
            bounds=z_bounds,
            options={
                "maxfev": max_evals_per_restart,
                "xatol": 1e-3,
                "fatol": 1e-4,
                "adaptive": True,
            },
        )
        converged = converged or bool(res.success)

    cfg = config_for(best["z"])
    values, residuals = evaluate_dataset(dataset, cfg, dt=dt,
                                         velocity_duration=velocity_duration)
    params = {n: getattr(cfg, n) for n in free_params}
    return FitResult(
        parameters=params,
        residuals=residuals,
        values=values,
        rms=weighted_rms(dataset, residuals),
        evaluations=best["evals"],
        restarts=restarts,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# grid sweeps

SWEEP_AXES = ("amplitude_kv", "zt_ms", "rt_ms", "electrode_length_mm", "oil_volume_ml")


@dataclass(frozen=True)
class SweepSpec:
    axes: dict[str, list[float]]
    duration_s: float = 5.0
    dt_s: float = engine.DT_DEFAULT
    base_config: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.axes:
            raise ConfigError("sweep spec needs at least one axis")
        for name, values in self.axes.items():
            if name not in SWEEP_AXES:
                raise ConfigError(f"unknown sweep axis {name!r}; allowed: {SWEEP_AXES}")
            if not values:
                raise ConfigError(f"sweep axis {name} has no values")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        known = {"axes", "duration_s", "dt_s", "base_config"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown sweep spec key(s): {sorted(unknown)}")
        return cls(
            axes=data["axes"],
            duration_s=data.get("duration_s", 5.0),
            dt_s=data.get("dt_s", engine.DT_DEFAULT),
            base_config=data.get("base_config", {}),
        )

    def points(self) -> list[dict]:
        """Cartesian grid in canonical axis order (declaration order irrelevant)."""
        names = [n for n in SWEEP_AXES if n in self.axes]
        pts: list[dict] = [{}]
        for n in names:
            pts = [dict(p, **{n: v}) for p in pts for v in self.axes[n]]
        return pts


def _sweep_row(args) -> dict:
    spec_dict, base_dict, point = args
    base = ActuatorConfig.from_dict(base_dict)
    row = dict(point)
    try:
        cfg = _apply_overrides(
            base,
            {k: v for k, v in point.items() if k in ("electrode_length_mm", "oil_volume_ml")},
        )
        w = HvWaveform(
            amplitude_kv=point.get("amplitude_kv", 5.0),
            zt_ms=point.get("zt_ms", 20.0),
            rt_ms=point.get("rt_ms", 80.0),
        )
        tel = engine.run_episode(
            cfg, w, Environment(), duration=spec_dict["duration_s"], dt=spec_dict["dt_s"]
        )
        vel = engine.average_velocity(tel)
        row["velocity_mm_s"] = vel.mm_s
        row["bl_s"] = vel.bl_s
        try:
            row["stride_mm"] = engine.stride_per_cycle(tel).steady_mm
        except ConfigError:
            row["stride_mm"] = float("nan")
        row["ok"] = True
    except (NumericError, ConfigError) as exc:
        row["velocity_mm_s"] = float("nan")
        row["bl_s"] = float("nan")
        row["stride_mm"] = float("nan")
        row["ok"] = False
        row["error"] = str(exc)
    return row


def grid_sweep(spec: SweepSpec, config: ActuatorConfig | None = None, jobs: int = 1) -> list[dict]:
    """One episode per grid point; rows come back in canonical order."""
    base = _apply_overrides(config or ActuatorConfig(), spec.base_config)
    points = spec.points()
    spec_dict = {"duration_s": spec.duration_s, "dt_s": spec.dt_s}
    args = [(spec_dict, base.to_dict(), p) for p in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, args, chunksize=4))
    else:
        rows = [_sweep_row(a) for a in args]
    names = [n for n in SWEEP_AXES if n in spec.axes]
    rows.sort(key=lambda r: tuple(r[n] for n in names))
    return rows


SWEEP_COLUMNS = list(SWEEP_AXES) + ["velocity_mm_s", "stride_mm", "bl_s", "ok"]


def write_sweep_csv(rows: list[dict], path: str) -> None:
    from .cli import fmt

    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for r in rows:
            cells = []
            for c in SWEEP_COLUMNS:
                v = r.get(c, "")
                if isinstance(v, bool):
                    cells.append("1" if v else "0")
                elif isinstance(v, float) and math.isnan(v):
                    cells.append("nan")
                elif isinstance(v, (int, float)):
                    cells.append(fmt(v))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


def read_sweep_csv(path: str) -> list[dict]:
    import csv as _csv

    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in _csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                if v is None or v == "":
                    continue
                if k == "ok":
                    row[k] = v in ("1", "True", "true")
                else:
                    try:
                        row[k] = float(v)
                    except ValueError:
                        row[k] = v
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# trend checks

@dataclass(frozen=True)
class TrendReport:
    name: str
    passed: bool
    details: str


def _groups(rows, keys):
    out: dict[tuple, list[dict]] = {}
    for r in rows:
        if not r.get("ok", True):
            continue
        k = tuple(r.get(x) for x in keys)
        out.setdefault(k, []).append(r)
    return out


def check_rise_then_fall(rows: list[dict], axis: str = "rt_ms",
                         group_by: tuple[str, ...] = ("zt_ms", "amplitude_kv"),
                         metric: str = "velocity_mm_s") -> list[TrendReport]:
    """Interior peak along `axis` for every group: the curve's maximum must
    strictly exceed both endpoint values."""
    groups = _groups(rows, group_by)
    if not groups:
        raise ConfigError(f"table has no usable rows grouped by {group_by}")
    reports = []
    for key, grp in sorted(groups.items()):
        grp = sorted(grp, key=lambda r: r[axis])
        if len(grp) < 3:
            raise ConfigError(
                f"group {dict(zip(group_by, key))} has {len(grp)} points on {axis}; need >= 3"
            )
        vals = [r[metric] for r in grp]
        peak = max(vals)
        i_peak = vals.index(peak)
        ok = peak > vals[0] and peak > vals[-1] and 0 < i_peak < len(vals) - 1
        label = ", ".join(f"{k}={v:g}" for k, v in zip(group_by, key))
        reports.append(
            TrendReport(
                name=f"rise-then-fall[{label}]",
                passed=ok,
                details=(
                    f"peak {peak:.3f} at {axis}={grp[i_peak][axis]:g} "
                    f"(ends {vals[0]:.3f} / {vals[-1]:.3f})"
                ),
            )
        )
    return reports


def check_plateau(rows: list[dict], group: dict, axis: str = "rt_ms",
                  metric: str = "velocity_mm_s", window: int = 4,
                  rel_tol: float = 0.25) -> TrendReport:
    """Some `window` consecutive points vary less than rel_tol of their mean."""
    sel = [r for r in rows if r.get("ok", True) and all(r.get(k) == v for k, v in group.items())]
    sel.sort(key=lambda r: r[axis])
    if len(sel) < window:
        raise ConfigError(f"group {group} has {len(sel)} points; plateau window is {window}")
    found = False
    detail = ""
    for i in range(len(sel) - window + 1):
        vals = [r[metric] for r in sel[i : i + window]]
        mean = sum(vals) / window
        if mean > 0 and (max(vals) - min(vals)) / mean < rel_tol:
            found = True
            detail = f"window at {axis}={sel[i][axis]:g}..{sel[i + window - 1][axis]:g}"
            break
    return TrendReport(name=f"plateau{group}", passed=found, details=detail or "no stable window")


def check_dominance(rows: list[dict], metric: str = "velocity_mm_s") -> TrendReport:
    """Best 25 mm electrode velocity strictly above best 15 mm velocity."""
    best = {}
    for r in rows:
        if not r.get("ok", True) or "electrode_length_mm" not in r:
            continue
        e = r["electrode_length_mm"]
        best[e] = max(best.get(e, -math.inf), r[metric])
    for e in (15.0, 25.0):
        if e not in best:
            raise ConfigError(f"table lacks electrode_length_mm={e} rows")
    ok = best[25.0] > best[15.0]
    return TrendReport(
        name="25mm-dominates-15mm",
        passed=ok,
        details=f"best(25mm)={best[25.0]:.2f} vs best(15mm)={best[15.0]:.2f} mm/s",
    )


def check_small_volume_weakness(rows: list[dict], threshold_mm_s: float = 2.0) -> TrendReport:
    """Every 15 mm electrode row under 7 mL stays below the threshold."""
    sel = [
        r
        for r in rows
        if r.get("ok", True)
        and r.get("electrode_length_mm") == 15.0
        and r.get("oil_volume_ml", 99.0) < 7.0
    ]
    if not sel:
        raise ConfigError("table lacks 15 mm electrode rows with oil_volume_ml < 7")
    bad = [r for r in sel if r["velocity_mm_s"] >= threshold_mm_s]
    worst = max(r["velocity_mm_s"] for r in sel)
    return TrendReport(
        name="15mm-small-volume-slow",
        passed=not bad,
        details=f"max velocity {worst:.2f} mm/s over {len(sel)} rows (limit {threshold_mm_s})",
    )


def trend_check(rows: list[dict], trends: list[dict] | None = None) -> list[TrendReport]:
    """Run a trend suite against a sweep table.

    With no explicit suite, the checks applicable to the table's varying
    axes are selected automatically."""
    if trends is None:
        trends = default_trends(rows)
    reports: list[TrendReport] = []
    for spec in trends:
        kind = spec.get("kind")
        if kind == "rise_then_fall":
            reports.extend(
                check_rise_then_fall(
                    rows,
                    axis=spec.get("axis", "rt_ms"),
                    group_by=tuple(spec.get("group_by", ("zt_ms", "amplitude_kv"))),
                )
            )
        elif kind == "plateau":
            reports.append(
                check_plateau(
                    rows,
                    group=spec["group"],
                    window=spec.get("window", 4),
                    rel_tol=spec.get("rel_tol", 0.25),
                )
            )
        elif kind == "dominance":
            reports.append(check_dominance(rows))
        elif kind == "small_volume_weakness":
            reports.append(check_small_volume_weakness(rows, spec.get("threshold_mm_s", 2.0)))
        else:
            raise ConfigError(f"unknown trend kind {kind!r}")
    return reports


def default_trends(rows: list[dict] | None = None) -> list[dict]:
    if rows is None:
        return [
            {"kind": "rise_then_fall", "axis": "rt_ms", "group_by": ["zt_ms", "amplitude_kv"]},
            {"kind": "dominance"},
            {"kind": "small_volume_weakness", "threshold_mm_s": 2.0},
        ]
    varying = {a for a in SWEEP_AXES if len({r.get(a) for r in rows if a in r}) > 1}
    trends: list[dict] = []
    if len({r.get("rt_ms") for r in rows if "rt_ms" in r}) >= 5:
        gb = [a for a in ("zt_ms", "amplitude_kv", "electrode_length_mm", "oil_volume_ml")
              if a in varying]
        trends.append({"kind": "rise_then_fall", "axis": "rt_ms", "group_by": gb or ["zt_ms"]})
    if "electrode_length_mm" in varying:
        trends.append({"kind": "dominance"})
        if "oil_volume_ml" in varying:
            trends.append({"kind": "small_volume_weakness", "threshold_mm_s": 2.0})
    if not trends:
        raise ConfigError("table has no varying axis any bundled trend applies to")
    return trends


# ---------------------------------------------------------------------------
# pattern recommendation

@dataclass(frozen=True)
class Recommendation:
    amplitude_kv: float
    zt_ms: float
    rt_ms: float
    velocity_mm_s: float
    score: float


def recommend_pattern(rows: list[dict], stability_weight: float = 0.3) -> list[Recommendation]:
    """Best release time per (amplitude, zipping time).

    Score is velocity minus `stability_weight` times the local variation
    (half the velocity range over the point and its axis neighbours);
    ties break towards the longer release time.
    """
    groups = _groups(rows, ("amplitude_kv", "zt_ms"))
    recs = []
    for (amp, zt), grp in sorted(groups.items()):
        grp = sorted(grp, key=lambda r: r["rt_ms"])
        if len(grp) < 2:
            continue
        best = None
        for i, r in enumerate(grp):
            lo = max(0, i - 1)
            hi = min(len(grp), i + 2)
            neigh = [g["velocity_mm_s"] for g in grp[lo:hi]]
            variation = 0.5 * (max(neigh) - min(neigh))
            score = r["velocity_mm_s"] - stability_weight * variation
            if best is None or score > best[0] or (score == best[0] and r["rt_ms"] > best[1]):
                best = (score, r["rt_ms"], r["velocity_mm_s"])
        recs.append(
            Recommendation(
                amplitude_kv=amp, zt_ms=zt, rt_ms=best[1], velocity_mm_s=best[2], score=best[0]
            )
        )
    return recs
