"""Deterministic episode integration and measurement protocols.

Episodes use semi-implicit Euler with steps aligned to every waveform
edge, so duty-cycle arithmetic is exact.  The inner loop runs in the
compiled kernel when available and falls back to the bit-identical
pure-Python kernel otherwise; set ``EFKESIM_KERNEL=pure`` or
``=compiled`` to force one.

Numerical bookkeeping notes: end-stop spring and damper work are both
accumulated into the viscous bucket (the spring stores at most a few
nano-joule transiently, and nothing at episode end unless the slug is
parked against a stop under drive).  The friction bucket claims the
residual impulse of the body update, so the energy audit closes to
rounding error on every episode regardless of stick/slip transitions.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernel_py
from .config import (
    ActuatorConfig,
    ConfigError,
    Environment,
    drag_area_m2,
    normal_force,
)
from .physics import NumericError, SimState, residual_time_constant
from .waveform import HvWaveform

DT_DEFAULT = 10e-6
DT_CAP = 1e-4
LOG_HZ_DEFAULT = 1000.0

_FORCED = os.environ.get("EFKESIM_KERNEL", "").strip().lower()
if _FORCED == "pure":
    _kernel = _kernel_py
elif _FORCED == "compiled":
    from . import _kernel  # type: ignore[attr-defined]
else:
    try:
        from . import _kernel  # type: ignore[attr-defined]
    except ImportError:
        _kernel = _kernel_py


def kernel_name() -> str:
    """Which integration kernel is active ('compiled' or 'pure-python')."""
    return _kernel.IMPL


@dataclass
class Telemetry:
    """Uniformly sampled episode record plus cycle markers and energy counters."""

    t: np.ndarray
    x_body: np.ndarray
    v_body: np.ndarray
    s_slug: np.ndarray
    v_slug: np.ndarray
    voltage: np.ndarray
    q_residual: np.ndarray
    rising_edge_t: np.ndarray
    rising_edge_x: np.ndarray
    energy: dict[str, float]
    config: ActuatorConfig
    waveform: HvWaveform
    environment: Environment
    duration_s: float
    dt_s: float
    final_state: SimState = field(repr=False, default=None)  # type: ignore[assignment]

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def net_displacement_m(self) -> float:
        return float(self.x_body[-1] - self.x_body[0])

    def to_csv(self, path: str) -> None:
        from .cli import fmt  # shared 9-significant-digit formatting

        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("t_s,x_body_mm,v_body_mm_s,s_slug_mm,v_slug_mm_s,voltage_v,q_residual\n")
            for i in range(len(self.t)):
                row = (
                    self.t[i],
                    self.x_body[i] * 1e3,
                    self.v_body[i] * 1e3,
                    self.s_slug[i] * 1e3,
                    self.v_slug[i] * 1e3,
                    self.voltage[i],
                    self.q_residual[i],
                )
                fh.write(",".join(fmt(v) for v in row) + "\n")

    def summary(self) -> dict:
        vel = average_velocity(self)
        out = {
            "velocity_mm_s": vel.mm_s,
            "velocity_bl_s": vel.bl_s,
            "net_displacement_mm": self.net_displacement_m * 1e3,
            "duration_s": self.duration,
            "dt_us": self.dt_s * 1e6,
            "kernel": kernel_name(),
            "waveform": self.waveform.to_dict(),
            "environment": self.environment.to_dict(),
            "energy": energy_audit(self),
        }
        try:
            strides = stride_per_cycle(self)
            out["stride_mm"] = strides.steady_mm
            out["cycles"] = len(strides.per_cycle_mm)
        except ConfigError:
            pass
        return out


def _pack_config(config: ActuatorConfig, env: Environment) -> np.ndarray:
    s_max = config.s_max_m
    return np.array(
        [
            config.slug_mass_kg,
            config.body_mass_kg + env.payload_mass_g * 1e-3,
            s_max,
            config.actuation_coeff,
            config.slug_damping,
            config.reflux_coefficient * config.slug_mass_kg * config.gravity / s_max,
            config.residual_hold_gain,
            config.endstop_stiffness,
            config.endstop_damping,
            config.mu_static,
            config.mu_dynamic,
            normal_force(config, env),
            1e-6,
            0.5 * env.fluid_density_kg_m3 * env.drag_coefficient * drag_area_m2(config),
            -0.01 * s_max,
            1.01 * s_max,
            config.drive_stroke_m,
            config.slug_damping_quadratic,
        ],
        dtype=np.float64,
    )


def _interval_tables(w: HvWaveform, duration: float):
    """Edge-aligned interval boundaries plus per-interval drive metadata.

    Built constructively from the pulse enumeration (never by re-sampling
    the waveform at a boundary), so float wobble in k*period arithmetic
    cannot misclassify an interval.  Boundary times match
    ``schedule_edges`` bit for bit.
    """
    period = w.period_s
    amp_on = 1 if w.amplitude_kv > 0 else 0
    # event: [time, is_rising, is_falling, pulse index]
    events: list[list] = []
    k = 0
    while True:
        rise = k * period
        if rise > duration:
            break
        events.append([rise, 1, 1 if (k > 0 and w.rt_ms == 0) else 0, k])
        if w.rt_ms > 0:
            fall = rise + w.zt_s
            if fall <= duration:
                events.append([fall, 0, 1, k])
        k += 1
    if events[-1][0] < duration:
        events.append([duration, 0, 0, k])

    bounds = np.array([e[0] for e in events], dtype=np.float64)
    n = len(bounds) - 1
    volts = np.zeros(n, dtype=np.float64)
    ons = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        if events[i][1]:  # interval starts at a pulse start: HV on
            kk = events[i][3]
            if w.alternating:
                sign = w.start_polarity if kk % 2 == 0 else -w.start_polarity
            else:
                sign = 1
            volts[i] = w.amplitude_v * sign
            ons[i] = amp_on
    risings = np.array([e[1] for e in events], dtype=np.uint8)
    fallings = np.array([e[2] for e in events], dtype=np.uint8)
    return bounds, volts, ons, risings, fallings


def run_episode(
    config: ActuatorConfig,
    waveform: HvWaveform,
    environment: Environment | None = None,
    duration: float = 5.0,
    dt: float = DT_DEFAULT,
    log_hz: float = LOG_HZ_DEFAULT,
    initial_state: SimState | None = None,
) -> Telemetry:
    """Integrate one episode; deterministic and bit-reproducible."""
    env = environment or Environment()
    if not duration > 0:
        raise ConfigError(f"duration must be > 0, got {duration}")
    if not 0 < dt <= DT_CAP:
        raise ConfigError(f"dt must be in (0, {DT_CAP}] s, got {dt}")
    config.validate()

    bounds, volts, ons, risings, fallings = _interval_tables(waveform, duration)
    tau = residual_time_constant(
        waveform.amplitude_v, waveform.zt_s, config, waveform.alternating
    )
    pcfg = _pack_config(config, env)

    st = initial_state or SimState()
    state = np.array(
        [st.t, st.x_body, st.v_body, st.s_slug, st.v_slug, st.q_residual, st.t_since_off,
         float(st.pulse_index)],
        dtype=np.float64,
    )
    st.check(config.s_max_m)
    log_dt = 1.0 / log_hz
    n_max = int(duration / max(log_dt, dt)) + 2 * len(bounds) + 16
    log_t = np.empty(n_max)
    log_x = np.empty(n_max)
    log_vb = np.empty(n_max)
    log_s = np.empty(n_max)
    log_vs = np.empty(n_max)
    log_volt = np.empty(n_max)
    log_q = np.empty(n_max)
    n_edges_max = int(np.sum(risings)) + 1
    edge_t = np.empty(n_edges_max)
    edge_x = np.empty(n_edges_max)
    energy = np.zeros(4)

    ke0 = 0.5 * config.slug_mass_kg * st.v_slug**2 + 0.5 * (
        config.body_mass_kg + env.payload_mass_g * 1e-3
    ) * st.v_body**2

    n_log, n_edge = _kernel.run_core(
        pcfg, bounds, volts, ons, risings, fallings, tau, dt, log_dt, state,
        log_t, log_x, log_vb, log_s, log_vs, log_volt, log_q, edge_t, edge_x, energy,
    )

    final = SimState(
        t=float(state[0]),
        x_body=float(state[1]),
        v_body=float(state[2]),
        s_slug=float(state[3]),
        v_slug=float(state[4]),
        q_residual=float(state[5]),
        t_since_off=float(state[6]),
        pulse_index=int(state[7]),
    )
    if not all(math.isfinite(v) for v in (final.x_body, final.v_body, final.s_slug, final.v_slug)):
        raise NumericError(f"non-finite state after episode: {final!r}")

    ke1 = 0.5 * config.slug_mass_kg * final.v_slug**2 + 0.5 * (
        config.body_mass_kg + env.payload_mass_g * 1e-3
    ) * final.v_body**2

    return Telemetry(
        t=log_t[:n_log].copy(),
        x_body=log_x[:n_log].copy(),
        v_body=log_vb[:n_log].copy(),
        s_slug=log_s[:n_log].copy(),
        v_slug=log_vs[:n_log].copy(),
        voltage=log_volt[:n_log].copy(),
        q_residual=log_q[:n_log].copy(),
        rising_edge_t=edge_t[:n_edge].copy(),
        rising_edge_x=edge_x[:n_edge].copy(),
        energy={
            "work_in": float(energy[0]),
            "friction_loss": float(energy[1]),
            "viscous_loss": float(energy[2]),
            "delta_pe": float(energy[3]),
            "delta_ke": float(ke1 - ke0),
        },
        config=config,
        waveform=waveform,
        environment=env,
        duration_s=duration,
        dt_s=dt,
        final_state=final,
    )


def step(
    state: SimState,
    dt: float,
    voltage: float,
    config: ActuatorConfig,
    environment: Environment | None = None,
    hv_on: bool | None = None,
    tau: float = 0.0,
) -> SimState:
    """Advance the model one step; exposed for tests and custom drivers.

    Runs the same kernel as :func:`run_episode` for a single step with a
    constant voltage.  ``hv_on`` defaults to ``voltage != 0``; ``tau`` is
    the residual decay constant active during off phases.
    """
    env = environment or Environment()
    if not 0 < dt <= DT_CAP:
        raise ConfigError(f"dt must be in (0, {DT_CAP}] s, got {dt}")
    config.validate()
    state.check(config.s_max_m)
    on = (voltage != 0.0) if hv_on is None else hv_on

    pcfg = _pack_config(config, env)
    bounds = np.array([state.t, state.t + dt])
    volts = np.array([voltage])
    ons = np.array([1 if on else 0], dtype=np.uint8)
    risings = np.zeros(2, dtype=np.uint8)
    fallings = np.zeros(2, dtype=np.uint8)
    vec = np.array(
        [state.t, state.x_body, state.v_body, state.s_slug, state.v_slug,
         state.q_residual, state.t_since_off, float(state.pulse_index)]
    )
    logs = [np.empty(8) for _ in range(7)]
    edge_scratch = [np.empty(1) for _ in range(2)]
    energy = np.zeros(4)
    _kernel.run_core(
        pcfg, bounds, volts, ons, risings, fallings, tau, dt, dt * 4.0, vec,
        *logs, *edge_scratch, energy,
    )
    out = SimState(
        t=float(vec[0]),
        x_body=float(vec[1]),
        v_body=float(vec[2]),
        s_slug=float(vec[3]),
        v_slug=float(vec[4]),
        q_residual=float(vec[5]),
        t_since_off=float(vec[6]),
        pulse_index=int(vec[7]),
    )
    out.check(config.s_max_m)
    return out


@dataclass(frozen=True)
class VelocityReport:
    mm_s: float
    bl_s: float


def average_velocity(telemetry: Telemetry) -> VelocityReport:
    """Whole-trace average velocity in mm/s and body lengths per second."""
    duration = telemetry.duration
    if not duration > 0:
        raise ConfigError("telemetry spans zero duration")
    v_mm_s = telemetry.net_displacement_m * 1e3 / duration
    return VelocityReport(mm_s=v_mm_s, bl_s=v_mm_s / telemetry.config.body_length_mm)


@dataclass(frozen=True)
class StrideReport:
    per_cycle_mm: list[float]
    steady_mm: float


def stride_per_cycle(telemetry: Telemetry) -> StrideReport:
    """Body displacement per HV cycle; steady value is the median of the
    last quarter of cycles."""
    xs = telemetry.rising_edge_x
    if len(xs) < 2:
        raise ConfigError("telemetry holds no complete HV cycle")
    strides = [(float(xs[i + 1] - xs[i])) * 1e3 for i in range(len(xs) - 1)]
    tail = strides[-max(1, len(strides) // 4):]
    return StrideReport(per_cycle_mm=strides, steady_mm=float(np.median(tail)))


def energy_audit(telemetry: Telemetry) -> dict[str, float]:
    """Energy balance of the episode; residual is the unexplained remainder."""
    e = telemetry.energy
    residual = (
        e["work_in"] - e["friction_loss"] - e["viscous_loss"] - e["delta_ke"] - e["delta_pe"]
    )
    return {**e, "residual": residual}


def write_summary(telemetry: Telemetry, path: str) -> None:
    from .cli import json_ready

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(json_ready(telemetry.summary()), fh, indent=2, sort_keys=True)
        fh.write("\n")
