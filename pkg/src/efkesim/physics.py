"""Force laws of the two-mass crawling model.

The robot is lumped into a body (films, electrodes and the passive share
of the oil) and a liquid slug (the mobile share of the oil).  High voltage
squeezes the electrode region and drives the slug towards the free end of
the bladder; the body reacts through the same internal forces and crawls
by stick-slip against ground friction.  Every function here is pure.

Sign convention: +x is the crawling direction (away from the electrode
side).  ``s_slug`` is the slug position relative to the body, 0 at the
electrode-side rest position, ``s_max`` at the far wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import (
    EPS0,
    RESIDUAL_V_REF,
    V_STICK_TOL,
    ZT_REF_MS,
    ActuatorConfig,
    ConfigError,
    Environment,
    drag_area_m2,
    normal_force,
)


class NumericError(RuntimeError):
    """Non-finite state encountered during integration."""


@dataclass
class SimState:
    """Instantaneous state of the 1-D locomotion model (SI units)."""

    t: float = 0.0
    x_body: float = 0.0
    v_body: float = 0.0
    s_slug: float = 0.0
    v_slug: float = 0.0  # ground frame
    q_residual: float = 0.0
    t_since_off: float = 0.0
    pulse_index: int = 0

    def check(self, s_max: float) -> None:
        vals = (self.t, self.x_body, self.v_body, self.s_slug, self.v_slug)
        if not all(math.isfinite(v) for v in vals):
            raise NumericError(f"non-finite state: {self!r}")
        tol = 0.01 * s_max
        if not -tol <= self.s_slug <= s_max + tol:
            raise NumericError(f"slug position {self.s_slug} outside end-stop regime")
        if not 0.0 <= self.q_residual <= 1.0:
            raise NumericError(f"q_residual {self.q_residual} outside [0, 1]")


def maxwell_stress(relative_permittivity: float, field: float) -> float:
    """Electrostatic pressure acting across the dielectric stack, in Pa."""
    if not relative_permittivity >= 1.0:
        raise ConfigError(f"relative_permittivity must be >= 1, got {relative_permittivity!r}")
    if not math.isfinite(field):
        raise ConfigError(f"field must be finite, got {field!r}")
    return 0.5 * EPS0 * relative_permittivity * field * field


def actuation_force(voltage: float, config: ActuatorConfig) -> float:
    """Drive force on the slug, +x, for a given instantaneous voltage.

    The Maxwell stress over the bladder cross-section (width x effective
    gap) pushes the liquid towards the free end; polarity is irrelevant
    because the stress is quadratic in the field.
    """
    if not math.isfinite(voltage):
        raise ConfigError(f"voltage must be finite, got {voltage!r}")
    stress = maxwell_stress(config.relative_permittivity, abs(voltage) / config.d_eff_m)
    area = (config.electrode_width_mm * 1e-3) * config.d_eff_m
    return config.coupling_efficiency * stress * area


def residual_time_constant(
    pulse_voltage: float, zt_s: float, config: ActuatorConfig, alternating: bool = True
) -> float:
    """Decay time of the post-pulse electroadhesion, in seconds.

    Scales with a power of the pulse amplitude and saturates with zipping
    time; alternating-polarity drive neutralises part of the residual
    charge, shortening the decay by the polarity-reset factor.
    """
    tau = (
        config.residual_tau0_ms
        * 1e-3
        * (abs(pulse_voltage) / RESIDUAL_V_REF) ** config.residual_voltage_exponent
        * min(1.0, (zt_s * 1e3) / ZT_REF_MS)
    )
    if alternating:
        tau *= 1.0 - config.residual_polarity_reset
    return tau


def residual_adhesion(
    t_since_off: float,
    pulse_voltage: float,
    zt: float,
    config: ActuatorConfig,
    alternating: bool = True,
) -> float:
    """Residual-adhesion level in [0, 1] at ``t_since_off`` after switch-off."""
    if t_since_off < 0:
        raise ConfigError(f"t_since_off must be >= 0, got {t_since_off!r}")
    tau = residual_time_constant(pulse_voltage, zt, config, alternating)
    if tau <= 0.0:
        return 1.0 if t_since_off == 0.0 else 0.0
    return math.exp(-t_since_off / tau)


def coulomb_friction(
    v_body: float, f_other: float, normal: float, mu_s: float, mu_d: float
) -> float:
    """Ground friction on the body.

    Sliding: kinetic friction opposing motion.  Stuck (|v| below the stick
    tolerance): cancels the applied force up to the static limit, so a
    slug impulse below breakaway cannot move the robot.
    """
    if normal < 0:
        raise ConfigError(f"normal force must be >= 0, got {normal!r}")
    if abs(v_body) > V_STICK_TOL:
        return -math.copysign(mu_d * normal, v_body)
    limit = mu_s * normal
    if f_other > limit:
        return -limit
    if f_other < -limit:
        return limit
    return -f_other


def reflux_force(s_slug: float, config: ActuatorConfig) -> float:
    """Gravity-driven restoring force pulling the slug back to rest.

    Linear in the displaced fraction of the travel range; acts between
    slug and bladder, so its reaction loads the body.
    """
    s_max = config.s_max_m
    tol = 0.01 * s_max
    if not -tol <= s_slug <= s_max + tol:
        raise ConfigError(f"s_slug {s_slug!r} outside [0, s_max] beyond end-stop tolerance")
    return -config.reflux_coefficient * config.slug_mass_kg * config.gravity * (s_slug / s_max)


def end_stop_force(s_slug: float, v_slug_rel: float, config: ActuatorConfig) -> float:
    """Penalty spring-damper keeping the slug inside its travel range.

    Acts on the slug; the body takes the opposite reaction.  Each stop only
    pushes inward (no sticking on rebound).
    """
    s_max = config.s_max_m
    if s_slug > s_max:
        f = -config.endstop_stiffness * (s_slug - s_max) - config.endstop_damping * v_slug_rel
        return min(f, 0.0)
    if s_slug < 0.0:
        f = -config.endstop_stiffness * s_slug - config.endstop_damping * v_slug_rel
        return max(f, 0.0)
    return 0.0


def hold_factor(q_residual: float, config: ActuatorConfig) -> float:
    """Reflux attenuation by residual adhesion: 1 free, 0 fully held."""
    return max(0.0, 1.0 - config.residual_hold_gain * q_residual)


def drive_window(s_slug: float, config: ActuatorConfig) -> float:
    """Whether the zip stroke can still push the slug at position ``s_slug``.

    Zipping displaces at most one electrode length of liquid column, so
    the drive force dies once the slug has advanced past that stroke.
    Robots whose electrodes are shorter than half the interior can
    therefore never shove the slug all the way to the far wall.
    """
    return 1.0 if s_slug < config.drive_stroke_m else 0.0


@dataclass
class Derivative:
    dx_body: float
    dv_body: float
    ds_slug: float
    dv_slug: float


def state_derivative(
    state: SimState,
    voltage: float,
    config: ActuatorConfig,
    env: Environment | None = None,
) -> Derivative:
    """Continuous-time derivatives of the two-mass model.

    All slug forces (drive, viscous coupling, reflux, end stops) act
    between slug and body, so they appear with opposite signs in the two
    momentum equations; only ground friction and fluid drag are external.
    """
    env = env or Environment()
    state.check(config.s_max_m)

    v_rel = state.v_slug - state.v_body
    f_act = actuation_force(voltage, config) * drive_window(state.s_slug, config)
    f_damp = -config.slug_damping * v_rel - config.slug_damping_quadratic * abs(v_rel) * v_rel
    q = 1.0 if voltage != 0.0 else state.q_residual
    f_reflux = reflux_force(state.s_slug, config) * hold_factor(q, config)
    f_stop = end_stop_force(state.s_slug, v_rel, config)
    f_slug = f_act + f_damp + f_reflux + f_stop

    n = normal_force(config, env)
    f_drag = -0.5 * env.fluid_density_kg_m3 * env.drag_coefficient * drag_area_m2(config) * abs(
        state.v_body
    ) * state.v_body
    f_other = -f_slug + f_drag
    f_fric = coulomb_friction(state.v_body, f_other, n, config.mu_static, config.mu_dynamic)

    m_body = config.body_mass_kg + env.payload_mass_g * 1e-3
    dv_body = (f_other + f_fric) / m_body
    dv_slug = f_slug / config.slug_mass_kg
    return Derivative(
        dx_body=state.v_body,
        dv_body=dv_body,
        ds_slug=v_rel,
        dv_slug=dv_slug,
    )


__all__ = [
    "EPS0",
    "SimState",
    "NumericError",
    "maxwell_stress",
    "actuation_force",
    "residual_adhesion",
    "residual_time_constant",
    "coulomb_friction",
    "reflux_force",
    "end_stop_force",
    "hold_factor",
    "state_derivative",
    "Derivative",
]
