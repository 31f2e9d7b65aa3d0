"""Robot and environment configuration.

All user-facing quantities carry an explicit unit suffix in their name
(_mm, _um, _ml, _g, _ms, _kv); they map one-to-one onto JSON config keys.
Conversion to SI happens once, in the derived properties, and everything
downstream of the config works in metres / kilograms / seconds / volts.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

# Vacuum permittivity. Kept at the 4-digit engineering value used when the
# regression constants in the test suite were frozen.
EPS0 = 8.854e-12

# Below this body speed the robot is treated as stuck; avoids Coulomb chatter.
V_STICK_TOL = 1e-6

# Zipping-time saturation constant of the residual-adhesion law (ms).
ZT_REF_MS = 20.0

# Voltage the residual-adhesion law is normalised to (V).
RESIDUAL_V_REF = 5000.0


class ConfigError(ValueError):
    """A configuration value violates its documented constraint."""


@dataclass(frozen=True)
class ActuatorConfig:
    """Geometry, masses and lumped dynamic parameters of one robot.

    Defaults describe the optimized 6.3 g robot (25 mm electrodes, 6 mL
    oil).  Parameters the underlying experiments never measured directly
    (friction coefficients, coupling efficiency, slug fraction, reflux and
    damping coefficients, residual-adhesion constants) carry the values
    produced by the bundled calibration run; they are fit variables, not
    physical truths.
    """

    # geometry (external units)
    electrode_length_mm: float = 25.0
    electrode_width_mm: float = 50.0
    interior_length_mm: float = 50.0
    interior_width_mm: float = 50.0
    membrane_thickness_um: float = 25.0  # one BOPP+EVA film; two films stack
    # dielectric and oil. The permittivity is an effective value over the
    # mean gap: zipping concentrates the field far beyond V/d_eff at the
    # closing front, and a bulk-material 2.5 cannot produce the measured
    # speeds at any friction setting (the per-cycle impulse budget
    # F*zt caps average velocity below half the bench values).
    relative_permittivity: float = 10.0
    oil_volume_ml: float = 6.0
    oil_density_g_ml: float = 0.96
    # masses
    total_mass_g: float = 6.3
    slug_fraction: float = 0.043512
    # friction
    mu_static: float = 0.528327
    mu_dynamic: float = 0.013636
    # lumped dynamics (SI)
    coupling_efficiency: float = 0.999
    reflux_coefficient: float = 0.46844
    slug_damping: float = 0.036221  # N*s/m
    slug_damping_quadratic: float = 0.0  # N*s^2/m^2, optional flow drag; fit left it at zero
    endstop_stiffness: float = 1277.9  # N/m
    endstop_damping: float = 0.02  # N*s/m
    # residual electroadhesion
    residual_tau0_ms: float = 17.95
    residual_voltage_exponent: float = 13.064
    residual_polarity_reset: float = 0.5
    residual_hold_gain: float = 1.2
    gravity: float = 9.81

    def __post_init__(self) -> None:
        self.validate()

    # -- derived SI quantities -------------------------------------------

    @property
    def interior_area_m2(self) -> float:
        return (self.interior_length_mm * 1e-3) * (self.interior_width_mm * 1e-3)

    @property
    def d_eff_m(self) -> float:
        """Effective dielectric gap: mean oil layer plus both film stacks."""
        oil_layer = (self.oil_volume_ml * 1e-6) / self.interior_area_m2
        return oil_layer + 2.0 * self.membrane_thickness_um * 1e-6

    @property
    def s_max_m(self) -> float:
        """Travel range of the liquid slug along the body axis."""
        return (self.interior_length_mm - self.electrode_length_mm) * 1e-3

    @property
    def drive_stroke_m(self) -> float:
        """How far the zip stroke can push the slug: one electrode length.

        Zipping the electrode region shovels roughly its own length of
        liquid column into the free section; past that the drive force
        has nothing left to eject.
        """
        return self.electrode_length_mm * 1e-3

    @property
    def oil_mass_kg(self) -> float:
        return self.oil_volume_ml * self.oil_density_g_ml * 1e-3

    @property
    def slug_mass_kg(self) -> float:
        return self.slug_fraction * self.oil_mass_kg

    @property
    def total_mass_kg(self) -> float:
        return self.total_mass_g * 1e-3

    @property
    def body_mass_kg(self) -> float:
        """Everything that is not the moving slug, films and electrodes included."""
        return self.total_mass_kg - self.slug_mass_kg

    @property
    def body_length_mm(self) -> float:
        """Body length used for the body-lengths-per-second metric."""
        return self.interior_length_mm

    @property
    def actuation_coeff(self) -> float:
        """F = actuation_coeff * V^2 for the slug-drive force (N/V^2)."""
        return (
            self.coupling_efficiency
            * 0.5
            * EPS0
            * self.relative_permittivity
            * (self.electrode_width_mm * 1e-3)
            / self.d_eff_m
        )

    # -- validation ------------------------------------------------------

    def validate(self) -> None:
        positive = [
            "electrode_length_mm",
            "electrode_width_mm",
            "interior_length_mm",
            "interior_width_mm",
            "membrane_thickness_um",
            "oil_volume_ml",
            "oil_density_g_ml",
            "total_mass_g",
            "gravity",
        ]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)!r}")
        for name in (
            "mu_dynamic",
            "slug_damping",
            "slug_damping_quadratic",
            "endstop_stiffness",
            "endstop_damping",
            "residual_tau0_ms",
            "residual_voltage_exponent",
            "reflux_coefficient",
        ):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if not self.mu_static >= self.mu_dynamic:
            raise ConfigError(
                f"mu_static ({self.mu_static}) must be >= mu_dynamic ({self.mu_dynamic})"
            )
        if not self.relative_permittivity >= 1.0:
            raise ConfigError(
                f"relative_permittivity must be >= 1, got {self.relative_permittivity!r}"
            )
        if not 0.0 < self.slug_fraction <= 1.0:
            raise ConfigError(f"slug_fraction must be in (0, 1], got {self.slug_fraction!r}")
        if not 0.0 < self.coupling_efficiency <= 1.0:
            raise ConfigError(
                f"coupling_efficiency must be in (0, 1], got {self.coupling_efficiency!r}"
            )
        if not 0.0 <= self.residual_polarity_reset <= 1.0:
            raise ConfigError(
                f"residual_polarity_reset must be in [0, 1], got {self.residual_polarity_reset!r}"
            )
        if self.slug_mass_kg > self.total_mass_kg:
            raise ConfigError(
                f"slug mass {self.slug_mass_kg * 1e3:.3f} g exceeds total mass "
                f"{self.total_mass_g} g"
            )
        if not self.s_max_m > 0:
            raise ConfigError(
                "electrode_length_mm must be smaller than interior_length_mm "
                f"({self.electrode_length_mm} vs {self.interior_length_mm})"
            )
        if not self.d_eff_m > 0:
            raise ConfigError("derived dielectric gap must be > 0")

    # -- variants and serialization ---------------------------------------

    def replaced(self, **changes) -> "ActuatorConfig":
        return dataclasses.replace(self, **changes)

    def variant(
        self,
        electrode_length_mm: float | None = None,
        oil_volume_ml: float | None = None,
        **changes,
    ) -> "ActuatorConfig":
        """Design variant with consistent derived masses.

        Changing the oil volume re-derives total mass from the dry mass of
        this config; changing the electrode length rescales the slug
        fraction with electrode coverage (a longer electrode mobilises a
        larger share of the oil).  Explicit overrides in ``changes`` win.
        """
        out = dict(changes)
        if oil_volume_ml is not None and "total_mass_g" not in out:
            dry_g = self.total_mass_g - self.oil_mass_kg * 1e3
            out["total_mass_g"] = dry_g + oil_volume_ml * self.oil_density_g_ml
        if oil_volume_ml is not None:
            out["oil_volume_ml"] = oil_volume_ml
        if electrode_length_mm is not None and "slug_fraction" not in out:
            scaled = self.slug_fraction * electrode_length_mm / self.electrode_length_mm
            out["slug_fraction"] = min(max(scaled, 1e-3), 0.98)
        if electrode_length_mm is not None:
            out["electrode_length_mm"] = electrode_length_mm
        return dataclasses.replace(self, **out)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ActuatorConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown actuator config key(s): {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Environment:
    """Operating medium and payload.

    ``depth_m`` is carried for provenance only: hydrostatic pressure enters
    no force term, so runs at different depths are bit-identical.  Air is
    modelled as force-free (drag at ~mm/s scale is far below every other
    term), so ``fluid_density_kg_m3`` defaults to 0 in air.
    """

    medium: str = "air"
    fluid_density_kg_m3: float = 0.0
    drag_coefficient: float = 1.1
    depth_m: float = 0.0
    payload_mass_g: float = 0.0
    payload_drag_model: str = "constant-friction"

    def __post_init__(self) -> None:
        if self.medium not in ("air", "water"):
            raise ConfigError(f"medium must be 'air' or 'water', got {self.medium!r}")
        if self.payload_drag_model not in ("none", "constant-friction"):
            raise ConfigError(
                "payload_drag_model must be 'none' or 'constant-friction', "
                f"got {self.payload_drag_model!r}"
            )
        if self.depth_m < 0:
            raise ConfigError(f"depth_m must be >= 0, got {self.depth_m}")
        if self.payload_mass_g < 0:
            raise ConfigError(f"payload_mass_g must be >= 0, got {self.payload_mass_g}")
        if self.fluid_density_kg_m3 < 0:
            raise ConfigError(
                f"fluid_density_kg_m3 must be >= 0, got {self.fluid_density_kg_m3}"
            )

    @classmethod
    def water(cls, depth_m: float = 0.04, payload_mass_g: float = 8.3) -> "Environment":
        return cls(
            medium="water",
            fluid_density_kg_m3=1000.0,
            depth_m=depth_m,
            payload_mass_g=payload_mass_g,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Environment":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown environment key(s): {sorted(unknown)}")
        return cls(**data)


def normal_force(config: ActuatorConfig, env: Environment) -> float:
    """Ground normal force for the friction law.

    Total robot weight, minus buoyancy in water, plus the towed payload's
    weight when the payload drags on the ground ('constant-friction').
    Displaced volume is taken as the oil volume (films are negligible).
    """
    weight = config.total_mass_kg * config.gravity
    buoyancy = env.fluid_density_kg_m3 * config.gravity * self_displaced_volume(config)
    n = weight - buoyancy
    if env.payload_drag_model == "constant-friction":
        n += env.payload_mass_g * 1e-3 * config.gravity
    return max(n, 0.0)


def self_displaced_volume(config: ActuatorConfig) -> float:
    return config.oil_volume_ml * 1e-6


def drag_area_m2(config: ActuatorConfig) -> float:
    """Projected frontal area for quadratic body drag."""
    return (config.interior_width_mm * 1e-3) * config.d_eff_m


def load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read().strip()
    if not text:
        return {}
    return json.loads(text)


DEFAULT_CONFIG = ActuatorConfig()

