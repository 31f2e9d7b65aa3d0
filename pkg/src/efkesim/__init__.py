"""Reduced-order simulator, calibration toolkit and teleoperation bridge
for electrohydraulic fluid-kinetic-energy crawling robots."""

from .config import ActuatorConfig, ConfigError, Environment
from .physics import SimState
from .waveform import HvWaveform, preset

__version__ = "0.1.0"

__all__ = [
    "ActuatorConfig",
    "Environment",
    "ConfigError",
    "SimState",
    "HvWaveform",
    "preset",
    "__version__",
]
