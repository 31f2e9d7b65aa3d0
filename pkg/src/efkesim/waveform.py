"""High-voltage drive waveforms and electrode activation schedules.

A drive cycle is ZT milliseconds of HV (zipping) followed by RT
milliseconds at 0 V (release).  Pulses normally alternate polarity to
bleed residual charge; the bottom electrode is grounded throughout, so
the signed value is the top-electrode potential.

Edge convention is half-open: the voltage is on at the pulse start
instant and already off at t = k*period + zt, which makes duty-cycle
arithmetic exact.  Polarity flips per pulse, not per period, so a
zero-RT drive still alternates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .config import ConfigError


@dataclass(frozen=True)
class HvWaveform:
    amplitude_kv: float = 5.0
    zt_ms: float = 20.0
    rt_ms: float = 80.0
    polarity_mode: str = "alternating"  # or "fixed-positive"
    start_polarity: int = 1

    def __post_init__(self) -> None:
        if self.amplitude_kv < 0:
            raise ConfigError(f"amplitude_kv must be >= 0, got {self.amplitude_kv}")
        if not self.zt_ms > 0:
            raise ConfigError(f"zt_ms must be > 0, got {self.zt_ms}")
        if self.rt_ms < 0:
            raise ConfigError(f"rt_ms must be >= 0, got {self.rt_ms}")
        if self.polarity_mode not in ("alternating", "fixed-positive"):
            raise ConfigError(f"unknown polarity_mode {self.polarity_mode!r}")
        if self.start_polarity not in (1, -1):
            raise ConfigError(f"start_polarity must be +1 or -1, got {self.start_polarity}")

    @property
    def period_s(self) -> float:
        return (self.zt_ms + self.rt_ms) * 1e-3

    @property
    def zt_s(self) -> float:
        return self.zt_ms * 1e-3

    @property
    def amplitude_v(self) -> float:
        return self.amplitude_kv * 1e3

    @property
    def alternating(self) -> bool:
        return self.polarity_mode == "alternating"

    @property
    def duty(self) -> float:
        return self.zt_ms / (self.zt_ms + self.rt_ms) if self.rt_ms else 1.0

    def to_dict(self) -> dict:
        return {
            "amplitude_kv": self.amplitude_kv,
            "zt_ms": self.zt_ms,
            "rt_ms": self.rt_ms,
            "polarity": self.polarity_mode,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HvWaveform":
        known = {"amplitude_kv", "zt_ms", "rt_ms", "polarity", "start_polarity"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown waveform key(s): {sorted(unknown)}")
        return cls(
            amplitude_kv=data.get("amplitude_kv", 5.0),
            zt_ms=data.get("zt_ms", 20.0),
            rt_ms=data.get("rt_ms", 80.0),
            polarity_mode=data.get("polarity", "alternating"),
            start_polarity=data.get("start_polarity", 1),
        )


# Recommended operating patterns for each amplitude.
PRESETS: dict[str, HvWaveform] = {
    "4kv-10-60": HvWaveform(4.0, 10.0, 60.0),
    "4kv-20-80": HvWaveform(4.0, 20.0, 80.0),
    "4kv-30-120": HvWaveform(4.0, 30.0, 120.0),
    "5kv-10-60": HvWaveform(5.0, 10.0, 60.0),
    "5kv-20-80": HvWaveform(5.0, 20.0, 80.0),
    "5kv-30-120": HvWaveform(5.0, 30.0, 120.0),
    "6kv-10-80": HvWaveform(6.0, 10.0, 80.0),
    "6kv-20-120": HvWaveform(6.0, 20.0, 120.0),
    "6kv-30-180": HvWaveform(6.0, 30.0, 180.0),
}


def preset(name: str) -> HvWaveform:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")


# Absolute wobble tolerance when classifying a sample against pulse edges;
# far below any usable integration step.
_EDGE_EPS = 1e-9


def sample_hv(w: HvWaveform, t: float) -> float:
    """Signed instantaneous voltage at time t >= 0.

    Half-open pulses: on at the pulse start instant, off at the falling
    edge.  Times within a nanosecond of an edge land on that convention
    despite float round-off in k*period + zt arithmetic.
    """
    if t < 0:
        raise ConfigError(f"t must be >= 0, got {t}")
    period = w.period_s
    k = math.floor(t / period)
    phase = t - k * period
    if phase < 0.0:
        phase = 0.0
    if phase > period - _EDGE_EPS:  # wobble just below the next pulse start
        k += 1
        phase = 0.0
    if w.rt_ms > 0 and phase >= w.zt_s - _EDGE_EPS:
        return 0.0
    if w.alternating:
        sign = w.start_polarity if k % 2 == 0 else -w.start_polarity
    else:
        sign = 1
    return w.amplitude_v * sign


def schedule_edges(w: HvWaveform, duration: float) -> list[float]:
    """Strictly increasing times of every rising/falling edge in [0, duration]."""
    if not duration > 0:
        raise ConfigError(f"duration must be > 0, got {duration}")
    period = w.period_s
    edges: list[float] = []
    k = 0
    while True:
        rise = k * period
        if rise > duration:
            break
        edges.append(rise)
        fall = rise + w.zt_s
        if w.rt_ms > 0 and fall <= duration:
            edges.append(fall)
        k += 1
    # dedupe (rt == 0 makes fall coincide with the next rise)
    out: list[float] = []
    for e in edges:
        if not out or e > out[-1]:
            out.append(e)
    return out


@dataclass(frozen=True)
class GateInterval:
    start_s: float
    end_s: float


@dataclass
class ElectrodeSchedule:
    """Per-electrode activation intervals driving one base waveform.

    Electrode ids name the side of the bladder the pair sits on; at most
    one electrode of an opposing pair may be active at any instant.
    """

    waveform: HvWaveform
    gates: dict[str, list[GateInterval]] = field(default_factory=dict)

    def active_at(self, t: float) -> list[str]:
        out = []
        for eid, intervals in self.gates.items():
            if any(iv.start_s <= t < iv.end_s for iv in intervals):
                out.append(eid)
        return sorted(out)

    def validate(self) -> None:
        for a, b in (("+x", "-x"), ("+y", "-y")):
            for iv_a in self.gates.get(a, []):
                for iv_b in self.gates.get(b, []):
                    if iv_a.start_s < iv_b.end_s and iv_b.start_s < iv_a.end_s:
                        raise ConfigError(
                            f"opposing electrodes {a}/{b} overlap at t={max(iv_a.start_s, iv_b.start_s)} s"
                        )


DIRECTIONS = ("+x", "-x", "+y", "-y", "stop")

# EFKE pushes the robot away from the electrode side, so a motion command
# activates the pair on the opposite side.
DEFAULT_DIRECTION_MAP = {"+x": "-x", "-x": "+x", "+y": "-y", "-y": "+y"}


def electrode_schedule(
    commands: list[tuple[float, str]],
    base_waveform: HvWaveform,
    mapping: dict[str, str] | None = None,
    duration: float | None = None,
) -> ElectrodeSchedule:
    """Build the per-electrode gating for a time-stamped direction stream.

    Each command holds until the next one; 'stop' idles all electrodes.
    Two different commands at the same timestamp conflict.
    """
    mapping = dict(DEFAULT_DIRECTION_MAP if mapping is None else mapping)
    cmds = sorted(commands, key=lambda c: c[0])
    for (t0, d0), (t1, d1) in zip(cmds, cmds[1:]):
        if t0 == t1 and d0 != d1:
            raise ConfigError(f"conflicting commands {d0!r} and {d1!r} at t={t0} s")
    for _, d in cmds:
        if d not in DIRECTIONS:
            raise ConfigError(f"unknown direction {d!r}")

    if duration is None:
        duration = cmds[-1][0] if cmds else 0.0
    sched = ElectrodeSchedule(waveform=base_waveform, gates={})
    for i, (t0, d) in enumerate(cmds):
        t1 = cmds[i + 1][0] if i + 1 < len(cmds) else duration
        if d == "stop" or t1 <= t0:
            continue
        eid = mapping[d]
        sched.gates.setdefault(eid, []).append(GateInterval(t0, t1))
    sched.validate()
    return sched


__all__ = [
    "HvWaveform",
    "PRESETS",
    "preset",
    "sample_hv",
    "schedule_edges",
    "ElectrodeSchedule",
    "GateInterval",
    "electrode_schedule",
    "DIRECTIONS",
    "DEFAULT_DIRECTION_MAP",
]
