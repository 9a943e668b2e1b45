"""Simulation configuration: defaults, YAML loading, validation.

The shipped defaults are the experiment parameters (mass, inertia, lever
arm, the six gain matrices) plus the loop-rate and failsafe choices of the
runner.  A YAML file overrides any subset; unknown keys are rejected so
typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .actuators import ActuatorCurves
from .gnc import AttitudeGains, ControllerConfig, PositionGains
from .rigid_body import VehicleParams
from .trajectory import ArenaBounds


@dataclass
class LoopRates:
    sim_hz: int = 1000
    inner_hz: int = 250
    outer_hz: int = 50
    telemetry_hz: int = 20

    def __post_init__(self):
        if not self.sim_hz >= self.inner_hz >= self.outer_hz:
            raise ValueError("rates must satisfy sim >= inner >= outer")
        for name in ("inner_hz", "outer_hz", "telemetry_hz"):
            if self.sim_hz % getattr(self, name) != 0:
                raise ValueError(f"{name} must divide sim_hz evenly")


@dataclass
class Disturbance:
    force: np.ndarray = field(default_factory=lambda: np.zeros(3))  # N, inertial
    noise_pos_std: float = 0.0      # m, per axis
    noise_att_std_deg: float = 0.0  # deg, per Euler angle

    def __post_init__(self):
        self.force = np.asarray(self.force, dtype=float)
        if self.noise_pos_std < 0.0 or self.noise_att_std_deg < 0.0:
            raise ValueError("noise standard deviations must be non-negative")


@dataclass
class Timeouts:
    heartbeat: float = 1.0        # s without commander traffic before abort
    takeoff: float = 20.0         # s in Takeoff without altitude capture
    tracking: float = 120.0       # s in Tracking before timeout landing
    shim_latency: float = 0.05    # s between autopilot request and ack


@dataclass
class Profiles:
    takeoff_speed: float = 0.3    # m/s average ascent
    landing_speed: float = 0.25   # m/s average descent
    min_duration: float = 2.0     # s floor for either profile
    servo_tau: float = 0.0        # s, first-order servo lag (0 = ideal)


@dataclass
class SimConfig:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    curves: ActuatorCurves = field(default_factory=ActuatorCurves)
    position_gains: PositionGains = field(default_factory=PositionGains)
    attitude_gains: AttitudeGains = field(default_factory=AttitudeGains)
    rates: LoopRates = field(default_factory=LoopRates)
    disturbance: Disturbance = field(default_factory=Disturbance)
    timeouts: Timeouts = field(default_factory=Timeouts)
    profiles: Profiles = field(default_factory=Profiles)
    arena: ArenaBounds = field(default_factory=ArenaBounds)
    trajectory_file: str | None = None
    initial_position: np.ndarray = field(default_factory=lambda: np.zeros(3))  # NED, m
    seed: int = 0
    duration: float = 120.0       # s, hard cap on simulated time

    def __post_init__(self):
        self.initial_position = np.asarray(self.initial_position, dtype=float)

    @property
    def controller_config(self) -> ControllerConfig:
        return ControllerConfig(
            position=self.position_gains,
            attitude=self.attitude_gains,
            outer_every=self.rates.inner_hz // self.rates.outer_hz,
        )


_SECTION_TYPES = {
    "vehicle": VehicleParams,
    "curves": ActuatorCurves,
    "position_gains": PositionGains,
    "attitude_gains": AttitudeGains,
    "rates": LoopRates,
    "disturbance": Disturbance,
    "timeouts": Timeouts,
    "profiles": Profiles,
    "arena": ArenaBounds,
}

_SCALAR_KEYS = {"trajectory_file", "initial_position", "seed", "duration"}


def _build_section(cls, data: dict):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown keys in {cls.__name__}: {sorted(unknown)}")
    return cls(**data)


def load_config(path: str | Path | None = None) -> SimConfig:
    """Build a SimConfig from defaults, overridden by an optional YAML file."""
    if path is None:
        return SimConfig()
    with open(path) as f:
        raw = yaml.safe_load(f) or {}
    if not isinstance(raw, dict):
        raise ValueError("config file must be a mapping")
    unknown = set(raw) - set(_SECTION_TYPES) - _SCALAR_KEYS
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {}
    for key, cls in _SECTION_TYPES.items():
        if key in raw:
            kwargs[key] = _build_section(cls, raw[key] or {})
    for key in _SCALAR_KEYS:
        if key in raw:
            kwargs[key] = raw[key]
    return SimConfig(**kwargs)


def default_config_yaml() -> str:
    """Render the shipped defaults as a commented YAML template."""
    cfg = SimConfig()
    doc = {
        "vehicle": {"m": cfg.vehicle.m, "j_perp": cfg.vehicle.j_perp,
                    "j_zz": cfg.vehicle.j_zz, "L": cfg.vehicle.L, "g": cfg.vehicle.g},
        "curves": {"thrust_gain": cfg.curves.thrust_gain, "thrust_offset": cfg.curves.thrust_offset,
                   "yaw_dm_gain": cfg.curves.yaw_dm_gain, "yaw_mbar_gain": cfg.curves.yaw_mbar_gain,
                   "yaw_offset": cfg.curves.yaw_offset},
        "position_gains": {"kp": cfg.position_gains.kp.tolist(),
                           "kd": cfg.position_gains.kd.tolist(),
                           "ki": cfg.position_gains.ki.tolist()},
        "attitude_gains": {"kp": cfg.attitude_gains.kp.tolist(),
                           "kd": cfg.attitude_gains.kd.tolist(),
                           "ki": cfg.attitude_gains.ki.tolist()},
        "rates": {"sim_hz": cfg.rates.sim_hz, "inner_hz": cfg.rates.inner_hz,
                  "outer_hz": cfg.rates.outer_hz, "telemetry_hz": cfg.rates.telemetry_hz},
        "disturbance": {"force": cfg.disturbance.force.tolist(),
                        "noise_pos_std": cfg.disturbance.noise_pos_std,
                        "noise_att_std_deg": cfg.disturbance.noise_att_std_deg},
        "timeouts": {"heartbeat": cfg.timeouts.heartbeat, "takeoff": cfg.timeouts.takeoff,
                     "tracking": cfg.timeouts.tracking, "shim_latency": cfg.timeouts.shim_latency},
        "profiles": {"takeoff_speed": cfg.profiles.takeoff_speed,
                     "landing_speed": cfg.profiles.landing_speed,
                     "min_duration": cfg.profiles.min_duration,
                     "servo_tau": cfg.profiles.servo_tau},
        "arena": {"lo": cfg.arena.lo.tolist(), "hi": cfg.arena.hi.tolist()},
        "trajectory_file": cfg.trajectory_file,
        "initial_position": cfg.initial_position.tolist(),
        "seed": cfg.seed,
        "duration": cfg.duration,
    }
    return yaml.safe_dump(doc, sort_keys=False)
