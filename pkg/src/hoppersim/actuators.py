"""Identified maps between normalized autopilot commands and physical actuation.

Servo commands map 1:1 to gimbal angles over +/-30 deg.  Thrust follows a
linear fit of static-test data against the mean motor command; the
differential-thrust channel follows a linear fit of measured axial angular
acceleration against the motor-command difference and mean.  Inversions
saturate rather than raise, and report the saturation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SERVO_RANGE = np.pi / 6


@dataclass
class ActuatorCurves:
    """Identified actuator coefficients (static-test fits)."""

    thrust_gain: float = 26.45      # N per unit mean command
    thrust_offset: float = -0.3821  # N
    yaw_dm_gain: float = 23.99      # rad/s^2 per unit differential
    yaw_mbar_gain: float = 0.4031   # rad/s^2 per unit mean
    yaw_offset: float = 0.02432     # rad/s^2
    servo_range: float = SERVO_RANGE

    def __post_init__(self):
        if self.thrust_gain <= 0.0 or self.yaw_dm_gain <= 0.0:
            raise ValueError("thrust_gain and yaw_dm_gain must be positive")


@dataclass
class ActuatorCommands:
    """Normalized rail commands: servos in [-1, 1], motors in [0, 1]."""

    s_in: float = 0.0
    s_out: float = 0.0
    m_up: float = 0.0
    m_dn: float = 0.0

    def __post_init__(self):
        if abs(self.s_in) > 1.0 + 1e-12 or abs(self.s_out) > 1.0 + 1e-12:
            raise ValueError("servo command outside [-1, 1]")
        for m in (self.m_up, self.m_dn):
            if not -1e-12 <= m <= 1.0 + 1e-12:
                raise ValueError("motor command outside [0, 1]")


@dataclass
class SaturationFlags:
    """Which channels clamped during an inversion."""

    servo_in: bool = False
    servo_out: bool = False
    thrust: bool = False
    yaw: bool = False

    def any(self) -> bool:
        return self.servo_in or self.servo_out or self.thrust or self.yaw


def servo_cmd_to_angle(s: float, curves: ActuatorCurves | None = None) -> float:
    """Gimbal angle (rad) for a normalized servo command in [-1, 1]."""
    rng = curves.servo_range if curves else SERVO_RANGE
    if abs(s) > 1.0 + 1e-12:
        raise ValueError("servo command outside [-1, 1]")
    return rng * s


def angle_to_servo_cmd(gamma: float, curves: ActuatorCurves | None = None) -> tuple[float, bool]:
    """Normalized servo command for a gimbal angle; clamps and flags beyond +/-30 deg."""
    rng = curves.servo_range if curves else SERVO_RANGE
    s = gamma / rng
    if abs(s) > 1.0:
        return float(np.clip(s, -1.0, 1.0)), True
    return s, False


def motors_to_thrust(m_up: float, m_dn: float, curves: ActuatorCurves | None = None) -> float:
    """Total thrust (N) from the mean motor command, clamped below at zero.

    The linear fit goes negative at low commands; propellers cannot pull,
    so the raw value is floored at 0.
    """
    c = curves or ActuatorCurves()
    m_bar = 0.5 * (m_up + m_dn)
    return max(0.0, c.thrust_gain * m_bar + c.thrust_offset)


def motors_to_norm_yaw_accel(m_up: float, m_dn: float, curves: ActuatorCurves | None = None) -> float:
    """Normalized differential torque (rad/s^2) from the motor command pair."""
    c = curves or ActuatorCurves()
    dm = m_up - m_dn
    m_bar = 0.5 * (m_up + m_dn)
    return c.yaw_dm_gain * dm + c.yaw_mbar_gain * m_bar + c.yaw_offset


def inverse_motor_allocation(
    thrust_des: float,
    tau_delta_norm_des: float,
    curves: ActuatorCurves | None = None,
) -> tuple[float, float, bool]:
    """Motor command pair realizing a desired (thrust, normalized yaw torque).

    Returns (m_up, m_dn, saturated).  The mean command is clamped first
    (thrust has priority), then the differential is shrunk to keep both
    commands in [0, 1].  The split is symmetric about the mean, so the
    thrust channel is preserved exactly whenever only yaw saturates.
    """
    c = curves or ActuatorCurves()
    if thrust_des < 0.0:
        raise ValueError("thrust_des must be non-negative")
    m_bar = (thrust_des - c.thrust_offset) / c.thrust_gain
    dm = (tau_delta_norm_des - c.yaw_mbar_gain * m_bar - c.yaw_offset) / c.yaw_dm_gain
    saturated = False
    if not 0.0 <= m_bar <= 1.0:
        m_bar = float(np.clip(m_bar, 0.0, 1.0))
        saturated = True
    dm_max = 2.0 * min(m_bar, 1.0 - m_bar)
    if abs(dm) > dm_max:
        dm = float(np.clip(dm, -dm_max, dm_max))
        saturated = True
    return m_bar + 0.5 * dm, m_bar - 0.5 * dm, saturated


def servo_lag_step(current: float, commanded: float, dt: float, tau_servo: float,
                   slew_limit: float | None = None) -> float:
    """One first-order-lag step of the servo angle toward its command.

    tau_servo = 0 disables the lag (pass-through).  An optional slew-rate
    limit (rad/s) caps the per-step change.
    """
    if tau_servo < 0.0:
        raise ValueError("tau_servo must be non-negative")
    if tau_servo == 0.0:
        new = commanded
    else:
        new = current + (dt / tau_servo) * (commanded - current)
    if slew_limit is not None:
        max_step = slew_limit * dt
        new = current + float(np.clip(new - current, -max_step, max_step))
    return new
