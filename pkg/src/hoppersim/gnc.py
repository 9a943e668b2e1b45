"""Cascaded trajectory-tracking controller.

Outer loop: PID with feedforward on position error, producing a desired
acceleration.  The acceleration fixes the thrust magnitude and, combined
with the desired yaw, a desired roll/pitch pair.  Inner loop: per-axis PID
on Euler-angle error producing a normalized torque, realized back through
the thrust vector and the differential channel.

Sign conventions: in NED with body z through the nozzle, the axial thrust
component is negative at hover, so the thrust magnitude enters as
u3 = -m ||a|| and the desired body z column is -a/||a||; the product still
equals the demanded acceleration.

The attitude PID gains act on degree-valued errors and body rates while
producing a rad/s^2 normalized torque; with these gain magnitudes the
radian reading would put the inner loop well below the outer-loop
bandwidth and the cascade would be unstable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .actuators import ActuatorCommands, ActuatorCurves, SaturationFlags, \
    angle_to_servo_cmd, inverse_motor_allocation
from .rigid_body import ControlInputs, GIMBAL_LIMIT, RigidBodyState, VehicleParams, \
    euler_zyx_from_R, rot_z
from .trajectory import TrajectorySample

ATTITUDE_ERROR_SCALE = 180.0 / np.pi  # attitude loop errors fed in degrees

MIN_ACCEL_NORM = 0.1          # m/s^2, below this the desired attitude is undefined
POS_INTEGRAL_LIMIT = 2.0      # m s, per axis
ATT_INTEGRAL_LIMIT = 1.0      # rad s, per axis
MIN_UP_DEMAND = 0.981         # m/s^2, thrust-acceleration floor along -z (0.1 g)
TILT_LIMIT_TAN = np.tan(np.deg2rad(25.0))  # demanded-tilt envelope


class AttitudeDegeneracyError(ValueError):
    """Demanded acceleration cannot be realized by a tilt within +/-90 deg."""


@dataclass
class PositionGains:
    """Diagonal outer-loop gains acting on meters."""

    kp: np.ndarray = field(default_factory=lambda: np.array([3.0, 3.0, 8.5]))
    kd: np.ndarray = field(default_factory=lambda: np.array([2.5, 2.5, 3.0]))
    ki: np.ndarray = field(default_factory=lambda: np.array([0.2, 0.2, 1.0]))

    def __post_init__(self):
        self.kp, self.kd, self.ki = (np.asarray(g, dtype=float) for g in (self.kp, self.kd, self.ki))
        if np.any(self.kp <= 0.0) or np.any(self.kd <= 0.0) or np.any(self.ki <= 0.0):
            raise ValueError("position gains must be strictly positive")


@dataclass
class AttitudeGains:
    """Diagonal inner-loop gains (roll, pitch, yaw)."""

    kp: np.ndarray = field(default_factory=lambda: np.array([0.7, 0.7, 0.4]))
    kd: np.ndarray = field(default_factory=lambda: np.array([0.4, 0.4, 0.2]))
    ki: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.1]))

    def __post_init__(self):
        self.kp, self.kd, self.ki = (np.asarray(g, dtype=float) for g in (self.kp, self.kd, self.ki))
        if np.any(self.kp <= 0.0) or np.any(self.kd <= 0.0) or np.any(self.ki < 0.0):
            raise ValueError("attitude kp/kd must be positive, ki non-negative")


@dataclass
class ControllerState:
    """Integrators and previous errors owned by the control loop."""

    integral_ep: np.ndarray = field(default_factory=lambda: np.zeros(3))    # m s
    integral_elam: np.ndarray = field(default_factory=lambda: np.zeros(3))  # rad s
    prev_ep: np.ndarray | None = None
    prev_elam: np.ndarray | None = None
    hold_last: bool = False

    def copy(self) -> "ControllerState":
        out = ControllerState(
            self.integral_ep.copy(), self.integral_elam.copy(),
            None if self.prev_ep is None else self.prev_ep.copy(),
            None if self.prev_elam is None else self.prev_elam.copy(),
            self.hold_last,
        )
        return out


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = (a + np.pi) % (2.0 * np.pi) - np.pi
    return np.pi if w == -np.pi else float(w)


def tracking_errors(ref: TrajectorySample, state: RigidBodyState) -> tuple[np.ndarray, np.ndarray]:
    """Position and velocity tracking errors (reference minus state)."""
    return ref.pos - state.p, ref.vel - state.v


def outer_loop_accel(
    e_p: np.ndarray,
    e_v: np.ndarray,
    integral_ep: np.ndarray,
    accel_ff: np.ndarray,
    gains: PositionGains,
    g: float,
) -> np.ndarray:
    """Demanded inertial acceleration: PID with gravity offset and feedforward."""
    return gains.kp * e_p + gains.kd * e_v + gains.ki * integral_ep - g * np.array([0.0, 0.0, 1.0]) + accel_ff


def thrust_and_attitude(a: np.ndarray, psi_des: float, m: float) -> tuple[float, float, float]:
    """Axial thrust component and desired roll/pitch realizing acceleration a.

    The desired thrust direction -a/||a|| is rotated into the yaw-aligned
    frame before extracting the angles, so the construction is exact for
    any desired yaw.  Raises on near-free-fall demands (attitude undefined)
    and on demands needing more than 90 deg of tilt.
    """
    norm_a = np.linalg.norm(a)
    if norm_a < MIN_ACCEL_NORM:
        raise AttitudeDegeneracyError("demanded acceleration too close to free fall")
    u3 = -m * norm_a
    r_hat = rot_z(psi_des).T @ (-a / norm_a)
    if r_hat[2] <= 0.0:
        raise AttitudeDegeneracyError("demand exceeds +/-90 deg tilt")
    phi_d = float(np.arcsin(-r_hat[1]))
    theta_d = float(np.arctan2(r_hat[0], r_hat[2]))
    return u3, phi_d, theta_d


def attitude_pid(
    e_lam: np.ndarray,
    omega: np.ndarray,
    integral_elam: np.ndarray,
    gains: AttitudeGains,
) -> np.ndarray:
    """Normalized torque from attitude error, rate damping and integral term."""
    return gains.kp * e_lam - gains.kd * omega + gains.ki * integral_elam


def reconstruct_thrust_vector(tau_norm: np.ndarray, u3: float, params: VehicleParams) -> np.ndarray:
    """Thrust vector whose vectoring torque realizes the lateral torque demand.

    u = -(j_perp/L) e3 x tau_norm + u3 e3, i.e. u1 = (j_perp/L) tau2 and
    u2 = -(j_perp/L) tau1.
    """
    k = params.j_perp / params.L
    return np.array([k * tau_norm[1], -k * tau_norm[0], u3])


def allocate_4dof(u: np.ndarray, tau_norm: np.ndarray) -> tuple[ControlInputs, SaturationFlags]:
    """Invert the thrust vector into the four control degrees of freedom.

    Exact right-inverse of thrust_vector_body on the admissible gimbal
    domain; angles beyond +/-30 deg are clamped and flagged.
    """
    T = float(np.linalg.norm(u))
    if T <= 0.0:
        raise ValueError("cannot allocate a zero thrust vector")
    flags = SaturationFlags()
    gamma_in = float(np.arcsin(np.clip(u[1] / T, -1.0, 1.0)))
    lat = np.sqrt(max(T * T - u[1] * u[1], 0.0))
    gamma_out = float(-np.arcsin(np.clip(u[0] / lat, -1.0, 1.0))) if lat > 0.0 else 0.0
    if abs(gamma_in) > GIMBAL_LIMIT:
        gamma_in = float(np.clip(gamma_in, -GIMBAL_LIMIT, GIMBAL_LIMIT))
        flags.servo_in = True
    if abs(gamma_out) > GIMBAL_LIMIT:
        gamma_out = float(np.clip(gamma_out, -GIMBAL_LIMIT, GIMBAL_LIMIT))
        flags.servo_out = True
    inputs = ControlInputs(gamma_in=gamma_in, gamma_out=gamma_out, thrust=T,
                           tau_delta_norm=float(tau_norm[2]))
    return inputs, flags


@dataclass
class ControllerConfig:
    position: PositionGains = field(default_factory=PositionGains)
    attitude: AttitudeGains = field(default_factory=AttitudeGains)
    outer_every: int = 5  # inner ticks per outer-loop execution


class CascadedController:
    """Stateful executor of the cascade at split inner/outer rates.

    The outer loop runs every ``outer_every`` inner ticks and its outputs
    (thrust component and desired attitude) are zero-order-held between
    executions.  All state is owned by this object; step() is deterministic
    given (reference, measured state, tick index).
    """

    def __init__(self, params: VehicleParams, curves: ActuatorCurves,
                 config: ControllerConfig | None = None, psi_des: float = 0.0):
        self.params = params
        self.curves = curves
        self.config = config or ControllerConfig()
        self.psi_des = psi_des
        self.state = ControllerState()
        self.saturation = SaturationFlags()
        self._inner_count = 0
        self._u3 = -params.m * params.g
        self._lam_d = np.array([0.0, 0.0, psi_des])
        self._last: tuple[ControlInputs, ActuatorCommands] | None = None

    def reset(self, psi_des: float | None = None) -> None:
        if psi_des is not None:
            self.psi_des = psi_des
        self.state = ControllerState()
        self.saturation = SaturationFlags()
        self._inner_count = 0
        self._u3 = -self.params.m * self.params.g
        self._lam_d = np.array([0.0, 0.0, self.psi_des])
        self._last = None

    def _update_position_integral(self, e_p: np.ndarray, dt: float) -> None:
        # integration frozen while the thrust channel is clamped
        if self.saturation.thrust:
            self.state.prev_ep = e_p.copy()
            return
        prev = self.state.prev_ep if self.state.prev_ep is not None else e_p
        self.state.integral_ep = np.clip(
            self.state.integral_ep + 0.5 * (prev + e_p) * dt,
            -POS_INTEGRAL_LIMIT, POS_INTEGRAL_LIMIT,
        )
        self.state.prev_ep = e_p.copy()

    def _update_attitude_integral(self, e_lam: np.ndarray, dt: float) -> None:
        prev = self.state.prev_elam if self.state.prev_elam is not None else e_lam
        step = 0.5 * (prev + e_lam) * dt
        frozen = np.array([
            self.saturation.servo_in or self.saturation.servo_out,
            self.saturation.servo_in or self.saturation.servo_out,
            self.saturation.yaw,
        ])
        new = np.where(frozen, self.state.integral_elam, self.state.integral_elam + step)
        self.state.integral_elam = np.clip(new, -ATT_INTEGRAL_LIMIT, ATT_INTEGRAL_LIMIT)
        self.state.prev_elam = e_lam.copy()

    def step(self, ref: TrajectorySample, measured: RigidBodyState,
             dt_inner: float) -> tuple[ControlInputs, ActuatorCommands]:
        """One inner-loop tick; runs the outer loop when due."""
        cfg = self.config
        outer_due = self._inner_count % cfg.outer_every == 0
        self._inner_count += 1
        demand_clamped = False
        try:
            if outer_due:
                dt_outer = dt_inner * cfg.outer_every
                e_p, e_v = tracking_errors(ref, measured)
                self._update_position_integral(e_p, dt_outer)
                a = outer_loop_accel(e_p, e_v, self.state.integral_ep, ref.acc,
                                     self.config.position, self.params.g)
                # envelope protection: thrust can only push along -z of the
                # body, so an unreachable downward demand is clamped, and the
                # demanded tilt is limited to keep large transients (abort
                # captures, reference steps) inside the actuators' authority
                if a[2] > -MIN_UP_DEMAND:
                    a = np.array([a[0], a[1], -MIN_UP_DEMAND])
                    demand_clamped = True
                lat = np.hypot(a[0], a[1])
                max_lat = TILT_LIMIT_TAN * -a[2]
                if lat > max_lat:
                    a = np.array([a[0] * max_lat / lat, a[1] * max_lat / lat, a[2]])
                    demand_clamped = True
                u3, phi_d, theta_d = thrust_and_attitude(a, self.psi_des, self.params.m)
                self._u3 = u3
                self._lam_d = np.array([phi_d, theta_d, self.psi_des])

            lam = np.array(euler_zyx_from_R(measured.R))
            e_lam = self._lam_d - lam
            e_lam[2] = wrap_angle(e_lam[2])
            self._update_attitude_integral(e_lam, dt_inner)
            tau_norm = attitude_pid(
                ATTITUDE_ERROR_SCALE * e_lam,
                ATTITUDE_ERROR_SCALE * measured.omega,
                ATTITUDE_ERROR_SCALE * self.state.integral_elam,
                self.config.attitude,
            )
            u = reconstruct_thrust_vector(tau_norm, self._u3, self.params)
            inputs, flags = allocate_4dof(u, tau_norm)
            m_up, m_dn, motor_sat = inverse_motor_allocation(
                inputs.thrust, inputs.tau_delta_norm, self.curves)
            s_in, sat_in = angle_to_servo_cmd(inputs.gamma_in, self.curves)
            s_out, sat_out = angle_to_servo_cmd(inputs.gamma_out, self.curves)
            flags.servo_in = flags.servo_in or sat_in
            flags.servo_out = flags.servo_out or sat_out
            flags.thrust = flags.thrust or motor_sat
            flags.yaw = flags.yaw or motor_sat
            self.saturation = flags
            cmds = ActuatorCommands(s_in=s_in, s_out=s_out, m_up=m_up, m_dn=m_dn)
            self.state.hold_last = demand_clamped
            self._last = (inputs, cmds)
            return inputs, cmds
        except (AttitudeDegeneracyError, ValueError):
            # hold the previous command and flag it for the failsafe path
            self.state.hold_last = True
            if self._last is not None:
                return self._last
            hover = ControlInputs(thrust=self.params.m * self.params.g)
            m_up, m_dn, _ = inverse_motor_allocation(hover.thrust, 0.0, self.curves)
            return hover, ActuatorCommands(m_up=m_up, m_dn=m_dn)


def controller_step(
    ref: TrajectorySample,
    state: RigidBodyState,
    ctl: ControllerState,
    dt: float,
    params: VehicleParams,
    curves: ActuatorCurves,
    config: ControllerConfig | None = None,
    psi_des: float = 0.0,
) -> tuple[ControlInputs, ActuatorCommands, ControllerState]:
    """Single-shot execution of the full cascade (outer and inner together).

    Pure given explicit state in/out: returns the updated controller state
    without mutating the input.
    """
    controller = CascadedController(params, curves, config or ControllerConfig(outer_every=1),
                                    psi_des=psi_des)
    controller.state = ctl.copy()
    inputs, cmds = controller.step(ref, state, dt)
    return inputs, cmds, controller.state
