"""Closed-loop harness on the simplified translational dynamics.

Runs the real outer-loop code (errors, integrator with anti-windup, gain
law, thrust/attitude extraction) against v_dot = g e3 + a with the demanded
acceleration realized through the extracted attitude, i.e. perfect inner
tracking.  Used by the gnc tests and the hover-regulation acceptance
criterion.
"""

from __future__ import annotations

import numpy as np

from hoppersim.gnc import (
    ATT_INTEGRAL_LIMIT, POS_INTEGRAL_LIMIT, PositionGains, outer_loop_accel,
    thrust_and_attitude, tracking_errors,
)
from hoppersim.rigid_body import R_from_euler_zyx, RigidBodyState, VehicleParams
from hoppersim.trajectory import TrajectorySample


def simulate_simplified(
    p0: np.ndarray,
    duration: float,
    gains: PositionGains | None = None,
    params: VehicleParams | None = None,
    disturbance_force: np.ndarray | None = None,
    ref_point: np.ndarray | None = None,
    rate_hz: float = 50.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Regulate to a fixed reference point; returns (times, position errors)."""
    gains = gains or PositionGains()
    params = params or VehicleParams()
    ref_p = ref_point if ref_point is not None else np.zeros(3)
    dist = (disturbance_force / params.m) if disturbance_force is not None else np.zeros(3)
    dt = 1.0 / rate_hz
    state = RigidBodyState(p=np.asarray(p0, dtype=float).copy())
    integral = np.zeros(3)
    prev_e = None
    n = int(round(duration * rate_hz))
    times = np.zeros(n + 1)
    errors = np.zeros((n + 1, 3))
    errors[0] = ref_p - state.p
    for k in range(n):
        ref = TrajectorySample.hold(k * dt, ref_p)
        e_p, e_v = tracking_errors(ref, state)
        prev = prev_e if prev_e is not None else e_p
        integral = np.clip(integral + 0.5 * (prev + e_p) * dt,
                           -POS_INTEGRAL_LIMIT, POS_INTEGRAL_LIMIT)
        prev_e = e_p
        a = outer_loop_accel(e_p, e_v, integral, ref.acc, gains, params.g)
        u3, phi_d, theta_d = thrust_and_attitude(a, 0.0, params.m)
        R_d = R_from_euler_zyx(phi_d, theta_d, 0.0)
        accel = params.g * np.array([0.0, 0.0, 1.0]) + (u3 / params.m) * (R_d @ np.array([0.0, 0.0, 1.0]))
        accel = accel + dist
        state.p = state.p + state.v * dt + 0.5 * accel * dt * dt
        state.v = state.v + accel * dt
        times[k + 1] = (k + 1) * dt
        errors[k + 1] = ref_p - state.p
    return times, errors


__all__ = ["simulate_simplified", "ATT_INTEGRAL_LIMIT"]
