"""6-DOF rigid-body dynamics of a gimballed, thrust-vectored hopper.

Conventions
-----------
Inertial frame: NED (z positive down).  Body frame: z axis through the
nozzle, so at upright hover the body z axis points down and the nominal
thrust vector has a negative third component.  ``R`` rotates body-frame
vectors into the inertial frame.

The four control degrees of freedom are the two gimbal angles, the total
thrust magnitude and the normalized differential-thrust torque (axial
torque divided by the axial inertia).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

E3 = np.array([0.0, 0.0, 1.0])
GIMBAL_LIMIT = np.pi / 6  # servo travel, rad
_ZERO_THRUST_EPS = 1e-9   # below this the thrust direction defaults to -e3


class IntegrationFault(RuntimeError):
    """Raised when an integration step produces a non-finite state."""


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: skew(a) @ b == np.cross(a, b)."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def _cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # np.cross carries too much dispatch overhead for the 1 kHz loop
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def _inv3(M: np.ndarray) -> np.ndarray:
    """Closed-form 3x3 inverse (adjugate over determinant)."""
    a, b, c = M[0]
    d, e, f = M[1]
    g, h, i = M[2]
    A = e * i - f * h
    B = f * g - d * i
    C = d * h - e * g
    det = a * A + b * B + c * C
    if abs(det) < 1e-12:
        raise ValueError("degenerate rotation matrix (rank < 3)")
    adj = np.array([
        [A, c * h - b * i, b * f - c * e],
        [B, a * i - c * g, c * d - a * f],
        [C, b * g - a * h, a * e - b * d],
    ])
    return adj / det


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def so3_defect(R: np.ndarray) -> float:
    """Frobenius distance of R^T R from the identity."""
    return float(np.linalg.norm(R.T @ R - np.eye(3)))


def reorthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix back onto SO(3).

    Two iterations of the averaging update ``R <- (R + R^-T)/2``, which
    converges quadratically to the polar factor.  Input must be within
    ~1e-3 of SO(3) and full rank.
    """
    if not np.all(np.isfinite(R)):
        raise ValueError("non-finite rotation matrix")
    out = R
    for _ in range(2):
        out = 0.5 * (out + _inv3(out).T)
    if so3_defect(out) > 1e-9 or np.linalg.det(out) < 0.0:
        raise ValueError("matrix too far from SO(3) to reorthonormalize")
    return out


def euler_zyx_from_R(R: np.ndarray) -> tuple[float, float, float]:
    """Extract ZYX Euler angles (roll, pitch, yaw) with R = Rz Ry Rx.

    Raises ValueError within 1e-6 rad of the pitch singularity.
    """
    s_theta = -R[2, 0]
    if abs(s_theta) >= np.sin(np.pi / 2 - 1e-6):
        raise ValueError("pitch within 1e-6 of +/-pi/2: Euler extraction undefined")
    theta = np.arcsin(s_theta)
    phi = np.arctan2(R[2, 1], R[2, 2])
    psi = np.arctan2(R[1, 0], R[0, 0])
    return float(phi), float(theta), float(psi)


def R_from_euler_zyx(phi: float, theta: float, psi: float) -> np.ndarray:
    """Compose R = Rz(psi) @ Ry(theta) @ Rx(phi)."""
    return rot_z(psi) @ rot_y(theta) @ rot_x(phi)


@dataclass
class VehicleParams:
    """Mass and geometry of the vehicle.

    ``L`` is the distance from the gimbal pivot to the center of mass.
    The inertia tensor is idealized axisymmetric: diag(j_perp, j_perp, j_zz).
    """

    m: float = 1.6          # kg
    j_perp: float = 0.375   # kg m^2, radial
    j_zz: float = 0.01      # kg m^2, axial
    L: float = 0.26         # m
    g: float = 9.81         # m/s^2

    def __post_init__(self):
        for name in ("m", "j_perp", "j_zz", "L", "g"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def J(self) -> np.ndarray:
        return np.diag([self.j_perp, self.j_perp, self.j_zz])

    @property
    def J_inv(self) -> np.ndarray:
        return np.diag([1.0 / self.j_perp, 1.0 / self.j_perp, 1.0 / self.j_zz])


@dataclass
class ControlInputs:
    """The four control degrees of freedom."""

    gamma_in: float = 0.0        # rad
    gamma_out: float = 0.0       # rad
    thrust: float = 0.0          # N, magnitude >= 0
    tau_delta_norm: float = 0.0  # rad/s^2, differential torque / j_zz

    def __post_init__(self):
        if self.thrust < 0.0:
            raise ValueError("thrust must be non-negative")
        if abs(self.gamma_in) > GIMBAL_LIMIT + 1e-12 or abs(self.gamma_out) > GIMBAL_LIMIT + 1e-12:
            raise ValueError("gimbal angle outside +/-30 deg")


@dataclass
class RigidBodyState:
    """Full vehicle state: inertial position/velocity, attitude, body rates."""

    p: np.ndarray = field(default_factory=lambda: np.zeros(3))      # m
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))      # m/s
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))  # rad/s, body

    def copy(self) -> "RigidBodyState":
        return RigidBodyState(self.p.copy(), self.v.copy(), self.R.copy(), self.omega.copy())

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.p))
            and np.all(np.isfinite(self.v))
            and np.all(np.isfinite(self.R))
            and np.all(np.isfinite(self.omega))
        )


def thrust_vector_body(thrust: float, gamma_in: float, gamma_out: float) -> np.ndarray:
    """Body-frame thrust vector for given magnitude and gimbal angles.

    u = -T [sin(g_out) cos(g_in), -sin(g_in), cos(g_out) cos(g_in)], so
    ||u|| = T and zero gimbal gives pure -e3 thrust.
    """
    if thrust < 0.0:
        raise ValueError("thrust must be non-negative")
    if abs(gamma_in) > GIMBAL_LIMIT + 1e-12 or abs(gamma_out) > GIMBAL_LIMIT + 1e-12:
        raise ValueError("gimbal angle outside +/-30 deg")
    ci, si = np.cos(gamma_in), np.sin(gamma_in)
    co, so = np.cos(gamma_out), np.sin(gamma_out)
    return -thrust * np.array([so * ci, -si, co * ci])


def thrust_direction(u: np.ndarray) -> np.ndarray:
    """Unit thrust direction; -e3 in the zero-thrust limit."""
    n = np.linalg.norm(u)
    if n < _ZERO_THRUST_EPS:
        return -E3
    return u / n


def total_torque(u: np.ndarray, tau_delta_norm: float, params: VehicleParams) -> np.ndarray:
    """Body torque from thrust vectoring plus the differential-thrust term.

    tau = L e3 x u + (j_zz tau_delta_norm) u/||u||.  The vectoring part has
    no axial component, so the axial channel is exclusively differential.
    """
    return params.L * _cross3(E3, u) + (params.j_zz * tau_delta_norm) * thrust_direction(u)


@dataclass
class StateDerivative:
    dp: np.ndarray
    dv: np.ndarray
    dR: np.ndarray
    domega: np.ndarray


def state_derivative(
    s: RigidBodyState,
    u: np.ndarray,
    tau: np.ndarray,
    params: VehicleParams,
    tau_delta_norm: float = 0.0,
    f_ext: np.ndarray | None = None,
) -> StateDerivative:
    """Continuous-time derivative of the rigid-body state.

    dv strips the differential part out of tau, leaving the thrust-vectoring
    torque, whose lateral force it reconstructs; the coupling force is a
    body-frame quantity and is rotated into the inertial frame, which makes
    dv identical to g e3 + R u / m whenever tau is consistent with u.
    ``f_ext`` is an optional inertial disturbance force in newtons.
    """
    m, L = params.m, params.L
    dp = s.v.copy()
    coupling = tau - (params.j_zz * tau_delta_norm) * thrust_direction(u)
    dv = params.g * E3 + (u[2] / m) * s.R[:, 2] - (1.0 / (m * L)) * (s.R @ _cross3(E3, coupling))
    if f_ext is not None:
        dv = dv + f_ext / m
    dR = s.R @ skew(s.omega)
    w = s.omega
    jw = np.array([params.j_perp * w[0], params.j_perp * w[1], params.j_zz * w[2]])
    rhs = tau - _cross3(w, jw)
    domega = np.array([rhs[0] / params.j_perp, rhs[1] / params.j_perp, rhs[2] / params.j_zz])
    return StateDerivative(dp, dv, dR, domega)


def rk4_step(
    s: RigidBodyState,
    u: np.ndarray,
    tau: np.ndarray,
    params: VehicleParams,
    dt: float,
    tau_delta_norm: float = 0.0,
    f_ext: np.ndarray | None = None,
) -> RigidBodyState:
    """Classical RK4 update with inputs held constant over the step.

    The attitude matrix is re-orthonormalized after the update.  dt is
    capped at 10 ms to keep the fixed-step error budget.
    """
    if not 0.0 < dt <= 0.01:
        raise ValueError("dt must be in (0, 0.01] s")

    def deriv(st: RigidBodyState) -> StateDerivative:
        return state_derivative(st, u, tau, params, tau_delta_norm, f_ext)

    def advance(st: RigidBodyState, d: StateDerivative, h: float) -> RigidBodyState:
        return RigidBodyState(
            st.p + h * d.dp, st.v + h * d.dv, st.R + h * d.dR, st.omega + h * d.domega
        )

    k1 = deriv(s)
    k2 = deriv(advance(s, k1, dt / 2))
    k3 = deriv(advance(s, k2, dt / 2))
    k4 = deriv(advance(s, k3, dt))
    out = RigidBodyState(
        s.p + dt / 6 * (k1.dp + 2 * k2.dp + 2 * k3.dp + k4.dp),
        s.v + dt / 6 * (k1.dv + 2 * k2.dv + 2 * k3.dv + k4.dv),
        s.R + dt / 6 * (k1.dR + 2 * k2.dR + 2 * k3.dR + k4.dR),
        s.omega + dt / 6 * (k1.domega + 2 * k2.domega + 2 * k3.domega + k4.domega),
    )
    if not out.is_finite():
        raise IntegrationFault("non-finite state after RK4 step")
    out.R = reorthonormalize(out.R)
    return out
