"""Thrust-vectored hopper simulation and GNC stack."""

from .actuators import (
    ActuatorCommands, ActuatorCurves, SaturationFlags, angle_to_servo_cmd,
    inverse_motor_allocation, motors_to_norm_yaw_accel, motors_to_thrust,
    servo_cmd_to_angle, servo_lag_step,
)
from .config import SimConfig, load_config
from .gnc import (
    AttitudeGains, CascadedController, ControllerConfig, ControllerState,
    PositionGains, allocate_4dof, attitude_pid, controller_step,
    outer_loop_accel, reconstruct_thrust_vector, thrust_and_attitude,
    tracking_errors,
)
from .mission_fsm import (
    HeartbeatMonitor, MissionAction, MissionEvent, MissionState, fsm_step,
    transition_table_export, validate_command,
)
from .rigid_body import (
    ControlInputs, RigidBodyState, VehicleParams, R_from_euler_zyx,
    euler_zyx_from_R, reorthonormalize, rk4_step, state_derivative,
    thrust_vector_body, total_torque,
)
from .simulation import RunMetrics, Simulation, compute_metrics, sensor_channel
from .trajectory import (
    ArenaBounds, PolySpline, TrajectorySample, Waypoint, discretize,
    plan_spline, sample, spline_within_bounds,
)

__version__ = "0.1.0"
