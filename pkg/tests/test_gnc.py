import numpy as np
import pytest

from hoppersim.actuators import ActuatorCurves, motors_to_norm_yaw_accel, motors_to_thrust
from hoppersim.gnc import (
    AttitudeDegeneracyError, AttitudeGains, CascadedController, ControllerConfig,
    ControllerState, PositionGains, allocate_4dof, attitude_pid, controller_step,
    outer_loop_accel, reconstruct_thrust_vector, thrust_and_attitude,
    tracking_errors, wrap_angle,
)
from hoppersim.rigid_body import (
    R_from_euler_zyx, RigidBodyState, VehicleParams, thrust_vector_body, total_torque,
)
from hoppersim.trajectory import TrajectorySample

from loops import simulate_simplified

PARAMS = VehicleParams()
CURVES = ActuatorCurves()
E3 = np.array([0.0, 0.0, 1.0])


def hold_ref(p, t=0.0):
    return TrajectorySample.hold(t, np.asarray(p, dtype=float))


class TestTrackingErrors:
    def test_zero_at_reference(self):
        state = RigidBodyState(p=np.array([1.0, 2.0, -1.0]))
        e_p, e_v = tracking_errors(hold_ref([1.0, 2.0, -1.0]), state)
        np.testing.assert_array_equal(e_p, np.zeros(3))
        np.testing.assert_array_equal(e_v, np.zeros(3))

    def test_simple_offset(self):
        e_p, e_v = tracking_errors(hold_ref([1.0, 0.0, 0.0]), RigidBodyState())
        np.testing.assert_array_equal(e_p, [1.0, 0.0, 0.0])
        np.testing.assert_array_equal(e_v, np.zeros(3))

    def test_matches_subtraction(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            d = np.zeros((5, 3))
            d[0] = rng.normal(0, 2, 3)
            d[1] = rng.normal(0, 1, 3)
            ref = TrajectorySample(0.0, d)
            state = RigidBodyState(p=rng.normal(0, 2, 3), v=rng.normal(0, 1, 3))
            e_p, e_v = tracking_errors(ref, state)
            np.testing.assert_array_equal(e_p, ref.pos - state.p)
            np.testing.assert_array_equal(e_v, ref.vel - state.v)


class TestOuterLoop:
    def test_hover_demand(self):
        a = outer_loop_accel(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3),
                             PositionGains(), 9.81)
        np.testing.assert_allclose(a, [0.0, 0.0, -9.81], atol=0.0)

    def test_proportional_term(self):
        a = outer_loop_accel(np.array([0.1, 0.0, 0.0]), np.zeros(3), np.zeros(3),
                             np.zeros(3), PositionGains(), 9.81)
        np.testing.assert_allclose(a, [0.3, 0.0, -9.81], atol=1e-15)

    def test_feedforward_superposition(self):
        a = outer_loop_accel(np.zeros(3), np.zeros(3), np.zeros(3),
                             np.array([0.0, 0.0, -1.0]), PositionGains(), 9.81)
        np.testing.assert_allclose(a, [0.0, 0.0, -10.81], atol=1e-15)


class TestThrustAndAttitude:
    def test_hover(self):
        u3, phi_d, theta_d = thrust_and_attitude(np.array([0.0, 0.0, -9.81]), 0.0, 1.6)
        assert u3 == pytest.approx(-15.696, abs=1e-12)
        assert phi_d == 0.0 and theta_d == 0.0

    def test_forward_acceleration_pitches_negative(self):
        a = np.array([1.0, 0.0, -9.81])
        u3, phi_d, theta_d = thrust_and_attitude(a, 0.0, 1.6)
        assert phi_d == 0.0
        assert theta_d == pytest.approx(-0.1016, abs=5e-5)
        R_d = R_from_euler_zyx(phi_d, theta_d, 0.0)
        realized = (u3 / 1.6) * (R_d @ E3) + 9.81 * E3
        np.testing.assert_allclose(realized, [1.0, 0.0, 0.0], atol=1e-9)

    def test_side_acceleration_rolls_positive(self):
        a = np.array([0.0, 1.0, -9.81])
        u3, phi_d, theta_d = thrust_and_attitude(a, 0.0, 1.6)
        assert theta_d == pytest.approx(0.0, abs=1e-15)
        assert phi_d == pytest.approx(0.1016, abs=5e-5)
        R_d = R_from_euler_zyx(phi_d, theta_d, 0.0)
        realized = (u3 / 1.6) * (R_d @ E3) + 9.81 * E3
        np.testing.assert_allclose(realized, [0.0, 1.0, 0.0], atol=1e-9)

    def test_consistency_any_yaw(self):
        rng = np.random.default_rng(41)
        for _ in range(300):
            a = np.array([rng.uniform(-3, 3), rng.uniform(-3, 3), -9.81 + rng.uniform(-3, 3)])
            psi = rng.uniform(-np.pi, np.pi)
            u3, phi_d, theta_d = thrust_and_attitude(a, psi, PARAMS.m)
            R_d = R_from_euler_zyx(phi_d, theta_d, psi)
            np.testing.assert_allclose((u3 / PARAMS.m) * (R_d @ E3), a, atol=1e-9)

    def test_free_fall_demand_rejected(self):
        with pytest.raises(AttitudeDegeneracyError):
            thrust_and_attitude(np.array([0.0, 0.0, 1e-3]), 0.0, 1.6)

    def test_over_tilt_rejected(self):
        with pytest.raises(AttitudeDegeneracyError):
            thrust_and_attitude(np.array([10.0, 0.0, 1.0]), 0.0, 1.6)


class TestAttitudePid:
    def test_zero_everything(self):
        out = attitude_pid(np.zeros(3), np.zeros(3), np.zeros(3), AttitudeGains())
        np.testing.assert_array_equal(out, np.zeros(3))

    def test_proportional(self):
        out = attitude_pid(np.array([0.1, 0.0, 0.0]), np.zeros(3), np.zeros(3), AttitudeGains())
        np.testing.assert_allclose(out, [0.07, 0.0, 0.0], atol=1e-15)

    def test_damping_only(self):
        out = attitude_pid(np.zeros(3), np.array([0.0, 0.0, 0.5]), np.zeros(3), AttitudeGains())
        np.testing.assert_allclose(out, [0.0, 0.0, -0.1], atol=1e-15)


class TestReconstruction:
    def test_pure_thrust(self):
        u = reconstruct_thrust_vector(np.zeros(3), -15.696, PARAMS)
        np.testing.assert_allclose(u, [0.0, 0.0, -15.696], atol=0.0)

    def test_roll_torque_maps_to_lateral_thrust(self):
        u = reconstruct_thrust_vector(np.array([0.07, 0.0, 0.0]), -15.696, PARAMS)
        assert u[1] == pytest.approx(-0.375 / 0.26 * 0.07, abs=1e-12)
        assert u[1] == pytest.approx(-0.100961, abs=1e-6)
        assert u[0] == 0.0

    def test_round_trip_through_total_torque(self):
        rng = np.random.default_rng(51)
        for _ in range(200):
            tau_norm = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0])
            u = reconstruct_thrust_vector(tau_norm, rng.uniform(-26, -4), PARAMS)
            tau = total_torque(u, 0.0, PARAMS)
            realized = PARAMS.J_inv @ tau
            np.testing.assert_allclose(realized[:2], tau_norm[:2], atol=1e-12)


class TestAllocate4Dof:
    def test_hover_allocation(self):
        inputs, flags = allocate_4dof(np.array([0.0, 0.0, -15.696]), np.zeros(3))
        assert inputs.thrust == pytest.approx(15.696, abs=1e-12)
        assert inputs.gamma_in == 0.0 and inputs.gamma_out == 0.0
        assert inputs.tau_delta_norm == 0.0
        assert not flags.any()

    def test_inverse_of_thrust_vector(self):
        u = thrust_vector_body(10.0, 0.2, -0.1)
        inputs, flags = allocate_4dof(u, np.zeros(3))
        assert inputs.thrust == pytest.approx(10.0, abs=1e-12)
        assert inputs.gamma_in == pytest.approx(0.2, abs=1e-12)
        assert inputs.gamma_out == pytest.approx(-0.1, abs=1e-12)
        assert not flags.any()

    def test_axial_projection(self):
        u = np.array([0.0, 0.0, -10.0])
        inputs, _ = allocate_4dof(u, np.array([0.3, -0.2, 0.05]))
        assert inputs.tau_delta_norm == 0.05

    def test_round_trip_random(self):
        rng = np.random.default_rng(61)
        for _ in range(10_000):
            T = rng.uniform(1e-6, 26.0)
            gi, go = rng.uniform(-np.pi / 6, np.pi / 6, 2)
            tdn = rng.uniform(-2.0, 2.0)
            u = thrust_vector_body(T, gi, go)
            inputs, flags = allocate_4dof(u, np.array([0.0, 0.0, tdn]))
            assert not flags.any()
            assert abs(inputs.thrust - T) <= 1e-12 * max(T, 1.0)
            assert abs(inputs.gamma_in - gi) <= 1e-12
            assert abs(inputs.gamma_out - go) <= 1e-12
            assert abs(inputs.tau_delta_norm - tdn) <= 1e-12

    def test_saturation_flagged(self):
        # u2/||u|| = 8/12.8 demands ~38.7 deg of inner gimbal
        inputs, flags = allocate_4dof(np.array([0.0, 8.0, -10.0]), np.zeros(3))
        assert flags.servo_in
        assert abs(inputs.gamma_in) == pytest.approx(np.pi / 6, abs=1e-12)

    def test_zero_thrust_rejected(self):
        with pytest.raises(ValueError):
            allocate_4dof(np.zeros(3), np.zeros(3))


class TestControllerStep:
    def hover_state(self):
        return RigidBodyState(p=np.array([0.0, 0.0, -1.2]))

    def test_exact_hover_commands(self):
        ref = hold_ref([0.0, 0.0, -1.2])
        inputs, cmds, _ = controller_step(ref, self.hover_state(), ControllerState(),
                                          0.02, PARAMS, CURVES)
        assert cmds.m_up == pytest.approx(0.60786, abs=0.01)
        assert cmds.m_dn == pytest.approx(0.60786, abs=0.01)
        assert abs(cmds.s_in) < 1e-9 and abs(cmds.s_out) < 1e-9
        assert inputs.thrust == pytest.approx(PARAMS.m * PARAMS.g, abs=1e-9)
        # mean command preserved exactly through the symmetric split
        assert 0.5 * (cmds.m_up + cmds.m_dn) == pytest.approx(0.607868, abs=1e-5)

    def test_higher_reference_raises_mean_throttle(self):
        ref_hover = hold_ref([0.0, 0.0, -1.2])
        ref_up = hold_ref([0.0, 0.0, -1.3])
        _, cmds_h, _ = controller_step(ref_hover, self.hover_state(), ControllerState(),
                                       0.02, PARAMS, CURVES)
        _, cmds_u, _ = controller_step(ref_up, self.hover_state(), ControllerState(),
                                       0.02, PARAMS, CURVES)
        assert 0.5 * (cmds_u.m_up + cmds_u.m_dn) > 0.5 * (cmds_h.m_up + cmds_h.m_dn)

    def test_yaw_step_shifts_differential(self):
        ref = hold_ref([0.0, 0.0, -1.2])
        _, cmds_trim, _ = controller_step(ref, self.hover_state(), ControllerState(),
                                          0.02, PARAMS, CURVES, psi_des=0.0)
        _, cmds_step, _ = controller_step(ref, self.hover_state(), ControllerState(),
                                          0.02, PARAMS, CURVES, psi_des=0.1)
        dm_trim = cmds_trim.m_up - cmds_trim.m_dn
        dm_step = cmds_step.m_up - cmds_step.m_dn
        # positive yaw error must shift the differential positive of its trim
        assert dm_step - dm_trim > 0.0

    def test_degenerate_demand_holds_last(self):
        d = np.zeros((5, 3))
        d[0] = [0.0, 0.0, -1.2]
        d[2] = [0.0, 0.0, 9.81]  # feedforward cancels gravity: free-fall demand
        ref = TrajectorySample(0.0, d)
        inputs, cmds, state = controller_step(ref, self.hover_state(), ControllerState(),
                                              0.02, PARAMS, CURVES)
        assert state.hold_last
        assert inputs.thrust > 0.0

    def test_deterministic_replay(self):
        ref = hold_ref([0.3, -0.2, -1.0])
        state = RigidBodyState(p=np.array([0.1, 0.1, -1.1]), v=np.array([0.05, 0.0, 0.0]),
                               R=R_from_euler_zyx(0.02, -0.03, 0.2),
                               omega=np.array([0.01, 0.02, -0.03]))
        ctl = ControllerState(integral_ep=np.array([0.1, 0.0, -0.05]))
        out1 = controller_step(ref, state, ctl, 0.02, PARAMS, CURVES)
        out2 = controller_step(ref, state, ctl, 0.02, PARAMS, CURVES)
        assert out1[0] == out2[0]
        assert out1[1] == out2[1]
        np.testing.assert_array_equal(out1[2].integral_ep, out2[2].integral_ep)

    def test_input_state_not_mutated(self):
        ref = hold_ref([0.3, 0.0, -1.0])
        ctl = ControllerState()
        controller_step(ref, self.hover_state(), ctl, 0.02, PARAMS, CURVES)
        np.testing.assert_array_equal(ctl.integral_ep, np.zeros(3))


class TestCascadedController:
    def test_outer_rate_division(self):
        ctl = CascadedController(PARAMS, CURVES, ControllerConfig(outer_every=5))
        ref = hold_ref([0.0, 0.0, -1.2])
        state = RigidBodyState(p=np.array([0.0, 0.0, -1.2]))
        lam_ds = []
        for _ in range(10):
            ctl.step(ref, state, 0.004)
            lam_ds.append(ctl._lam_d.copy())
        # outer outputs held constant between executions
        for k in range(1, 5):
            np.testing.assert_array_equal(lam_ds[k], lam_ds[0])

    def test_integral_freeze_on_saturation(self):
        ctl = CascadedController(PARAMS, CURVES, ControllerConfig(outer_every=1))
        ref = hold_ref([0.0, 0.0, -30.0])  # demands far beyond thrust authority
        state = RigidBodyState(p=np.array([0.0, 0.0, -1.0]))
        for _ in range(3):
            ctl.step(ref, state, 0.02)
        assert ctl.saturation.thrust
        frozen = ctl.state.integral_ep.copy()
        ctl.step(ref, state, 0.02)
        np.testing.assert_array_equal(ctl.state.integral_ep, frozen)


class TestSimplifiedClosedLoop:
    def test_regulation_decay(self):
        times, errors = simulate_simplified(np.array([0.3, 0.0, -1.0]), 20.0,
                                            ref_point=np.array([0.0, 0.0, -1.0]))
        norms = np.linalg.norm(errors, axis=1)
        assert norms[times >= 10.0].max() < 0.01
        # Lyapunov-style decay after the transient: the error envelope shrinks
        late = norms[times >= 4.0]
        windows = [late[i:i + 100].max() for i in range(0, len(late) - 100, 100)]
        assert all(b <= a + 1e-12 for a, b in zip(windows, windows[1:]))

    def test_constant_disturbance_rejected(self):
        times, errors = simulate_simplified(np.zeros(3), 30.0,
                                            disturbance_force=np.array([0.2, 0.0, 0.0]),
                                            ref_point=np.zeros(3))
        norms = np.linalg.norm(errors, axis=1)
        assert norms[times >= 28.0].max() < 0.01


class TestWrap:
    def test_wrap_angle(self):
        assert wrap_angle(np.pi) == pytest.approx(np.pi)
        assert wrap_angle(-np.pi) == pytest.approx(np.pi)
        assert wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
        assert wrap_angle(0.1) == pytest.approx(0.1)
