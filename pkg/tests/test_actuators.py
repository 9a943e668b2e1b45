import numpy as np
import pytest

from hoppersim.actuators import (
    ActuatorCommands, ActuatorCurves, SERVO_RANGE, angle_to_servo_cmd,
    inverse_motor_allocation, motors_to_norm_yaw_accel, motors_to_thrust,
    servo_cmd_to_angle, servo_lag_step,
)

CURVES = ActuatorCurves()


class TestServoMap:
    def test_full_deflection(self):
        assert servo_cmd_to_angle(1.0) == pytest.approx(np.pi / 6, abs=0.0)

    def test_zero(self):
        assert servo_cmd_to_angle(0.0) == 0.0

    def test_inverse_linear(self):
        s, sat = angle_to_servo_cmd(-np.pi / 12)
        assert s == pytest.approx(-0.5, abs=1e-15)
        assert not sat

    def test_round_trip_identity(self):
        for gamma in np.linspace(-SERVO_RANGE, SERVO_RANGE, 41):
            s, sat = angle_to_servo_cmd(gamma)
            assert not sat
            assert servo_cmd_to_angle(s) == pytest.approx(gamma, abs=1e-15)

    def test_saturation_flagged_not_thrown(self):
        s, sat = angle_to_servo_cmd(0.8)
        assert sat and s == 1.0

    def test_forward_domain(self):
        with pytest.raises(ValueError):
            servo_cmd_to_angle(1.5)


class TestThrustMap:
    def test_hover_throttle(self):
        # inverse of the fit at T = m g: (15.696 + 0.3821) / 26.45 = 0.60786
        assert motors_to_thrust(0.60786, 0.60786) == pytest.approx(15.696, abs=5e-4)

    def test_idle_clamped_to_zero(self):
        assert motors_to_thrust(0.0, 0.0) == 0.0

    def test_full_throttle(self):
        assert motors_to_thrust(1.0, 1.0) == pytest.approx(26.068, abs=1e-3)

    def test_mean_only_dependence(self):
        assert motors_to_thrust(0.8, 0.4) == pytest.approx(motors_to_thrust(0.6, 0.6), abs=1e-12)


class TestYawMap:
    def test_offset_term(self):
        assert motors_to_norm_yaw_accel(0.0, 0.0) == pytest.approx(0.02432, abs=0.0)

    def test_linear_point(self):
        # dM = 0.1, Mbar = 0.6: 23.99*0.1 + 0.4031*0.6 + 0.02432
        assert motors_to_norm_yaw_accel(0.65, 0.55) == pytest.approx(2.66518, abs=1e-12)

    def test_root_at_zero_mean(self):
        dm = -CURVES.yaw_offset / CURVES.yaw_dm_gain
        assert dm == pytest.approx(-0.0010138, abs=1e-7)
        assert motors_to_norm_yaw_accel(dm / 2, -dm / 2) == pytest.approx(0.0, abs=1e-15)

    def test_mean_term_bounded(self):
        # for fixed dM the mean command moves the output by at most its gain
        rng = np.random.default_rng(4)
        for _ in range(100):
            dm = rng.uniform(-0.5, 0.5)
            vals = [motors_to_norm_yaw_accel(mb + dm / 2, mb - dm / 2)
                    for mb in np.linspace(max(0, -dm / 2), min(1, 1 - dm / 2), 20)]
            assert max(vals) - min(vals) <= CURVES.yaw_mbar_gain + 1e-12


class TestInverseAllocation:
    def test_hover_no_split(self):
        m_bar = (15.696 - CURVES.thrust_offset) / CURVES.thrust_gain
        tdn = CURVES.yaw_mbar_gain * m_bar + CURVES.yaw_offset
        m_up, m_dn, sat = inverse_motor_allocation(15.696, tdn)
        assert not sat
        assert m_up == pytest.approx(m_dn, abs=1e-15)
        assert m_up == pytest.approx(0.60786, abs=1e-4)
        assert motors_to_thrust(m_up, m_dn) == pytest.approx(15.696, abs=1e-12)
        assert motors_to_norm_yaw_accel(m_up, m_dn) == pytest.approx(tdn, abs=1e-12)

    def test_zero_thrust_fixed_point(self):
        m_bar = (0.0 - CURVES.thrust_offset) / CURVES.thrust_gain
        assert m_bar == pytest.approx(0.0144461, abs=1e-6)
        tdn = CURVES.yaw_offset + CURVES.yaw_mbar_gain * m_bar
        m_up, m_dn, sat = inverse_motor_allocation(0.0, tdn)
        assert not sat
        assert m_up == pytest.approx(m_bar, abs=1e-12)
        assert m_dn == pytest.approx(m_bar, abs=1e-12)

    def test_over_thrust_saturates(self):
        m_up, m_dn, sat = inverse_motor_allocation(30.0, 0.0)
        assert sat
        assert 0.0 <= m_up <= 1.0 and 0.0 <= m_dn <= 1.0

    def test_round_trip_unsaturated(self):
        rng = np.random.default_rng(12)
        done = 0
        while done < 2000:
            thrust = rng.uniform(0.5, 25.0)
            tdn = rng.uniform(-2.0, 2.0)
            m_up, m_dn, sat = inverse_motor_allocation(thrust, tdn)
            if sat:
                continue
            assert motors_to_thrust(m_up, m_dn) == pytest.approx(thrust, abs=1e-12)
            assert motors_to_norm_yaw_accel(m_up, m_dn) == pytest.approx(tdn, abs=1e-12)
            done += 1

    def test_outputs_always_in_range(self):
        rng = np.random.default_rng(13)
        for _ in range(2000):
            thrust = rng.uniform(0.0, 80.0)
            tdn = rng.uniform(-40.0, 40.0)
            m_up, m_dn, _ = inverse_motor_allocation(thrust, tdn)
            assert 0.0 <= m_up <= 1.0
            assert 0.0 <= m_dn <= 1.0

    def test_negative_thrust_rejected(self):
        with pytest.raises(ValueError):
            inverse_motor_allocation(-1.0, 0.0)


class TestServoLag:
    def test_zero_tau_passthrough(self):
        assert servo_lag_step(0.1, 0.4, 1e-3, 0.0) == 0.4

    def test_first_order_step_response(self):
        gamma = 0.0
        for _ in range(50):
            gamma = servo_lag_step(gamma, np.pi / 6, 1e-3, 0.05)
        expected = np.pi / 6 * (1.0 - np.exp(-1.0))
        assert gamma == pytest.approx(expected, rel=0.02)

    def test_steady_state_unchanged(self):
        assert servo_lag_step(0.2, 0.2, 1e-3, 0.05) == pytest.approx(0.2, abs=0.0)

    def test_slew_limit(self):
        out = servo_lag_step(0.0, 1.0, 1e-3, 0.0, slew_limit=np.deg2rad(600))
        assert out == pytest.approx(np.deg2rad(600) * 1e-3, abs=1e-15)


class TestTypes:
    def test_command_ranges(self):
        with pytest.raises(ValueError):
            ActuatorCommands(s_in=1.5)
        with pytest.raises(ValueError):
            ActuatorCommands(m_up=-0.2)

    def test_curve_validation(self):
        with pytest.raises(ValueError):
            ActuatorCurves(thrust_gain=-1.0)
