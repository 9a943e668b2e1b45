"""The identified actuator maps and their inversion.

Left: thrust against mean motor command, with the hover point at roughly
60 % throttle.  Right: normalized yaw torque against the differential
command for a few mean-command levels; the curves nearly coincide because
the differential gain dominates the mean-command term by two orders of
magnitude.  The round-trip through the inverse allocation recovers the
demanded pair exactly whenever nothing saturates.
"""

import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hoppersim import (
    ActuatorCurves, VehicleParams, inverse_motor_allocation,
    motors_to_norm_yaw_accel, motors_to_thrust,
)

curves = ActuatorCurves()
params = VehicleParams()

m_bar = np.linspace(0.0, 1.0, 200)
thrust = [motors_to_thrust(m, m, curves) for m in m_bar]

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
ax1.plot(m_bar, thrust)
hover_T = params.m * params.g
hover_m = (hover_T - curves.thrust_offset) / curves.thrust_gain
ax1.plot([hover_m], [hover_T], "o", color="C3")
ax1.annotate(f"hover: {hover_m:.3f} @ {hover_T:.2f} N", (hover_m, hover_T),
             textcoords="offset points", xytext=(10, -12))
ax1.set_xlabel("mean motor command")
ax1.set_ylabel("thrust [N]")
ax1.set_title("thrust map (clamped at zero)")

dm = np.linspace(-0.3, 0.3, 200)
for mb in (0.2, 0.6, 1.0):
    tdn = [motors_to_norm_yaw_accel(mb + d / 2, mb - d / 2, curves) for d in dm]
    ax2.plot(dm, tdn, label=f"mean {mb:.1f}")
ax2.set_xlabel("differential command")
ax2.set_ylabel("normalized yaw torque [rad/s^2]")
ax2.set_title("differential-thrust map")
ax2.legend()

out = pathlib.Path(__file__).parent / "output"
out.mkdir(exist_ok=True)
fig.tight_layout()
fig.savefig(out / "02_actuator_maps.png", dpi=120)

m_up, m_dn, sat = inverse_motor_allocation(hover_T, 0.3, curves)
print(f"demand (T={hover_T:.3f} N, tau={0.3}) -> m_up={m_up:.5f}, m_dn={m_dn:.5f}, sat={sat}")
print(f"round trip: T={motors_to_thrust(m_up, m_dn, curves):.6f} N, "
      f"tau={motors_to_norm_yaw_accel(m_up, m_dn, curves):.6f} rad/s^2")
print(f"wrote {out / '02_actuator_maps.png'}")
