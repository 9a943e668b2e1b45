"""Torque-free tumble: the integrator conserves what physics conserves.

Spins the vehicle up about all three axes, integrates 10 s with motors off,
and plots the body rates together with the drift of inertial angular
momentum and rotational kinetic energy.  The drift stays at rounding level,
which is what qualifies the fixed-step integrator for closed-loop work.
"""

import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hoppersim import RigidBodyState, VehicleParams, rk4_step

params = VehicleParams()
state = RigidBodyState(omega=np.array([0.1, 0.2, 3.0]))
J = params.J

h0 = state.R @ (J @ state.omega)
e0 = 0.5 * state.omega @ (J @ state.omega)

dt = 1e-3
steps = 10_000
times, rates, h_drift, e_drift = [], [], [], []
for k in range(steps):
    state = rk4_step(state, np.zeros(3), np.zeros(3), params, dt)
    if k % 10 == 0:
        times.append((k + 1) * dt)
        rates.append(state.omega.copy())
        h = state.R @ (J @ state.omega)
        h_drift.append(np.linalg.norm(h - h0) / np.linalg.norm(h0))
        e_drift.append(abs(0.5 * state.omega @ (J @ state.omega) - e0) / e0)

rates = np.array(rates)
fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
for i, label in enumerate(["wx", "wy", "wz"]):
    ax1.plot(times, rates[:, i], label=label)
ax1.set_ylabel("body rate [rad/s]")
ax1.legend(loc="center right")
ax1.set_title("free tumble: gyroscopic precession of the radial rates")

ax2.semilogy(times, np.maximum(h_drift, 1e-18), label="|dH|/|H|")
ax2.semilogy(times, np.maximum(e_drift, 1e-18), label="|dE|/E")
ax2.axhline(1e-6, color="k", ls="--", lw=0.8, label="budget 1e-6")
ax2.set_xlabel("time [s]")
ax2.set_ylabel("relative drift")
ax2.legend(loc="center right")

out = pathlib.Path(__file__).parent / "output"
out.mkdir(exist_ok=True)
fig.tight_layout()
fig.savefig(out / "01_free_tumble.png", dpi=120)
print(f"final drift: H {h_drift[-1]:.2e}, E {e_drift[-1]:.2e}")
print(f"wrote {out / '01_free_tumble.png'}")
