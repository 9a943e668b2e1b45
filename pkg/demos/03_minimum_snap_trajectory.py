"""Planning a smooth arena tour through timestamped waypoints.

The planner fits degree-9 segments with continuous derivatives through
snap, choosing the free interior knot derivatives to minimize integrated
squared snap.  The top-down view shows the path threading the waypoints;
the profiles show how gentle the resulting velocity and acceleration stay,
which is what keeps the tracking controller inside its linear regime.
"""

import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hoppersim import ArenaBounds, Waypoint, discretize, plan_spline, spline_within_bounds

waypoints = [
    Waypoint(0.0, [1.0, 0.5, -1.2]),
    Waypoint(8.0, [2.0, -0.5, -1.4]),
    Waypoint(16.0, [0.5, -1.5, -1.0]),
    Waypoint(26.0, [-2.0, -1.0, -1.5]),
    Waypoint(36.0, [-2.5, 1.0, -1.2]),
    Waypoint(46.0, [-0.5, 1.8, -1.4]),
    Waypoint(54.0, [0.5, 1.0, -1.2]),
    Waypoint(60.0, [1.0, 0.5, -1.2]),
]
spline = plan_spline(waypoints)
samples = discretize(spline, 50.0)
print(f"{len(waypoints)} waypoints -> {len(samples)} samples, "
      f"inside arena: {spline_within_bounds(spline, ArenaBounds())}")

pos = np.stack([s.pos for s in samples])
vel = np.stack([s.vel for s in samples])
acc = np.stack([s.acc for s in samples])
t = np.array([s.t for s in samples])

fig = plt.figure(figsize=(11, 4.5))
ax1 = fig.add_subplot(1, 2, 1)
ax1.plot(pos[:, 0], pos[:, 1], lw=1.5)
wp = np.stack([w.p for w in waypoints])
ax1.plot(wp[:, 0], wp[:, 1], "o", color="C3", ms=5)
bounds = ArenaBounds()
ax1.add_patch(plt.Rectangle((bounds.lo[0], bounds.lo[1]),
                            bounds.hi[0] - bounds.lo[0], bounds.hi[1] - bounds.lo[1],
                            fill=False, ls="--", color="gray"))
ax1.set_xlabel("x [m]")
ax1.set_ylabel("y [m]")
ax1.set_title("top-down path inside the flight volume")
ax1.set_aspect("equal")

ax2 = fig.add_subplot(1, 2, 2)
ax2.plot(t, np.linalg.norm(vel, axis=1), label="|velocity| [m/s]")
ax2.plot(t, np.linalg.norm(acc, axis=1), label="|acceleration| [m/s^2]")
ax2.plot(t, -pos[:, 2], label="altitude [m]")
ax2.set_xlabel("time [s]")
ax2.set_title("reference profiles (continuous through snap)")
ax2.legend()

out = pathlib.Path(__file__).parent / "output"
out.mkdir(exist_ok=True)
fig.tight_layout()
fig.savefig(out / "03_minimum_snap.png", dpi=120)
print(f"peak speed {np.linalg.norm(vel, axis=1).max():.2f} m/s, "
      f"peak accel {np.linalg.norm(acc, axis=1).max():.2f} m/s^2")
print(f"wrote {out / '03_minimum_snap.png'}")
