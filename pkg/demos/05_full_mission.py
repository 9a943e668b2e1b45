"""A complete scripted mission, plotted like a flight report.

Sync, arm, climb to 1.2 m, track the 60 s arena tour, land, disarm.  The
overview plots the flown path against the reference; the time-series panel
shows position, attitude and the four actuation channels with the mission
phases shaded.  Expect a centimetric tracking error and a visible
differential-thrust trim holding the yaw.
"""

import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hoppersim import SimConfig
from hoppersim.simulation import ScriptedEvent, Simulation

root = pathlib.Path(__file__).resolve().parents[1]
config = SimConfig(trajectory_file=str(root / "configs" / "arena_tour.waypoints.csv"),
                   initial_position=np.array([1.0, 0.5, 0.0]),
                   duration=90.0)
script = [
    ScriptedEvent(0.2, "offboard"),
    ScriptedEvent(0.5, "arm"),
    ScriptedEvent(1.0, "takeoff 1.2"),
    ScriptedEvent(8.0, "track"),
    ScriptedEvent(70.5, "land"),
]
sim = Simulation(config, script=script)
metrics = sim.run()
print(f"final state {metrics.final_state}, tracking RMSE {metrics.rmse_pos * 100:.2f} cm, "
      f"max error {metrics.max_pos_error * 100:.2f} cm")

recs = sim.records
t = np.array([r.t for r in recs])
p = np.stack([r.state.p for r in recs])
ref = np.stack([r.ref.pos for r in recs])
euler = np.stack([r.euler for r in recs])
cmds = np.array([[r.cmds.s_in, r.cmds.s_out, r.cmds.m_up, r.cmds.m_dn] for r in recs])
phase = [r.fsm_state.value for r in recs]

fig = plt.figure(figsize=(12, 9))
ax = fig.add_subplot(2, 2, 1, projection="3d")
track = np.array([ph == "Tracking" for ph in phase])
ax.plot(ref[track, 0], ref[track, 1], -ref[track, 2], "--", color="gray", label="reference")
ax.plot(p[:, 0], p[:, 1], -p[:, 2], color="C0", lw=1.0, label="flown")
ax.set_xlabel("x [m]"); ax.set_ylabel("y [m]"); ax.set_zlabel("alt [m]")
ax.set_title("mission overview")
ax.legend()

def shade_phases(axis):
    colors = {"Takeoff": "0.92", "Tracking": "0.85", "Landing": "0.92"}
    start = 0
    for i in range(1, len(phase)):
        if phase[i] != phase[start]:
            if phase[start] in colors:
                axis.axvspan(t[start], t[i], color=colors[phase[start]], zorder=0)
            start = i
    if phase[start] in colors:
        axis.axvspan(t[start], t[-1], color=colors[phase[start]], zorder=0)

ax2 = fig.add_subplot(2, 2, 2)
shade_phases(ax2)
for i, lbl in enumerate("xyz"):
    ax2.plot(t, p[:, i], label=f"{lbl}")
    ax2.plot(t, ref[:, i], ls="--", lw=0.8, color=f"C{i}")
ax2.set_title("position vs reference [m]")
ax2.legend(loc="upper right")

ax3 = fig.add_subplot(2, 2, 3)
shade_phases(ax3)
for i, lbl in enumerate(["roll", "pitch", "yaw"]):
    ax3.plot(t, np.degrees(euler[:, i]), label=lbl)
ax3.set_title("attitude [deg]")
ax3.set_xlabel("time [s]")
ax3.legend(loc="upper right")

ax4 = fig.add_subplot(2, 2, 4)
shade_phases(ax4)
ax4.plot(t, cmds[:, 0], label="servo in")
ax4.plot(t, cmds[:, 1], label="servo out")
ax4.plot(t, cmds[:, 2], label="motor up")
ax4.plot(t, cmds[:, 3], label="motor dn")
ax4.set_title("normalized actuator commands")
ax4.set_xlabel("time [s]")
ax4.legend(loc="upper right")

out = pathlib.Path(__file__).parent / "output"
out.mkdir(exist_ok=True)
fig.tight_layout()
fig.savefig(out / "05_full_mission.png", dpi=120)
print(f"wrote {out / '05_full_mission.png'}")
