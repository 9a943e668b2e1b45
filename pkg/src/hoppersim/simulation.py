"""Closed-loop fixed-step mission runner.

One executor owns the vehicle state, the controller, the FSM and all
timers; network traffic enters only through an inbound queue and leaves
through a telemetry callback, so scripted headless runs and live served
runs share the same deterministic loop.  Dynamics integrate at the sim
rate, the controller at its inner/outer rates, telemetry at its own rate,
all integer divisors of the sim rate.
"""

from __future__ import annotations

import json
import queue
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import actuators, trajectory
from .actuators import ActuatorCommands
from .config import SimConfig
from .gnc import CascadedController
from .mission_fsm import (
    CommandRejected, FlightStatus, HeartbeatMonitor, MissionAction, MissionEvent,
    MissionState, TERMINAL_STATES, ValidatedCommand, fsm_step, validate_command,
)
from .rigid_body import (
    ControlInputs, IntegrationFault, R_from_euler_zyx, RigidBodyState,
    euler_zyx_from_R, rk4_step, thrust_vector_body, total_torque,
)
from .trajectory import PolySpline, TrajectorySample, load_waypoints_csv, plan_spline

FLYING_STATES = frozenset({MissionState.TAKEOFF, MissionState.TRACKING,
                           MissionState.LANDING, MissionState.ABORTED})

TOUCHDOWN_ALT = 0.02     # m
TOUCHDOWN_SPEED = 0.05   # m/s
ALT_HOLD_BAND = 0.05     # m
ALT_HOLD_TIME = 1.0      # s


def sensor_channel(state: RigidBodyState, noise_pos_std: float,
                   noise_att_std_rad: float, rng: np.random.Generator) -> RigidBodyState:
    """Measured state: additive white Gaussian noise on position and attitude.

    Velocity and body rates pass through.  Zero standard deviations bypass
    the generator entirely so noiseless runs draw nothing from the stream.
    """
    out = state.copy()
    if noise_pos_std > 0.0:
        out.p = out.p + rng.normal(0.0, noise_pos_std, 3)
    if noise_att_std_rad > 0.0:
        phi, theta, psi = euler_zyx_from_R(state.R)
        d = rng.normal(0.0, noise_att_std_rad, 3)
        out.R = R_from_euler_zyx(phi + d[0], theta + d[1], psi + d[2])
    return out


@dataclass
class TelemetryRecord:
    """One telemetry tick: truth state, reference, commands, FSM phase."""

    t: float
    state: RigidBodyState
    euler: np.ndarray
    ref: TrajectorySample
    inputs: ControlInputs
    cmds: ActuatorCommands
    fsm_state: MissionState
    e_p: np.ndarray
    lam_d: np.ndarray

    def row(self) -> str:
        vals = [
            self.t, *self.state.p, *self.state.v, *self.euler, *self.state.omega,
            *self.ref.derivs.ravel(),
            self.inputs.gamma_in, self.inputs.gamma_out, self.inputs.thrust,
            self.inputs.tau_delta_norm,
            self.cmds.s_in, self.cmds.s_out, self.cmds.m_up, self.cmds.m_dn,
        ]
        cells = [str(float(v)) for v in vals]
        cells.append(self.fsm_state.value)
        cells.extend(str(float(v)) for v in self.e_p)
        return ",".join(cells)

    def payload(self) -> dict:
        """Wire-protocol telemetry payload (mirrors the CSV fields)."""
        return {
            "t": self.t,
            "p": [float(x) for x in self.state.p],
            "v": [float(x) for x in self.state.v],
            "euler": [float(x) for x in self.euler],
            "omega": [float(x) for x in self.state.omega],
            "ref": [[float(x) for x in row] for row in self.ref.derivs],
            "inputs": {
                "gamma_in": float(self.inputs.gamma_in),
                "gamma_out": float(self.inputs.gamma_out),
                "thrust": float(self.inputs.thrust),
                "tau_delta_norm": float(self.inputs.tau_delta_norm),
            },
            "cmds": {
                "s_in": float(self.cmds.s_in), "s_out": float(self.cmds.s_out),
                "m_up": float(self.cmds.m_up), "m_dn": float(self.cmds.m_dn),
            },
            "fsm_state": self.fsm_state.value,
            "e_p": [float(x) for x in self.e_p],
        }


TELEMETRY_CSV_HEADER = (
    "t,px,py,pz,vx,vy,vz,roll,pitch,yaw,wx,wy,wz,"
    "ref_px,ref_py,ref_pz,ref_vx,ref_vy,ref_vz,ref_ax,ref_ay,ref_az,"
    "ref_jx,ref_jy,ref_jz,ref_sx,ref_sy,ref_sz,"
    "gamma_in,gamma_out,thrust,tau_delta,s_in,s_out,m_up,m_dn,fsm_state,epx,epy,epz"
)


@dataclass
class RunMetrics:
    """Tracking-phase error statistics and run bookkeeping."""

    final_state: str = MissionState.INIT.value
    fault: bool = False
    sim_time: float = 0.0
    rmse_pos: float = 0.0
    rmse_pos_axes: np.ndarray = field(default_factory=lambda: np.zeros(3))
    max_pos_error: float = 0.0
    rmse_att: float = 0.0
    rmse_att_axes: np.ndarray = field(default_factory=lambda: np.zeros(3))
    saturation_duty: float = 0.0
    phase_durations: dict = field(default_factory=dict)
    dynamics_steps: int = 0
    inner_steps: int = 0
    outer_steps: int = 0
    outer_gaps: list = field(default_factory=list)
    tracking_records: int = 0

    @property
    def exit_code(self) -> int:
        if self.fault or self.final_state == MissionState.KILLED.value:
            return 2
        if self.final_state == MissionState.ENDED.value:
            return 0
        return 1

    def to_dict(self) -> dict:
        return {
            "final_state": self.final_state,
            "fault": self.fault,
            "sim_time": self.sim_time,
            "rmse_pos": self.rmse_pos,
            "rmse_pos_axes": [float(x) for x in self.rmse_pos_axes],
            "max_pos_error": self.max_pos_error,
            "rmse_att": self.rmse_att,
            "rmse_att_axes": [float(x) for x in self.rmse_att_axes],
            "saturation_duty": self.saturation_duty,
            "phase_durations": self.phase_durations,
            "dynamics_steps": self.dynamics_steps,
            "inner_steps": self.inner_steps,
            "outer_steps": self.outer_steps,
            "outer_gaps": self.outer_gaps,
            "tracking_records": self.tracking_records,
            "exit_code": self.exit_code,
        }


def compute_metrics(records: list[TelemetryRecord],
                    phase: MissionState = MissionState.TRACKING) -> RunMetrics:
    """Error statistics over the requested phase (single pass over records)."""
    in_phase = [r for r in records if r.fsm_state is phase]
    if not in_phase:
        raise ValueError(f"no telemetry records in phase {phase.value}")
    m = RunMetrics()
    err = np.stack([r.e_p for r in in_phase])
    m.rmse_pos = float(np.sqrt(np.mean(np.sum(err ** 2, axis=1))))
    m.rmse_pos_axes = np.sqrt(np.mean(err ** 2, axis=0))
    m.max_pos_error = float(np.max(np.linalg.norm(err, axis=1)))
    att_err = np.stack([r.lam_d - r.euler for r in in_phase])
    att_err[:, 2] = (att_err[:, 2] + np.pi) % (2 * np.pi) - np.pi
    m.rmse_att = float(np.sqrt(np.mean(np.sum(att_err ** 2, axis=1))))
    m.rmse_att_axes = np.sqrt(np.mean(att_err ** 2, axis=0))
    m.tracking_records = len(in_phase)
    return m


@dataclass
class ScriptedEvent:
    t: float
    raw: str


def load_event_script(path: str | Path) -> list[ScriptedEvent]:
    """Parse an event script: lines of ``t_offset verb [args]``, # comments."""
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(None, 1)
            out.append(ScriptedEvent(float(parts[0]), parts[1] if len(parts) > 1 else ""))
    out.sort(key=lambda e: e.t)
    return out


class AutopilotShim:
    """Simulated autopilot sync: requests are acknowledged after a latency."""

    _ACKS = {
        MissionAction.REQUEST_OFFBOARD: MissionEvent.P1_OFFBOARD_ACK,
        MissionAction.REQUEST_ARM: MissionEvent.P2_ARM_ACK,
        MissionAction.REQUEST_DISARM: MissionEvent.P3_DISARM_ACK,
    }

    def __init__(self, latency: float):
        self.latency = latency
        self._pending: list[tuple[float, MissionEvent]] = []

    def request(self, action: MissionAction, t: float) -> None:
        self._pending.append((t + self.latency, self._ACKS[action]))

    def poll(self, t: float) -> list[MissionEvent]:
        due = [ev for when, ev in self._pending if when <= t]
        self._pending = [(when, ev) for when, ev in self._pending if when > t]
        return due


@dataclass
class CommandMsg:
    """Inbound message from the network layer (or an internal control note)."""

    kind: str                    # "command" | "commander_connected" | "commander_disconnected"
    raw: str = ""
    on_result: object = None     # callable(ok: bool, detail: str) or None


class Simulation:
    """Owns the closed loop; run() executes the mission to termination."""

    def __init__(self, config: SimConfig, script: list[ScriptedEvent] | None = None,
                 out_dir: str | Path | None = None,
                 inbox: "queue.Queue[CommandMsg] | None" = None,
                 on_telemetry=None, pace_realtime: bool = False):
        self.config = config
        self.script = list(script or [])
        self.inbox = inbox
        self.on_telemetry = on_telemetry
        self.pace_realtime = pace_realtime
        self.out_dir = Path(out_dir) if out_dir is not None else None

        self.state = RigidBodyState(p=config.initial_position.copy())
        self.fsm_state = MissionState.INIT
        self.controller = CascadedController(config.vehicle, config.curves,
                                             config.controller_config)
        self.rng = np.random.default_rng(config.seed)
        self.shim = AutopilotShim(config.timeouts.shim_latency)
        self.heartbeat = HeartbeatMonitor(config.timeouts.heartbeat)

        self.mission_spline: PolySpline | None = None
        if config.trajectory_file:
            self.mission_spline = plan_spline(load_waypoints_csv(config.trajectory_file))
        self.active_spline: PolySpline | None = None
        self.engage_t = 0.0
        self.pending_takeoff_alt: float | None = None
        self.takeoff_alt: float | None = None
        self.hold_timer = 0.0
        self.altitude_hold_ok = False
        self.timeout_fired = False
        self.disarm_requested = False
        self.commander_connected = False
        self.last_cmd_t = 0.0

        self.last_inputs = ControlInputs()
        self.last_cmds = ActuatorCommands()
        self.gamma_actual = np.zeros(2)   # servo lag state

        self.records: list[TelemetryRecord] = []
        self.transitions: list[str] = []
        self.command_log: list[str] = []
        self.metrics = RunMetrics()
        self._event_queue: list[MissionEvent] = []
        self._sat_ticks = 0
        self._ctl_ticks = 0
        self._outer_ticks: list[int] = []
        self._phase_time: dict[str, float] = {}
        self._fault_detail = ""

    # ------------------------------------------------------------------ events

    def _log_transition(self, t: float, before: MissionState, event: MissionEvent,
                        result) -> None:
        self.transitions.append(
            f"{float(t)!s},{before.value},{event.value},{result.state.value},{int(result.accepted)}")

    def _submit_event(self, event: MissionEvent) -> None:
        self._event_queue.append(event)

    def _process_events(self, t: float) -> None:
        while self._event_queue:
            event = self._event_queue.pop(0)
            before = self.fsm_state
            result = fsm_step(before, event)
            self._log_transition(t, before, event, result)
            if not result.accepted:
                continue
            self.fsm_state = result.state
            for action in result.actions:
                self._run_action(action, t)

    def _run_action(self, action: MissionAction, t: float) -> None:
        cfg = self.config
        if action is MissionAction.ENGAGE_TAKEOFF_PROFILE:
            alt = self.pending_takeoff_alt if self.pending_takeoff_alt is not None else 1.0
            self.takeoff_alt = alt
            climb = alt - (-self.state.p[2])
            dur = max(cfg.profiles.min_duration, abs(climb) / cfg.profiles.takeoff_speed)
            self.active_spline = trajectory.vertical_segment(self.state.p, -alt, dur)
            self.engage_t = t
            self.hold_timer = 0.0
            self.altitude_hold_ok = False
            self.timeout_fired = False
            psi = euler_zyx_from_R(self.state.R)[2]
            self.controller.reset(psi_des=psi)
        elif action is MissionAction.ENGAGE_TRAJECTORY:
            if self.mission_spline is not None:
                self.active_spline = self.mission_spline
            else:
                self.active_spline = None  # hold position
            self.engage_t = t
            self.timeout_fired = False
        elif action is MissionAction.ENGAGE_LANDING_PROFILE:
            height = max(0.0, -self.state.p[2])
            dur = max(cfg.profiles.min_duration, height / cfg.profiles.landing_speed)
            self.active_spline = trajectory.vertical_segment(self.state.p, 0.0, dur)
            self.engage_t = t
            self.disarm_requested = False
        elif action is MissionAction.CUT_MOTORS:
            self.last_inputs = ControlInputs()
            self.last_cmds = ActuatorCommands()

    def _handle_command(self, raw: str, t: float, on_result=None) -> None:
        flight = FlightStatus(altitude=-self.state.p[2], altitude_hold_ok=self.altitude_hold_ok)
        outcome = validate_command(raw, self.fsm_state, flight)
        if isinstance(outcome, CommandRejected):
            self.command_log.append(f"{float(t)!s},{raw},rejected,{outcome.reason}")
            if on_result:
                on_result(False, outcome.reason)
            return
        assert isinstance(outcome, ValidatedCommand)
        self.command_log.append(f"{float(t)!s},{raw},accepted,")
        if outcome.verb == "heartbeat":
            pass  # liveness only; timestamp updated by the caller
        elif outcome.request is not None:
            self.shim.request(outcome.request, t)
        elif outcome.event is not None:
            if outcome.altitude is not None:
                self.pending_takeoff_alt = outcome.altitude
            self._submit_event(outcome.event)
        if on_result:
            on_result(True, outcome.verb)

    def _drain_inbox(self, t: float) -> None:
        if self.inbox is None:
            return
        while True:
            try:
                msg = self.inbox.get_nowait()
            except queue.Empty:
                return
            if msg.kind == "commander_connected":
                self.commander_connected = True
                self.last_cmd_t = t
            elif msg.kind == "commander_disconnected":
                pass  # liveness keeps aging; heartbeat loss takes the abort path
            elif msg.kind == "command":
                self.last_cmd_t = t
                self._handle_command(msg.raw, t, msg.on_result)

    # ------------------------------------------------------------------ loop

    def _reference(self, t: float) -> TrajectorySample:
        if self.active_spline is None:
            return TrajectorySample.hold(t, self.state.p)
        s = trajectory.sample(self.active_spline,
                              self.active_spline.t_start + (t - self.engage_t))
        return TrajectorySample(t, s.derivs)

    def _check_timers(self, t: float) -> None:
        cfg = self.config
        if self.timeout_fired:
            return
        if self.fsm_state is MissionState.TAKEOFF and not self.altitude_hold_ok:
            if t - self.engage_t > cfg.timeouts.takeoff:
                self.timeout_fired = True
                self.command_log.append(
                    f"{float(t)!s},<timer>,internal_abort,takeoff altitude not captured")
                self._submit_event(MissionEvent.C0_ABORT)
        elif self.fsm_state is MissionState.TRACKING:
            if t - self.engage_t > cfg.timeouts.tracking:
                self.timeout_fired = True
                self._submit_event(MissionEvent.T1_TIMEOUT)

    def _check_arena(self, t: float) -> None:
        if self.fsm_state in FLYING_STATES and self.fsm_state is not MissionState.ABORTED:
            if not self.config.arena.contains(self.state.p):
                self.command_log.append(f"{float(t)!s},<arena>,internal_abort,out of bounds")
                self._submit_event(MissionEvent.C0_ABORT)

    def _update_hold(self, dt: float) -> None:
        if self.fsm_state is not MissionState.TAKEOFF or self.takeoff_alt is None:
            return
        if abs(-self.state.p[2] - self.takeoff_alt) < ALT_HOLD_BAND:
            self.hold_timer += dt
        else:
            self.hold_timer = 0.0
        if self.hold_timer >= ALT_HOLD_TIME:
            self.altitude_hold_ok = True

    def _check_touchdown(self, t: float) -> None:
        if self.fsm_state not in (MissionState.LANDING, MissionState.ABORTED):
            return
        if self.disarm_requested:
            return
        alt = -self.state.p[2]
        if alt < TOUCHDOWN_ALT and np.linalg.norm(self.state.v) < TOUCHDOWN_SPEED:
            self.disarm_requested = True
            self.shim.request(MissionAction.REQUEST_DISARM, t)

    def _plant_step(self, dt: float) -> None:
        cfg = self.config
        cmds = self.last_cmds
        tau_s = cfg.profiles.servo_tau
        cmd_in = actuators.servo_cmd_to_angle(cmds.s_in, cfg.curves)
        cmd_out = actuators.servo_cmd_to_angle(cmds.s_out, cfg.curves)
        if tau_s > 0.0:
            self.gamma_actual[0] = actuators.servo_lag_step(self.gamma_actual[0], cmd_in, dt, tau_s)
            self.gamma_actual[1] = actuators.servo_lag_step(self.gamma_actual[1], cmd_out, dt, tau_s)
        else:
            self.gamma_actual[0], self.gamma_actual[1] = cmd_in, cmd_out
        thrust = actuators.motors_to_thrust(cmds.m_up, cmds.m_dn, cfg.curves)
        tau_delta_meas = actuators.motors_to_norm_yaw_accel(cmds.m_up, cmds.m_dn, cfg.curves)
        u = thrust_vector_body(thrust, self.gamma_actual[0], self.gamma_actual[1])
        # the identified differential map measures acceleration about body +z;
        # expressed along the thrust direction (u3 < 0) the argument flips sign
        norm_u = np.linalg.norm(u)
        u_hat3 = u[2] / norm_u if norm_u > 1e-9 else -1.0
        tau_delta_eff = tau_delta_meas / u_hat3
        tau = total_torque(u, tau_delta_eff, cfg.vehicle)
        self.state = rk4_step(self.state, u, tau, cfg.vehicle, dt,
                              tau_delta_norm=tau_delta_eff,
                              f_ext=cfg.disturbance.force)

    def _telemetry(self, t: float, ref: TrajectorySample) -> None:
        try:
            euler = np.array(euler_zyx_from_R(self.state.R))
        except ValueError:
            euler = np.full(3, np.nan)
        rec = TelemetryRecord(
            t=t, state=self.state.copy(), euler=euler, ref=ref,
            inputs=self.last_inputs, cmds=self.last_cmds,
            fsm_state=self.fsm_state, e_p=ref.pos - self.state.p,
            lam_d=self.controller._lam_d.copy(),
        )
        self.records.append(rec)
        if self.on_telemetry is not None:
            self.on_telemetry(rec)

    def run(self) -> RunMetrics:
        cfg = self.config
        dt = 1.0 / cfg.rates.sim_hz
        spi = cfg.rates.sim_hz // cfg.rates.inner_hz
        spo = cfg.rates.sim_hz // cfg.rates.outer_hz
        spt = cfg.rates.sim_hz // cfg.rates.telemetry_hz
        noise_att = np.deg2rad(cfg.disturbance.noise_att_std_deg)
        script_idx = 0
        n = 0
        wall_start = time.monotonic()
        max_steps = int(round(cfg.duration * cfg.rates.sim_hz))
        try:
            while n <= max_steps:
                t = n * dt
                self._phase_time[self.fsm_state.value] = \
                    self._phase_time.get(self.fsm_state.value, 0.0) + dt

                for ev in self.shim.poll(t):
                    self._submit_event(ev)
                while script_idx < len(self.script) and self.script[script_idx].t <= t:
                    self._handle_command(self.script[script_idx].raw, t)
                    script_idx += 1
                self._drain_inbox(t)
                self._check_timers(t)
                if self.commander_connected:
                    ev = self.heartbeat.check(t - self.last_cmd_t)
                    if ev is not None:
                        self._submit_event(ev)
                self._check_arena(t)
                self._process_events(t)
                if self.fsm_state in TERMINAL_STATES:
                    ref = self._reference(t)
                    if n % spt == 0:
                        self._telemetry(t, ref)
                    break

                ref = self._reference(t)
                flying = self.fsm_state in FLYING_STATES
                if flying and n % spi == 0:
                    measured = sensor_channel(self.state, cfg.disturbance.noise_pos_std,
                                              noise_att, self.rng)
                    if n % spo == 0:
                        self._outer_ticks.append(n)
                        self.metrics.outer_steps += 1
                    self.last_inputs, self.last_cmds = self.controller.step(ref, measured, spi * dt)
                    self._ctl_ticks += 1
                    if self.controller.saturation.any():
                        self._sat_ticks += 1
                    self.metrics.inner_steps += 1
                if n % spt == 0:
                    self._telemetry(t, ref)
                if flying:
                    self._plant_step(dt)
                    self.metrics.dynamics_steps += 1
                self._update_hold(dt)
                self._check_touchdown(t)
                n += 1

                if self.pace_realtime:
                    lead = t - (time.monotonic() - wall_start)
                    if lead > 0.002:
                        time.sleep(lead)
        except IntegrationFault as exc:
            self.metrics.fault = True
            self._fault_detail = str(exc)

        self.metrics.final_state = self.fsm_state.value
        self.metrics.sim_time = n * dt
        self.metrics.phase_durations = dict(self._phase_time)
        self.metrics.saturation_duty = (self._sat_ticks / self._ctl_ticks) if self._ctl_ticks else 0.0
        gaps = sorted(set(np.diff(self._outer_ticks).tolist())) if len(self._outer_ticks) > 1 else []
        self.metrics.outer_gaps = [int(g) for g in gaps]
        try:
            phase_metrics = compute_metrics(self.records)
        except ValueError:
            phase_metrics = None
        if phase_metrics is not None:
            for name in ("rmse_pos", "rmse_pos_axes", "max_pos_error",
                         "rmse_att", "rmse_att_axes", "tracking_records"):
                setattr(self.metrics, name, getattr(phase_metrics, name))
        if self.out_dir is not None:
            self._write_outputs()
        return self.metrics

    def _write_outputs(self) -> None:
        out = self.out_dir
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "telemetry.csv", "w") as f:
            f.write(TELEMETRY_CSV_HEADER + "\n")
            for rec in self.records:
                f.write(rec.row() + "\n")
        with open(out / "transitions.csv", "w") as f:
            f.write("ts,state_from,event,state_to,accepted\n")
            for line in self.transitions:
                f.write(line + "\n")
        with open(out / "commands.csv", "w") as f:
            f.write("ts,raw,outcome,detail\n")
            for line in self.command_log:
                f.write(line + "\n")
        with open(out / "metrics.json", "w") as f:
            json.dump(self.metrics.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
