"""Flight-phase supervision: validated transitions, failsafes, kill override.

The FSM is a pure transition table over (state, event).  Operator commands
are validated against the current state before they become events; the
``offboard`` and ``arm`` verbs do not transition the machine themselves but
request the autopilot shim, whose acknowledgements (p1/p2/p3) drive the
pre-flight transitions.  Kill is the only motor-cut trigger; heartbeat loss
in flight takes the controlled abort-landing path instead.  The timeout
landing condition exists only in Tracking; a stalled takeoff is a failsafe
and goes through the abort path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class MissionState(str, Enum):
    INIT = "Init"
    OFFBOARD_REQUESTED = "OffboardRequested"
    ARMED = "Armed"
    TAKEOFF = "Takeoff"
    TRACKING = "Tracking"
    LANDING = "Landing"
    ENDED = "Ended"
    ABORTED = "Aborted"
    KILLED = "Killed"


TERMINAL_STATES = frozenset({MissionState.ENDED, MissionState.KILLED})
FLIGHT_STATES = frozenset({MissionState.TAKEOFF, MissionState.TRACKING,
                           MissionState.LANDING, MissionState.ABORTED})


class MissionEvent(str, Enum):
    P1_OFFBOARD_ACK = "p1_offboard_ack"
    P2_ARM_ACK = "p2_arm_ack"
    P3_DISARM_ACK = "p3_disarm_ack"
    C0_ABORT = "c0_abort"
    C1_TAKEOFF = "c1_takeoff"
    C2_TRACK = "c2_track"
    C3_LAND = "c3_land"
    T1_TIMEOUT = "t1_timeout"
    HEARTBEAT_LOST = "heartbeat_lost"
    KILL_SWITCH = "kill_switch"


class MissionAction(str, Enum):
    REQUEST_OFFBOARD = "request_offboard"
    REQUEST_ARM = "request_arm"
    REQUEST_DISARM = "request_disarm"
    ENGAGE_TAKEOFF_PROFILE = "engage_takeoff_profile"
    ENGAGE_TRAJECTORY = "engage_trajectory"
    ENGAGE_LANDING_PROFILE = "engage_landing_profile"
    CUT_MOTORS = "cut_motors"


_S, _E, _A = MissionState, MissionEvent, MissionAction

TRANSITIONS: dict[tuple[MissionState, MissionEvent], tuple[MissionState, frozenset]] = {
    (_S.INIT, _E.P1_OFFBOARD_ACK): (_S.OFFBOARD_REQUESTED, frozenset()),
    (_S.OFFBOARD_REQUESTED, _E.P2_ARM_ACK): (_S.ARMED, frozenset()),
    (_S.ARMED, _E.C1_TAKEOFF): (_S.TAKEOFF, frozenset({_A.ENGAGE_TAKEOFF_PROFILE})),
    (_S.TAKEOFF, _E.C2_TRACK): (_S.TRACKING, frozenset({_A.ENGAGE_TRAJECTORY})),
    (_S.TRACKING, _E.C3_LAND): (_S.LANDING, frozenset({_A.ENGAGE_LANDING_PROFILE})),
    (_S.TRACKING, _E.T1_TIMEOUT): (_S.LANDING, frozenset({_A.ENGAGE_LANDING_PROFILE})),
    (_S.LANDING, _E.P3_DISARM_ACK): (_S.ENDED, frozenset()),
    (_S.ABORTED, _E.P3_DISARM_ACK): (_S.ENDED, frozenset()),
}
for _flight in (_S.TAKEOFF, _S.TRACKING, _S.LANDING):
    TRANSITIONS[(_flight, _E.C0_ABORT)] = (_S.ABORTED, frozenset({_A.ENGAGE_LANDING_PROFILE}))
for _flight in (_S.TAKEOFF, _S.TRACKING):
    TRANSITIONS[(_flight, _E.HEARTBEAT_LOST)] = (_S.ABORTED, frozenset({_A.ENGAGE_LANDING_PROFILE}))
for _state in MissionState:
    if _state not in TERMINAL_STATES:
        TRANSITIONS[(_state, _E.KILL_SWITCH)] = (_S.KILLED, frozenset({_A.CUT_MOTORS}))


@dataclass(frozen=True)
class TransitionResult:
    state: MissionState
    actions: frozenset
    accepted: bool


def fsm_step(state: MissionState, event: MissionEvent) -> TransitionResult:
    """Pure transition: unknown (state, event) pairs are rejected in place."""
    hit = TRANSITIONS.get((state, event))
    if hit is None:
        return TransitionResult(state, frozenset(), False)
    return TransitionResult(hit[0], hit[1], True)


class HeartbeatMonitor:
    """Emits a single heartbeat-loss event per loss episode.

    The latch clears when the age drops back under the threshold, so a
    restored link re-arms the monitor.
    """

    def __init__(self, threshold: float):
        if threshold <= 0.0:
            raise ValueError("threshold must be positive")
        self.threshold = threshold
        self._latched = False

    def check(self, last_ack_age: float) -> MissionEvent | None:
        if last_ack_age > self.threshold:
            if not self._latched:
                self._latched = True
                return MissionEvent.HEARTBEAT_LOST
            return None
        self._latched = False
        return None


# operator verb -> states in which it is admissible (shared with the UI)
VERB_ADMISSIBLE: dict[str, frozenset] = {
    "offboard": frozenset({_S.INIT}),
    "arm": frozenset({_S.OFFBOARD_REQUESTED}),
    "takeoff": frozenset({_S.ARMED}),
    "track": frozenset({_S.TAKEOFF}),
    "land": frozenset({_S.TRACKING}),
    "abort": frozenset({_S.TAKEOFF, _S.TRACKING, _S.LANDING}),
    "kill": frozenset(s for s in MissionState if s not in TERMINAL_STATES),
    "heartbeat": frozenset(s for s in MissionState),
}

_VERB_EVENT = {
    "takeoff": _E.C1_TAKEOFF,
    "track": _E.C2_TRACK,
    "land": _E.C3_LAND,
    "abort": _E.C0_ABORT,
    "kill": _E.KILL_SWITCH,
}

_VERB_REQUEST = {
    "offboard": MissionAction.REQUEST_OFFBOARD,
    "arm": MissionAction.REQUEST_ARM,
}


@dataclass
class FlightStatus:
    """Flight facts the validator needs beyond the FSM state."""

    altitude: float = 0.0            # m above ground (positive up)
    altitude_hold_ok: bool = False   # takeoff target held within 5 cm for 1 s


@dataclass
class ValidatedCommand:
    verb: str
    event: MissionEvent | None = None
    request: MissionAction | None = None
    altitude: float | None = None    # takeoff target, m above ground


@dataclass
class CommandRejected:
    verb: str
    reason: str


def validate_command(raw: str, state: MissionState,
                     flight: FlightStatus | None = None) -> ValidatedCommand | CommandRejected:
    """Structural and state-dependent validation of an operator command line."""
    parts = raw.strip().split()
    if not parts:
        return CommandRejected("", "empty command")
    verb, args = parts[0].lower(), parts[1:]
    if verb not in VERB_ADMISSIBLE:
        return CommandRejected(verb, f"unknown command {verb!r}")
    if state not in VERB_ADMISSIBLE[verb]:
        return CommandRejected(verb, f"{verb!r} not admissible in state {state.value}")

    if verb == "heartbeat":
        return ValidatedCommand(verb)
    if verb in _VERB_REQUEST:
        if args:
            return CommandRejected(verb, f"{verb!r} takes no arguments")
        return ValidatedCommand(verb, request=_VERB_REQUEST[verb])
    if verb == "takeoff":
        if len(args) != 1:
            return CommandRejected(verb, "takeoff requires a target altitude in meters")
        try:
            alt = float(args[0])
        except ValueError:
            return CommandRejected(verb, f"malformed altitude {args[0]!r}")
        current = flight.altitude if flight else 0.0
        if not (alt > current + 0.05):
            return CommandRejected(verb, "takeoff target must be above the current altitude")
        return ValidatedCommand(verb, event=_VERB_EVENT[verb], altitude=alt)
    if verb == "track":
        if flight is None or not flight.altitude_hold_ok:
            return CommandRejected(verb, "takeoff altitude not held yet")
        return ValidatedCommand(verb, event=_VERB_EVENT[verb])
    if args:
        return CommandRejected(verb, f"{verb!r} takes no arguments")
    return ValidatedCommand(verb, event=_VERB_EVENT[verb])


def transition_table_export() -> dict:
    """JSON-friendly transition table and verb gating, shared with the UI."""
    table: dict[str, dict[str, str]] = {}
    for (state, event), (nxt, _) in TRANSITIONS.items():
        table.setdefault(state.value, {})[event.value] = nxt.value
    gating = {verb: sorted(s.value for s in states) for verb, states in VERB_ADMISSIBLE.items()}
    return {
        "states": [s.value for s in MissionState],
        "terminal": sorted(s.value for s in TERMINAL_STATES),
        "events": [e.value for e in MissionEvent],
        "transitions": table,
        "verb_gating": gating,
    }
