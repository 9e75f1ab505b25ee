"""Congestion detection and control state machines for vehicles and roadside units.

An accident vehicle originates a warning and keeps re-broadcasting it.
Receivers in the blocked lane, upstream and close enough, decide to divert,
stamp the decision into the message and forward it until their lane change
is done, at which point they stop transmitting for good. Roadside units
re-broadcast what they hear over their (longer) coverage; vehicles in other
lanes reached this way slow down.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping, NamedTuple, Optional

from .road import MAIN_INDICES, LaneId


class MalformedMessageError(ValueError):
    pass


class Mode(str, enum.Enum):
    IDLE = "idle"
    AFFECTED_BROADCASTING = "affected_broadcasting"
    INFORMED_DIVERTING = "informed_diverting"
    FORWARDING = "forwarding"
    CEASED = "ceased"


class Action(str, enum.Enum):
    IGNORE = "ignore"
    DIVERT = "divert"
    HEED_ADVISORY = "heed_advisory"


@dataclass(frozen=True)
class WarningMessage:
    message_id: int
    origin_vehicle_id: int
    origin_speed: float
    blocked_lane: LaneId
    incident_position: float
    created_tick: int
    # lane the last forwarding vehicle diverted to; None until someone diverts
    decision_field: Optional[LaneId] = None
    relayed_by_rsu: bool = False
    hop_count: int = 0

    def serialize(self) -> str:
        decision = "none" if self.decision_field is None else f"diversion_taken({self.decision_field})"
        return ";".join([
            f"message_id={self.message_id}",
            f"origin_vehicle_id={self.origin_vehicle_id}",
            f"origin_speed={self.origin_speed:.3f}",
            f"blocked_lane={self.blocked_lane}",
            f"incident_position={self.incident_position:.3f}",
            f"created_tick={self.created_tick}",
            f"decision_field={decision}",
            f"relayed_by_rsu={int(self.relayed_by_rsu)}",
            f"hop_count={self.hop_count}",
        ])


class Source(NamedTuple):
    # a tuple so inbox lookups hash cheaply
    kind: str  # "vehicle" | "rsu"
    id: int

    def sort_key(self) -> tuple[int, int]:
        return (self.id, 0 if self.kind == "vehicle" else 1)

    def __str__(self) -> str:
        return f"{'v' if self.kind == 'vehicle' else 'rsu'}{self.id}"


@dataclass(frozen=True)
class Transmission:
    message: WarningMessage
    source: Source
    emit_position: float
    emit_tick: int


@dataclass(frozen=True)
class Incident:
    """What a vehicle remembers about a warning it has heard."""

    message: WarningMessage
    via_rsu: bool


@dataclass
class ProtocolState:
    mode: Mode = Mode.IDLE
    known_message_ids: set = field(default_factory=set)
    last_broadcast_tick: Optional[int] = None
    planned_target_lane: Optional[LaneId] = None
    outgoing: Optional[WarningMessage] = None
    incidents: dict = field(default_factory=dict)
    advisories: dict = field(default_factory=dict)
    diverting_from: Optional[int] = None
    sent: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ProtocolParams:
    rebroadcast_ticks: int = 2
    max_hops: int = 3
    lookahead: float = 2000.0
    advisory_factor: float = 0.6
    cessation: bool = True
    # ticks; 0 means a message lives until its incident clears
    message_ttl_ticks: int = 0


@dataclass(frozen=True)
class Decision:
    action: Action
    forward: bool = False
    updated_msg: Optional[WarningMessage] = None
    target_lane: Optional[LaneId] = None


IGNORE = Decision(Action.IGNORE)


def validate_message(msg: WarningMessage) -> None:
    if msg.blocked_lane.index not in MAIN_INDICES:
        raise MalformedMessageError(f"message {msg.message_id}: bad lane {msg.blocked_lane}")


def on_accident(vehicle, message_id: int, tick: int) -> Optional[WarningMessage]:
    """Turn a freshly blocked vehicle into a warning source.

    Returns the new message, or None if the vehicle already broadcasts one.
    """
    state: ProtocolState = vehicle.protocol
    if state.mode is Mode.AFFECTED_BROADCASTING:
        return None
    msg = WarningMessage(
        message_id=message_id,
        origin_vehicle_id=vehicle.id,
        origin_speed=0.0,
        blocked_lane=vehicle.lane,
        incident_position=vehicle.position,
        created_tick=tick,
    )
    state.mode = Mode.AFFECTED_BROADCASTING
    state.outgoing = msg
    state.known_message_ids.add(message_id)
    state.last_broadcast_tick = None
    state.planned_target_lane = None
    return msg


def broadcast_tick(state: ProtocolState, now: int, interval: int, *,
                   source: Source, emit_position: float) -> list[Transmission]:
    """Emit the held message if the node is transmitting and the interval elapsed."""
    if state.mode not in (Mode.AFFECTED_BROADCASTING, Mode.FORWARDING) or state.outgoing is None:
        return []
    if state.last_broadcast_tick is not None and now - state.last_broadcast_tick < interval:
        return []
    state.last_broadcast_tick = now
    mid = state.outgoing.message_id
    state.sent[mid] = state.sent.get(mid, 0) + 1
    return [Transmission(state.outgoing, source, emit_position, now)]


def choose_diversion_lane(lane_gaps: Mapping[LaneId, float], blocked: set) -> Optional[LaneId]:
    """Pick a diversion lane: avoid lanes known blocked, then widest gap, then lowest index."""
    if not lane_gaps:
        return None
    return min(lane_gaps, key=lambda ln: (ln in blocked, -lane_gaps[ln], ln.index))


def _ahead(vehicle, msg: WarningMessage) -> Optional[float]:
    """Distance to the incident if it lies ahead on the vehicle's carriageway."""
    if vehicle.lane.direction is not msg.blocked_lane.direction:
        return None
    dist = msg.incident_position - vehicle.position
    return dist if dist > 0 else None


def blocked_lanes_ahead(vehicle) -> set:
    """Lanes the vehicle knows to be blocked somewhere ahead of it."""
    out = set()
    for inc in vehicle.protocol.incidents.values():
        if _ahead(vehicle, inc.message) is not None:
            out.add(inc.message.blocked_lane)
    return out


def _divert(vehicle, msg: WarningMessage, params: ProtocolParams,
            lane_gaps: Mapping[LaneId, float]) -> Decision:
    state: ProtocolState = vehicle.protocol
    target = choose_diversion_lane(lane_gaps, blocked_lanes_ahead(vehicle))
    if target is None:
        return IGNORE
    updated = replace(msg, decision_field=target, relayed_by_rsu=False, hop_count=msg.hop_count + 1)
    forward = updated.hop_count <= params.max_hops and state.mode is not Mode.CEASED
    state.planned_target_lane = target
    state.diverting_from = msg.message_id
    if forward:
        state.mode = Mode.FORWARDING
        state.outgoing = updated
        state.last_broadcast_tick = None
    elif state.mode is not Mode.CEASED:
        state.mode = Mode.INFORMED_DIVERTING
    return Decision(Action.DIVERT, forward, updated if forward else None, target)


def _assess(vehicle, inc: Incident, params: ProtocolParams,
            lane_gaps: Mapping[LaneId, float]) -> Decision:
    state: ProtocolState = vehicle.protocol
    msg = inc.message
    ahead = _ahead(vehicle, msg)
    if ahead is None:
        return IGNORE
    if vehicle.lane == msg.blocked_lane:
        if ahead <= params.lookahead and state.planned_target_lane is None \
                and state.mode is not Mode.AFFECTED_BROADCASTING:
            return _divert(vehicle, msg, params, lane_gaps)
        return IGNORE
    if inc.via_rsu and msg.message_id not in state.advisories:
        state.advisories[msg.message_id] = msg.incident_position
        return Decision(Action.HEED_ADVISORY)
    return IGNORE


def on_receive(vehicle, msg: WarningMessage, params: ProtocolParams,
               lane_gaps: Mapping[LaneId, float]) -> Decision:
    """Handle one delivered warning.

    ``lane_gaps`` maps each lane the vehicle could change into to the net gap
    ahead there; it only matters when the vehicle decides to divert.
    """
    validate_message(msg)
    state: ProtocolState = vehicle.protocol
    if msg.message_id in state.known_message_ids:
        return IGNORE
    state.known_message_ids.add(msg.message_id)
    inc = Incident(msg, msg.relayed_by_rsu)
    state.incidents[msg.message_id] = inc
    return _assess(vehicle, inc, params, lane_gaps)


def reassess(vehicle, params: ProtocolParams, lane_gaps: Mapping[LaneId, float]) -> Decision:
    """Re-run the lane check against warnings already heard.

    Covers vehicles that heard a warning while outside the lookahead or in
    another lane and have since come into range of the rule.
    """
    state: ProtocolState = vehicle.protocol
    if state.planned_target_lane is not None or not state.incidents:
        return IGNORE
    for mid in sorted(state.incidents):
        decision = _assess(vehicle, state.incidents[mid], params, lane_gaps)
        if decision.action is Action.DIVERT:
            return decision
    return IGNORE


def advisory_cap(vehicle, params: ProtocolParams, speed_limit: float) -> Optional[float]:
    """Desired-speed cap while an advised incident is still ahead; drops passed ones."""
    state: ProtocolState = vehicle.protocol
    if not state.advisories:
        return None
    passed = [mid for mid, pos in state.advisories.items() if pos <= vehicle.position]
    for mid in passed:
        del state.advisories[mid]
    return params.advisory_factor * speed_limit if state.advisories else None


def on_lane_change_complete(state: ProtocolState, cessation: bool = True) -> bool:
    """Record that a diverting vehicle has left the blocked lane.

    Returns True when the vehicle ceased transmitting as a result.
    """
    if state.planned_target_lane is None:
        return False
    state.planned_target_lane = None
    state.diverting_from = None
    if state.mode in (Mode.INFORMED_DIVERTING, Mode.FORWARDING):
        if cessation:
            state.mode = Mode.CEASED
            state.outgoing = None
            return True
    return False


def forget_incident(state: ProtocolState, message_id: int) -> None:
    """Drop a cleared incident from a vehicle's memory (id stays known)."""
    state.incidents.pop(message_id, None)
    state.advisories.pop(message_id, None)
    if state.diverting_from == message_id:
        state.planned_target_lane = None
        state.diverting_from = None
        if state.mode is Mode.INFORMED_DIVERTING:
            state.mode = Mode.IDLE
    if state.outgoing is not None and state.outgoing.message_id == message_id \
            and state.mode is Mode.FORWARDING:
        state.mode = Mode.IDLE
        state.outgoing = None


@dataclass
class RsuSchedule:
    message: WarningMessage
    start_tick: int
    last_tick: Optional[int] = None


@dataclass
class RsuState:
    schedules: dict = field(default_factory=dict)
    sent: int = 0


def rsu_on_receive(state: RsuState, msg: WarningMessage, now: int) -> bool:
    """Start re-broadcasting a newly heard warning. False for a duplicate id."""
    validate_message(msg)
    if msg.message_id in state.schedules:
        return False
    state.schedules[msg.message_id] = RsuSchedule(replace(msg, relayed_by_rsu=True), now)
    return True


def rsu_broadcast_tick(state: RsuState, now: int, interval: int, params: ProtocolParams, *,
                       source: Source, emit_position: float) -> list[Transmission]:
    out = []
    for mid in sorted(state.schedules):
        sched = state.schedules[mid]
        if params.message_ttl_ticks and now - sched.message.created_tick >= params.message_ttl_ticks:
            continue
        if sched.last_tick is not None and now - sched.last_tick < interval:
            continue
        sched.last_tick = now
        state.sent += 1
        out.append(Transmission(sched.message, source, emit_position, now))
    return out


def rsu_clear(state: RsuState, message_id: int) -> None:
    state.schedules.pop(message_id, None)
