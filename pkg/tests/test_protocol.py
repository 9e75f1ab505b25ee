from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdca_sim import protocol as proto
from cdca_sim.dynamics import apply_blockage
from cdca_sim.protocol import (
    Action,
    MalformedMessageError,
    Mode,
    ProtocolParams,
    ProtocolState,
    RsuState,
    Source,
    WarningMessage,
)
from cdca_sim.road import Direction, LaneId

from helpers import F, make

PARAMS = ProtocolParams()
GAPS = {F(2): 50.0}


def blocked(vid: int, lane: int, pos: float):
    v = make(vid, lane, pos)
    apply_blockage(v)
    return v


def origin_message(mid: int = 1, lane: int = 1, pos: float = 5000.0) -> WarningMessage:
    return proto.on_accident(blocked(99, lane, pos), mid, 0)


# -- origin --------------------------------------------------------------

def test_accident_message_fields():
    v = blocked(4, 1, 5000.0)
    m = proto.on_accident(v, 1, 240)
    assert (m.blocked_lane, m.origin_speed, m.incident_position) == (F(1), 0.0, 5000.0)
    assert (m.origin_vehicle_id, m.created_tick, m.decision_field, m.hop_count) == (4, 240, None, 0)
    assert v.protocol.mode is Mode.AFFECTED_BROADCASTING


def test_two_accidents_two_streams():
    a = proto.on_accident(blocked(1, 1, 5000.0), 1, 0)
    b = proto.on_accident(blocked(2, 3, 5000.0), 2, 0)
    assert a.message_id != b.message_id
    assert (a.blocked_lane, b.blocked_lane) == (F(1), F(3))


def test_second_accident_on_same_vehicle_is_ignored():
    v = blocked(1, 1, 5000.0)
    assert proto.on_accident(v, 1, 0) is not None
    assert proto.on_accident(v, 2, 5) is None
    assert v.protocol.outgoing.message_id == 1


# -- broadcasting schedule -----------------------------------------------

def test_affected_vehicle_every_interval():
    v = blocked(1, 1, 5000.0)
    proto.on_accident(v, 1, 0)
    sent = [t for t in range(6)
            if proto.broadcast_tick(v.protocol, t, 2, source=Source("vehicle", 1), emit_position=5000.0)]
    assert sent == [0, 2, 4]
    assert v.protocol.last_broadcast_tick == 4


@settings(max_examples=100)
@given(st.integers(min_value=1, max_value=10), st.integers(min_value=1, max_value=60))
def test_schedule_is_arithmetic(interval, horizon):
    state = ProtocolState(mode=Mode.AFFECTED_BROADCASTING, outgoing=origin_message())
    sent = [t for t in range(horizon)
            if proto.broadcast_tick(state, t, interval, source=Source("vehicle", 1), emit_position=0.0)]
    assert sent == list(range(0, horizon, interval))


@pytest.mark.parametrize("mode", [Mode.IDLE, Mode.CEASED, Mode.INFORMED_DIVERTING])
def test_silent_modes(mode):
    state = ProtocolState(mode=mode, outgoing=origin_message())
    for t in range(10):
        assert proto.broadcast_tick(state, t, 1, source=Source("vehicle", 1), emit_position=0.0) == []


# -- receiving -----------------------------------------------------------

def test_same_lane_within_lookahead_diverts_and_forwards():
    m = origin_message()
    v = make(5, 1, 4200.0, 20.0)
    d = proto.on_receive(v, m, PARAMS, GAPS)
    assert d.action is Action.DIVERT and d.target_lane == F(2)
    assert d.forward and d.updated_msg.decision_field == F(2)
    assert d.updated_msg.hop_count == 1
    assert v.protocol.mode is Mode.FORWARDING
    assert "decision_field=diversion_taken(F2)" in d.updated_msg.serialize()


def test_other_lane_direct_is_ignored():
    v = make(5, 2, 4200.0, 20.0)
    d = proto.on_receive(v, origin_message(), PARAMS, GAPS)
    assert d.action is Action.IGNORE and not d.forward


def test_duplicate_is_ignored():
    m = origin_message()
    v = make(5, 1, 4200.0, 20.0)
    proto.on_receive(v, m, PARAMS, GAPS)
    again = proto.on_receive(v, m, PARAMS, GAPS)
    assert again.action is Action.IGNORE and not again.forward and again.updated_msg is None


def test_far_upstream_or_downstream_is_ignored():
    m = origin_message()
    assert proto.on_receive(make(5, 1, 2500.0), m, PARAMS, GAPS).action is Action.IGNORE
    assert proto.on_receive(make(6, 1, 5100.0), m, PARAMS, GAPS).action is Action.IGNORE


def test_other_carriageway_is_ignored():
    v = make(5, LaneId(Direction.BACKWARD, 1), 4500.0)
    assert proto.on_receive(v, origin_message(), PARAMS, GAPS).action is Action.IGNORE


def test_rsu_relay_in_other_lane_is_an_advisory():
    relayed = WarningMessage(1, 99, 0.0, F(1), 5000.0, 0, relayed_by_rsu=True)
    v = make(5, 2, 3200.0, 20.0)
    d = proto.on_receive(v, relayed, PARAMS, {})
    assert d.action is Action.HEED_ADVISORY and not d.forward
    assert proto.advisory_cap(v, PARAMS, 22.0) == pytest.approx(0.6 * 22.0)
    v.position = 5000.0
    assert proto.advisory_cap(v, PARAMS, 22.0) is None


def test_malformed_lane_is_rejected():
    bad = WarningMessage(1, 99, 0.0, F(0), 5000.0, 0)
    with pytest.raises(MalformedMessageError):
        proto.on_receive(make(5, 1, 4000.0), bad, PARAMS, GAPS)
    with pytest.raises(MalformedMessageError):
        proto.rsu_on_receive(RsuState(), bad, 0)


def test_hop_limit_stops_forwarding():
    m = WarningMessage(1, 99, 0.0, F(1), 5000.0, 0, hop_count=3)
    v = make(5, 1, 4500.0)
    d = proto.on_receive(v, m, PARAMS, GAPS)
    assert d.action is Action.DIVERT and not d.forward
    assert v.protocol.mode is Mode.INFORMED_DIVERTING


def test_reassess_picks_up_incident_once_in_range():
    v = make(5, 1, 2000.0)
    m = origin_message()
    assert proto.on_receive(v, m, PARAMS, GAPS).action is Action.IGNORE
    v.position = 3100.0
    d = proto.reassess(v, PARAMS, GAPS)
    assert d.action is Action.DIVERT and d.target_lane == F(2)


@settings(max_examples=300)
@given(lane=st.integers(min_value=1, max_value=3), blocked_lane=st.integers(min_value=1, max_value=3),
       position=st.floats(min_value=0.0, max_value=10_000.0),
       incident=st.floats(min_value=0.0, max_value=10_000.0), via_rsu=st.booleans())
def test_lane_equality_branch(lane, blocked_lane, position, incident, via_rsu):
    """Divert exactly when in the blocked lane with the incident ahead inside the lookahead."""
    m = WarningMessage(1, 99, 0.0, F(blocked_lane), incident, 0, relayed_by_rsu=via_rsu)
    v = make(5, lane, position)
    gaps = {ln: 40.0 for ln in (F(1), F(2), F(3)) if abs(ln.index - lane) == 1}
    d = proto.on_receive(v, m, PARAMS, gaps)
    ahead = incident - position
    assert (d.action is Action.DIVERT) == (lane == blocked_lane and 0 < ahead <= PARAMS.lookahead)
    if d.action is Action.DIVERT:
        assert d.target_lane != F(blocked_lane)


def test_diversion_lane_tie_break():
    assert proto.choose_diversion_lane({F(1): 30.0, F(3): 30.0}, set()) == F(1)
    assert proto.choose_diversion_lane({F(1): 30.0, F(3): 80.0}, set()) == F(3)
    assert proto.choose_diversion_lane({F(1): 90.0, F(3): 30.0}, {F(1)}) == F(3)
    assert proto.choose_diversion_lane({}, set()) is None


# -- cessation -----------------------------------------------------------

def test_lane_change_completion_ceases():
    v = make(5, 1, 4200.0, 20.0)
    proto.on_receive(v, origin_message(), PARAMS, GAPS)
    assert proto.on_lane_change_complete(v.protocol) is True
    assert v.protocol.mode is Mode.CEASED and v.protocol.outgoing is None
    for t in range(100):
        assert proto.broadcast_tick(v.protocol, t, 1, source=Source("vehicle", 5), emit_position=0.0) == []


def test_cessation_disabled_keeps_forwarding():
    v = make(5, 1, 4200.0, 20.0)
    proto.on_receive(v, origin_message(), PARAMS, GAPS)
    assert proto.on_lane_change_complete(v.protocol, cessation=False) is False
    assert v.protocol.mode is Mode.FORWARDING
    assert proto.broadcast_tick(v.protocol, 0, 1, source=Source("vehicle", 5), emit_position=0.0)


def test_non_diverting_vehicle_unchanged():
    state = ProtocolState()
    assert proto.on_lane_change_complete(state) is False
    assert state.mode is Mode.IDLE


def test_diverters_cease_independently():
    m = origin_message()
    a, b = make(5, 1, 4200.0), make(6, 1, 4300.0)
    proto.on_receive(a, m, PARAMS, GAPS)
    proto.on_receive(b, m, PARAMS, GAPS)
    proto.on_lane_change_complete(a.protocol)
    assert a.protocol.mode is Mode.CEASED
    assert b.protocol.mode is Mode.FORWARDING


def test_ceased_vehicle_never_forwards_a_new_message():
    v = make(5, 1, 4200.0)
    proto.on_receive(v, origin_message(1), PARAMS, GAPS)
    proto.on_lane_change_complete(v.protocol)
    v.lane = F(1)  # suppose it ends up in another blocked lane
    d = proto.on_receive(v, origin_message(2, pos=4800.0), PARAMS, GAPS)
    assert d.action is Action.DIVERT and not d.forward
    assert v.protocol.mode is Mode.CEASED


# -- roadside units ------------------------------------------------------

def test_rsu_schedules_once_per_id():
    st_ = RsuState()
    m = origin_message()
    assert proto.rsu_on_receive(st_, m, 3) is True
    assert proto.rsu_on_receive(st_, m, 4) is False
    assert len(st_.schedules) == 1
    assert st_.schedules[1].message.relayed_by_rsu


def test_rsu_rebroadcasts_periodically_until_cleared():
    st_ = RsuState()
    proto.rsu_on_receive(st_, origin_message(), 0)
    src = Source("rsu", 0)
    ticks = [t for t in range(10) if proto.rsu_broadcast_tick(st_, t, 2, PARAMS, source=src, emit_position=0.0)]
    assert ticks == [0, 2, 4, 6, 8]
    proto.rsu_clear(st_, 1)
    assert proto.rsu_broadcast_tick(st_, 10, 2, PARAMS, source=src, emit_position=0.0) == []


def test_rsu_message_ttl():
    st_ = RsuState()
    proto.rsu_on_receive(st_, origin_message(), 0)
    params = ProtocolParams(message_ttl_ticks=5)
    src = Source("rsu", 0)
    ticks = [t for t in range(10) if proto.rsu_broadcast_tick(st_, t, 1, params, source=src, emit_position=0.0)]
    assert ticks == [0, 1, 2, 3, 4]


def test_forget_incident_releases_a_diverter():
    v = make(5, 1, 4200.0)
    proto.on_receive(v, origin_message(), PARAMS, GAPS)
    proto.forget_incident(v.protocol, 1)
    assert v.protocol.planned_target_lane is None
    assert v.protocol.mode is Mode.IDLE
    assert 1 in v.protocol.known_message_ids


def test_serialization_field_order():
    text = origin_message().serialize()
    keys = [part.split("=")[0] for part in text.split(";")]
    assert keys == ["message_id", "origin_vehicle_id", "origin_speed", "blocked_lane", "incident_position",
                    "created_tick", "decision_field", "relayed_by_rsu", "hop_count"]
