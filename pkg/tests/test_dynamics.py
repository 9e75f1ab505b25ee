from __future__ import annotations

import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cdca_sim.dynamics import (
    DrivingParams,
    Kind,
    LaneChange,
    LaneChangeParams,
    NonPositiveGapError,
    Status,
    apply_blockage,
    following_accel,
    kmh_to_ms,
    lane_change_decision,
    lane_change_incentive,
    step_kinematics,
    vehicle_accel,
)
from cdca_sim.road import INF

from helpers import F, make, world

P = DrivingParams(desired_speed=30.0, speed_limit=30.0)
LC = LaneChangeParams()


# -- unit conversion -----------------------------------------------------

def test_table_speeds_convert_exactly():
    assert kmh_to_ms(108) == 30.0
    assert kmh_to_ms(54) == 15.0
    assert abs(kmh_to_ms(80) - 22.22) <= 0.005


def test_imposed_limit_caps_car_speed():
    p = DrivingParams(desired_speed=kmh_to_ms(108))
    assert p.speed_limit == pytest.approx(22.2222, abs=1e-4)
    assert p.max_speed == p.speed_limit


# -- car following -------------------------------------------------------

def test_free_flow_equilibrium():
    assert following_accel(30.0, INF, 0.0, P) == 0.0


def test_standing_start_on_empty_road():
    assert following_accel(0.0, INF, 0.0, P) == P.max_accel


def test_pinned_point_against_hand_evaluation():
    # IDM written out once more, independently of the implementation
    s_star = 2.0 + 20.0 * 1.5 + 20.0 * 5.0 / (2.0 * math.sqrt(1.5 * 2.0))
    expected = 1.5 * (1.0 - (20.0 / 30.0) ** 4 - (s_star / 30.0) ** 2)
    assert following_accel(20.0, 30.0, 5.0, P) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(-4.9710533, abs=1e-7)


def test_non_positive_gap_is_an_error():
    with pytest.raises(NonPositiveGapError):
        following_accel(10.0, 0.0, 0.0, P)
    with pytest.raises(NonPositiveGapError):
        following_accel(10.0, -1.0, 0.0, P)


def test_vehicle_accel_brakes_hard_on_contact():
    v = make(1, 1, 0.0, 10.0)
    assert vehicle_accel(v, 0.0, 0.0) == -v.driving.emergency_decel


def test_above_desired_speed_relaxes_gently():
    acc = following_accel(25.0, INF, 0.0, P, desired_speed=13.0)
    assert -P.comfortable_decel <= acc < 0


speeds = st.floats(min_value=0.0, max_value=40.0)
gaps = st.floats(min_value=0.01, max_value=5000.0)
rates = st.floats(min_value=-30.0, max_value=30.0)


@settings(max_examples=300)
@given(speeds, gaps, rates)
def test_accel_is_bounded(v, s, dv):
    acc = following_accel(v, s, dv, P)
    assert -P.emergency_decel <= acc <= P.max_accel


@settings(max_examples=300)
@given(speeds, gaps, gaps, rates)
def test_accel_non_decreasing_in_gap(v, s1, s2, dv):
    lo, hi = sorted((s1, s2))
    assert following_accel(v, lo, dv, P) <= following_accel(v, hi, dv, P) + 1e-12


@settings(max_examples=300)
@given(speeds, gaps, rates, rates)
def test_accel_non_increasing_in_approach_rate(v, s, r1, r2):
    lo, hi = sorted((r1, r2))
    assert following_accel(v, s, hi, P) <= following_accel(v, s, lo, P) + 1e-12


# -- lane changing -------------------------------------------------------

def test_identical_empty_lanes_stay():
    w = world(make(1, 2, 100.0, 20.0))
    assert lane_change_incentive(w.vehicles[1], F(1), w, LC) == 0.0
    assert lane_change_decision(w.vehicles[1], F(1), w, LC) is LaneChange.STAY


def test_blocked_leader_ahead_triggers_change():
    blocked = make(2, 1, 115.0)
    apply_blockage(blocked)
    me = make(1, 1, 100.0, 10.0)
    w = world(me, blocked)
    # by hand: behind a standing car 10 m ahead at 10 m/s the law saturates at -8;
    # on the empty neighbour lane it is the free-road term
    v0 = me.driving.max_speed
    before = max(-8.0, 1.5 * (1 - (10 / v0) ** 4 - ((2 + 10 * 1.5 + 10 * 10 / (2 * math.sqrt(3.0))) / 10) ** 2))
    after = 1.5 * (1 - (10 / v0) ** 4)
    assert before == -8.0
    gain = lane_change_incentive(me, F(2), w, LC)
    assert gain == pytest.approx(after - before, rel=1e-12)
    assert gain > LC.changing_threshold
    assert lane_change_decision(me, F(2), w, LC) is LaneChange.CHANGE


def test_fast_follower_close_behind_vetoes():
    blocked = make(2, 1, 115.0)
    apply_blockage(blocked)
    me = make(1, 1, 100.0, 10.0)
    fast = make(3, 2, 93.0, 30.0)  # 2 m behind my rear bumper
    w = world(me, blocked, fast)
    assert lane_change_incentive(me, F(2), w, LC) is None
    assert lane_change_decision(me, F(2), w, LC) is LaneChange.STAY


def test_new_follower_braking_limit_vetoes():
    me = make(1, 1, 100.0, 5.0)
    follower = make(2, 2, 60.0, 22.0)  # 35 m back, closing at 17 m/s
    w = world(me, follower)
    assert vehicle_accel(follower, 35.0, 5.0) < -LC.safe_decel
    assert lane_change_incentive(me, F(2), w, LC) is None


def test_no_squeezing_below_standstill_spacing():
    me = make(1, 1, 100.0, 10.0)
    leader = make(2, 2, 106.5, 10.0)  # net gap 1.5 m
    w = world(me, leader)
    assert lane_change_incentive(me, F(2), w, LC) is None


def test_standing_vehicle_needs_room_to_pull_away():
    me = make(1, 1, 100.0, 0.0)
    leader = make(2, 2, 107.1, 0.0)  # 2.1 m: barely above the standstill spacing
    w = world(me, leader)
    strict = LaneChangeParams(start_accel=0.2)
    assert lane_change_incentive(me, F(2), w, strict) is None


def test_blocked_vehicle_never_changes():
    me = make(1, 1, 100.0)
    apply_blockage(me)
    assert lane_change_incentive(me, F(2), world(me), LC) is None


def test_sight_distance_hides_far_queues():
    far = make(2, 1, 400.0)
    me = make(1, 1, 100.0, 20.0)
    w = world(me, far)
    blind = LaneChangeParams(sight_distance=150.0)
    assert lane_change_incentive(me, F(2), w, blind) == 0.0
    assert lane_change_incentive(me, F(2), w, LC) > 0.0


side = st.tuples(st.floats(min_value=8.0, max_value=200.0), st.floats(min_value=0.0, max_value=22.0))


@settings(max_examples=200)
@given(st.floats(min_value=0.0, max_value=22.0), st.one_of(st.none(), side), st.one_of(st.none(), side))
def test_mirrored_lane_never_attracts(speed, ahead, behind):
    """A neighbour lane holding exactly what the own lane holds is never worth changing to."""
    me = make(1, 2, 500.0, speed)
    others = []
    vid = 2
    for lane in (2, 1):
        if ahead is not None:
            others.append(make(vid, lane, 500.0 + 5.0 + ahead[0], ahead[1]))
            vid += 1
        if behind is not None:
            others.append(make(vid, lane, 500.0 - 5.0 - behind[0], behind[1]))
            vid += 1
    w = world(me, *others)
    gain = lane_change_incentive(me, F(1), w, LC)
    assume(gain is not None)
    # the old follower gains what the new one loses, weighted alike
    assert gain <= 1e-9
    assert lane_change_decision(me, F(1), w, LC) is LaneChange.STAY


# -- integration and blockage -------------------------------------------

def test_semi_implicit_step():
    v = make(1, 1, 0.0, 10.0)
    step_kinematics(v, 1.0, 0.5)
    assert v.speed == 10.5
    assert v.position == 5.25


def test_speed_never_negative():
    v = make(1, 1, 50.0, 0.2)
    step_kinematics(v, -1.0, 0.5)
    assert v.speed == 0.0 and v.position == 50.0


def test_speed_capped_at_limit():
    v = make(1, 1, 0.0, 22.0)
    step_kinematics(v, 1.5, 0.5)
    assert v.speed == v.driving.max_speed


def test_standstill_snap():
    v = make(1, 1, 0.0, 0.1)
    step_kinematics(v, -0.1, 0.5, standstill_speed=0.1)
    assert v.speed == 0.0


def test_blocked_vehicle_does_not_move():
    v = make(1, 1, 40.0, 12.0)
    apply_blockage(v)
    step_kinematics(v, 1.5, 0.5)
    assert (v.speed, v.position, v.accel) == (0.0, 40.0, 0.0)


def test_step_needs_positive_dt():
    with pytest.raises(ValueError):
        step_kinematics(make(1, 1, 0.0), 0.0, 0.0)


def test_apply_blockage_is_idempotent():
    v = make(1, 1, 10.0, 30.0)
    assert apply_blockage(v) is True
    assert v.status is Status.BLOCKED and v.speed == 0.0
    assert apply_blockage(v) is False
    assert v.status is Status.BLOCKED


def test_truck_parameters():
    t = make(1, 1, 0.0, kind=Kind.TRUCK)
    assert t.driving.max_speed == 15.0
    assert t.length == 12.0
    assert t.driving.max_accel == 1.0


@pytest.mark.parametrize("field", ["time_headway", "max_accel", "comfortable_decel", "min_gap"])
def test_driving_params_must_be_positive(field):
    with pytest.raises(ValueError):
        DrivingParams(desired_speed=30.0, **{field: 0.0})


def test_lane_change_params_validation():
    with pytest.raises(ValueError):
        LaneChangeParams(safe_decel=0.0)
    with pytest.raises(ValueError):
        LaneChangeParams(sight_distance=0.0)
