"""Car following, lane changing and kinematic integration.

Longitudinal motion uses an Intelligent-Driver-Model style law. Lane
changes follow an incentive/safety rule weighted by a politeness factor
and gated by a changing threshold.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

from .protocol import ProtocolState
from .road import INF, LaneId

log = logging.getLogger(__name__)


def kmh_to_ms(kmh: float) -> float:
    # 1000/3600 keeps 108 and 54 km/h exact in binary floating point
    return kmh * 1000.0 / 3600.0


class NonPositiveGapError(ValueError):
    """The follower already touches its leader; caller must emergency-brake."""


class Kind(str, enum.Enum):
    CAR = "car"
    TRUCK = "truck"


class Status(str, enum.Enum):
    ACTIVE = "active"
    BLOCKED = "blocked"
    DIVERTING = "diverting"


class LaneChange(str, enum.Enum):
    STAY = "stay"
    CHANGE = "change"


@dataclass(frozen=True)
class VehicleClass:
    kind: Kind
    desired_speed: float
    length: float


@dataclass(frozen=True)
class DrivingParams:
    desired_speed: float
    time_headway: float = 1.5
    max_accel: float = 1.5
    comfortable_decel: float = 2.0
    min_gap: float = 2.0
    accel_exponent: float = 4.0
    speed_limit: float = kmh_to_ms(80.0)
    emergency_decel: float = 8.0
    max_speed: float = field(init=False, repr=False, compare=False)
    # 2 * sqrt(a * b), the denominator of the approach-rate term
    brake_scale: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("desired_speed", "time_headway", "max_accel", "comfortable_decel",
                     "min_gap", "accel_exponent", "speed_limit", "emergency_decel"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        object.__setattr__(self, "max_speed", min(self.desired_speed, self.speed_limit))
        object.__setattr__(self, "brake_scale", 2.0 * math.sqrt(self.max_accel * self.comfortable_decel))


@dataclass(frozen=True)
class LaneChangeParams:
    politeness: float = 0.25
    changing_threshold: float = 0.2
    safe_decel: float = 4.0
    # how far ahead a driver judges lanes when weighing a change; inf = perfect view
    sight_distance: float = INF
    # a standing vehicle only changes lane if it could pull away at least this hard there
    start_accel: float = 0.0

    def __post_init__(self):
        if self.safe_decel <= 0:
            raise ValueError("safe_decel must be positive")
        if self.sight_distance <= 0:
            raise ValueError("sight_distance must be positive")


@dataclass(eq=False)
class Vehicle:
    id: int
    vclass: VehicleClass
    lane: LaneId
    position: float
    speed: float
    driving: DrivingParams
    accel: float = 0.0
    status: Status = Status.ACTIVE
    protocol: ProtocolState = field(default_factory=ProtocolState)
    # advisory cap on desired speed, set by the protocol layer
    speed_cap: Optional[float] = None
    last_lane_change: float = -INF
    stopped_since: Optional[float] = None
    # copied from the class: read in every gap computation
    length: float = field(init=False, repr=False)

    def __post_init__(self):
        self.length = self.vclass.length

    @property
    def kind(self) -> Kind:
        return self.vclass.kind

    @property
    def target_speed(self) -> float:
        v0, cap = self.driving.max_speed, self.speed_cap
        return v0 if cap is None or cap >= v0 else cap


def following_accel(speed: float, net_gap: float, approach_rate: float,
                    params: DrivingParams, desired_speed: Optional[float] = None) -> float:
    """Acceleration of a follower.

    ``approach_rate`` is own speed minus leader speed. ``net_gap`` may be
    ``inf`` for an empty road ahead. ``desired_speed`` overrides the
    parameter set (advisory caps); when the vehicle is faster than it, the
    free-road term relaxes towards it at most at the comfortable rate instead
    of blowing up.
    """
    if net_gap <= 0:
        raise NonPositiveGapError(f"net gap {net_gap}")
    a, b = params.max_accel, params.comfortable_decel
    v0 = params.max_speed if desired_speed is None else desired_speed
    if net_gap == INF:
        interaction = 0.0
    else:
        dynamic = speed * (params.time_headway + approach_rate / params.brake_scale)
        s_star = params.min_gap + dynamic if dynamic > 0.0 else params.min_gap
        interaction = (s_star / net_gap) ** 2
    if speed <= v0:
        acc = a * (1.0 - (speed / v0) ** params.accel_exponent - interaction)
    else:
        acc = -b * (1.0 - (v0 / speed) ** (a * params.accel_exponent / b)) - a * interaction
    if acc > a:
        return a
    return acc if acc > -params.emergency_decel else -params.emergency_decel


def vehicle_accel(vehicle: Vehicle, net_gap: float, leader_speed: float,
                  speed: Optional[float] = None) -> float:
    """``following_accel`` for a concrete vehicle, emergency braking on contact."""
    if net_gap <= 0:
        return -vehicle.driving.emergency_decel
    v = vehicle.speed if speed is None else speed
    return following_accel(v, net_gap, v - leader_speed, vehicle.driving, vehicle.target_speed)


def leader_terms(vehicle: Vehicle, lane_id: LaneId, world) -> tuple[float, float]:
    """(net gap, leader speed) ahead of ``vehicle`` in ``lane_id``, lane end included."""
    view = world.gap_view(vehicle.id, lane_id)
    gap, lead_speed = view.net_gap, view.leader_speed
    wall = world.network.lane_end(lane_id) - vehicle.position
    if wall < gap:
        gap, lead_speed = max(0.0, wall), 0.0
    return gap, lead_speed


def _gap_between(rear: Vehicle, front: Optional[Vehicle], lane_id: LaneId, world) -> tuple[float, float]:
    wall = world.network.lane_end(lane_id) - rear.position
    if front is None:
        return (max(0.0, wall), 0.0) if wall < INF else (INF, 0.0)
    gap = max(0.0, front.position - front.length - rear.position)
    if wall < gap:
        return max(0.0, wall), 0.0
    return gap, front.speed


def staying_terms(vehicle: Vehicle, world, params: LaneChangeParams) -> tuple[float, float]:
    """Parts of the incentive that only depend on the current lane.

    Returns (own acceleration if staying, politeness-weighted gain of the
    current follower if we leave). Shared by every candidate lane.
    """
    vs = world.vehicles
    cur = world.gap_view(vehicle.id, vehicle.lane)
    old_l = vs[cur.leader_id] if cur.leader_id is not None else None
    own_before = _gap_between(vehicle, old_l, vehicle.lane, world)
    if own_before[0] > params.sight_distance:
        own_before = (INF, 0.0)
    own = vehicle_accel(vehicle, *own_before)
    follower_gain = 0.0
    if cur.follower_id is not None:
        old_f = vs[cur.follower_id]
        of_before = vehicle_accel(old_f, cur.follower_gap, vehicle.speed)
        of_after = vehicle_accel(old_f, *_gap_between(old_f, old_l, vehicle.lane, world))
        follower_gain = params.politeness * (of_after - of_before)
    return own, follower_gain


def lane_change_incentive(vehicle: Vehicle, target_lane: LaneId, world,
                          params: LaneChangeParams,
                          staying=None) -> Optional[float]:
    """Net acceleration gain of moving to ``target_lane``, or None if unsafe.

    Safety: neither the new follower nor the vehicle itself may need to brake
    harder than ``params.safe_decel``, and both net gaps must be at least the
    standstill spacing of the vehicle behind them.
    The vehicle's own prospects in either lane ignore anything beyond
    ``params.sight_distance``.
    The gain is the vehicle's own change plus politeness times the changes
    felt by the old and new followers. ``staying`` may carry a precomputed
    ``staying_terms`` result, or a function returning one that is only
    called once the target lane has passed the safety checks.
    """
    if vehicle.status is Status.BLOCKED:
        return None
    vs = world.vehicles
    tgt = world.gap_view(vehicle.id, target_lane)
    # nobody squeezes into a gap shorter than the standstill spacing
    if tgt.leader_id is not None and tgt.net_gap < vehicle.driving.min_gap:
        return None
    new_f = vs[tgt.follower_id] if tgt.follower_id is not None else None
    if new_f is not None and tgt.follower_gap < new_f.driving.min_gap:
        return None

    new_l = vs[tgt.leader_id] if tgt.leader_id is not None else None
    nf_after = 0.0
    if new_f is not None:
        nf_after = vehicle_accel(new_f, tgt.follower_gap, vehicle.speed)
        if nf_after < -params.safe_decel:
            return None

    own_view = _gap_between(vehicle, new_l, target_lane, world)
    if own_view[0] > params.sight_distance:
        own_view = (INF, 0.0)
    own_after = vehicle_accel(vehicle, *own_view)
    if own_after < -params.safe_decel:
        return None
    if vehicle.speed == 0.0 and own_after <= params.start_accel:
        return None

    if staying is None:
        staying = staying_terms(vehicle, world, params)
    elif callable(staying):
        staying = staying()
    own_before, follower_gain = staying
    gain = own_after - own_before + follower_gain
    if new_f is not None:
        nf_before = vehicle_accel(new_f, *_gap_between(new_f, new_l, target_lane, world))
        gain += params.politeness * (nf_after - nf_before)
    return gain


def lane_change_decision(vehicle: Vehicle, target_lane: LaneId, world,
                         params: LaneChangeParams, bias: float = 0.0) -> LaneChange:
    """Change only if safe and the incentive plus ``bias`` strictly beats the threshold."""
    gain = lane_change_incentive(vehicle, target_lane, world, params)
    if gain is not None and gain + bias > params.changing_threshold:
        return LaneChange.CHANGE
    return LaneChange.STAY


def step_kinematics(vehicle: Vehicle, accel: float, dt: float, standstill_speed: float = 0.0) -> None:
    """Semi-implicit Euler step: speed first, then position with the new speed.

    Speeds below ``standstill_speed`` snap to exactly zero so queued vehicles
    really stand still instead of creeping.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if vehicle.status is Status.BLOCKED:
        vehicle.speed = 0.0
        vehicle.accel = 0.0
        return
    speed = min(max(vehicle.speed + accel * dt, 0.0), vehicle.driving.max_speed)
    if speed < standstill_speed:
        speed = 0.0
    vehicle.accel = accel
    vehicle.speed = speed
    vehicle.position += speed * dt


def apply_blockage(vehicle: Vehicle) -> bool:
    """Stop a vehicle dead in its lane. Returns False if it was already blocked."""
    if vehicle.status is Status.BLOCKED:
        log.info("vehicle %d already blocked", vehicle.id)
        return False
    vehicle.status = Status.BLOCKED
    vehicle.speed = 0.0
    vehicle.accel = 0.0
    return True
