"""Highway geometry, lane adjacency and neighbour/gap queries."""

from __future__ import annotations

import bisect
import enum
import functools
import math
from dataclasses import dataclass
from typing import ClassVar, Iterable, NamedTuple, Optional

INF = math.inf


class GeometryError(ValueError):
    """Raised for an impossible road layout."""


class Direction(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"

    @property
    def code(self) -> str:
        return "F" if self is Direction.FORWARD else "B"


@dataclass(frozen=True, eq=False)
class LaneId:
    """A lane of one carriageway.

    Main lanes use index 1 (upper), 2 (middle), 3 (lower). The on-ramp
    acceleration lane uses index 0 and sits beside lane 3.

    Instances are interned, so equality and hashing are identity based and
    cheap in the per-lane dictionaries the simulation leans on.
    """

    direction: Direction
    index: int
    _interned: ClassVar[dict] = {}

    def __new__(cls, direction: Direction, index: int) -> "LaneId":
        if not isinstance(index, int) or isinstance(index, bool):
            raise TypeError(f"lane index must be an int, got {index!r}")
        key = (Direction(direction), index)
        inst = cls._interned.get(key)
        if inst is None:
            inst = cls._interned[key] = object.__new__(cls)
        return inst

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))

    def __getnewargs__(self) -> tuple:
        return (self.direction, self.index)

    @property
    def is_ramp(self) -> bool:
        return self.index == RAMP_INDEX

    def sort_key(self) -> tuple[int, int]:
        return (0 if self.direction is Direction.FORWARD else 1, self.index)

    def __lt__(self, other: "LaneId") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return f"{self.direction.code}{self.index}"

    @classmethod
    def parse(cls, text: str) -> "LaneId":
        """Inverse of ``str(lane)``, e.g. ``"F2"``."""
        if len(text) < 2 or text[0] not in "FB":
            raise ValueError(f"bad lane code {text!r}")
        direction = Direction.FORWARD if text[0] == "F" else Direction.BACKWARD
        return cls(direction, int(text[1:]))


RAMP_INDEX = 0
MAIN_INDICES = (1, 2, 3)


def lane(index: int, direction: Direction = Direction.FORWARD) -> LaneId:
    return LaneId(direction, index)


def adjacent_lanes(lane_id: LaneId) -> list[LaneId]:
    """Main lanes one lane change away, same direction, ordered by index."""
    if lane_id.index not in MAIN_INDICES:
        raise ValueError(f"not a main lane: {lane_id}")
    return list(_adjacent(lane_id))


@functools.lru_cache(maxsize=None)
def _adjacent(lane_id: LaneId) -> tuple[LaneId, ...]:
    return tuple(
        LaneId(lane_id.direction, i)
        for i in (lane_id.index - 1, lane_id.index + 1)
        if i in MAIN_INDICES
    )


@dataclass(frozen=True)
class RoadNetwork:
    main_length: float = 10_000.0
    ramp_length: float = 300.0
    merge_position: float = 2_000.0
    lanes_per_direction: int = 3
    directions: int = 2

    def __post_init__(self):
        problems = []
        if self.main_length <= 0:
            problems.append("main_length must be positive")
        if self.ramp_length <= 0:
            problems.append("ramp_length must be positive")
        if not 0 < self.merge_position < self.main_length:
            problems.append("merge_position must lie strictly inside the main flow")
        elif self.ramp_length > self.merge_position:
            problems.append("ramp would start before the road origin")
        if self.lanes_per_direction != len(MAIN_INDICES):
            problems.append("only 3 lanes per direction are supported")
        if self.directions not in (1, 2):
            problems.append("directions must be 1 or 2")
        if problems:
            raise GeometryError("; ".join(problems))

    @property
    def ramp_start(self) -> float:
        return self.merge_position - self.ramp_length

    @property
    def direction_list(self) -> list[Direction]:
        return list(Direction)[: self.directions]

    def main_lanes(self, direction: Direction = Direction.FORWARD) -> list[LaneId]:
        return [LaneId(direction, i) for i in MAIN_INDICES]

    def ramp_lane(self, direction: Direction = Direction.FORWARD) -> LaneId:
        return LaneId(direction, RAMP_INDEX)

    def lanes(self) -> list[LaneId]:
        out = []
        for d in self.direction_list:
            out.append(self.ramp_lane(d))
            out.extend(self.main_lanes(d))
        return out

    def in_merge_zone(self, position: float) -> bool:
        return self.ramp_start <= position <= self.merge_position

    def adjacent_lanes(self, lane_id: LaneId, position: Optional[float] = None) -> list[LaneId]:
        """Lanes reachable by one lane change at ``position``.

        The ramp only connects to lane 3, and only along the merge zone.
        Nothing changes *into* the ramp.
        """
        if lane_id.index == RAMP_INDEX:
            if position is None or self.in_merge_zone(position):
                return [LaneId(lane_id.direction, 3)]
            return []
        return list(_adjacent(lane_id))

    def lane_end(self, lane_id: LaneId) -> float:
        """Longitudinal end of a lane; the ramp ends at the merge point."""
        return self.merge_position if lane_id.is_ramp else INF

    def to_physical(self, direction: Direction, position: float) -> float:
        """Map a along-travel coordinate to the shared x axis used for radio range."""
        if direction is Direction.FORWARD:
            return position
        return self.main_length - position


def build_network(config) -> RoadNetwork:
    return RoadNetwork(
        main_length=config.main_length,
        ramp_length=config.ramp_length,
        merge_position=config.merge_position,
        lanes_per_direction=config.lanes_per_direction,
        directions=config.directions,
    )


class GapView(NamedTuple):
    leader_id: Optional[int] = None
    net_gap: float = INF
    leader_speed: float = 0.0
    follower_id: Optional[int] = None
    follower_gap: float = INF
    follower_speed: float = 0.0


class Traffic:
    """Vehicles indexed per lane by ``(position, id)``.

    Vehicles are duck-typed: ``id``, ``lane``, ``position``, ``length`` and
    ``speed`` are all that is read here.
    """

    def __init__(self, network: RoadNetwork, vehicles: Iterable = ()):
        self.network = network
        self.vehicles: dict = {}
        self._lanes: dict[LaneId, list[tuple[float, int]]] = {}
        for v in vehicles:
            self.vehicles[v.id] = v
        self.reindex()

    def reindex(self) -> None:
        lanes: dict[LaneId, list[tuple[float, int]]] = {}
        for v in self.vehicles.values():
            lanes.setdefault(v.lane, []).append((v.position, v.id))
        for keys in lanes.values():
            keys.sort()
        self._lanes = lanes

    def add(self, vehicle) -> None:
        if vehicle.id in self.vehicles:
            raise ValueError(f"duplicate vehicle id {vehicle.id}")
        self.vehicles[vehicle.id] = vehicle
        bisect.insort(self._lanes.setdefault(vehicle.lane, []), (vehicle.position, vehicle.id))

    def remove(self, vehicle_id: int):
        v = self.vehicles.pop(vehicle_id)
        keys = self._lanes[v.lane]
        keys.pop(bisect.bisect_left(keys, (v.position, v.id)))
        return v

    def move_lane(self, vehicle_id: int, new_lane: LaneId) -> None:
        v = self.remove(vehicle_id)
        v.lane = new_lane
        self.add(v)

    def lane_keys(self, lane_id: LaneId) -> list[tuple[float, int]]:
        return self._lanes.get(lane_id, [])

    def lane_vehicles(self, lane_id: LaneId) -> list:
        """Vehicles in a lane, upstream first."""
        return [self.vehicles[i] for _, i in self.lane_keys(lane_id)]

    def gap_view(self, vehicle_id: int, target_lane: LaneId) -> GapView:
        me = self.vehicles.get(vehicle_id)
        if me is None:
            raise KeyError(f"unknown vehicle {vehicle_id}")
        keys = self._lanes.get(target_lane, ())
        key = (me.position, me.id)
        hi = bisect.bisect_right(keys, key)
        lo = bisect.bisect_left(keys, key)
        leader_id = follower_id = None
        net_gap = follower_gap = INF
        leader_speed = follower_speed = 0.0
        if hi < len(keys):
            lead = self.vehicles[keys[hi][1]]
            leader_id, leader_speed = lead.id, lead.speed
            net_gap = max(0.0, lead.position - lead.length - me.position)
        if lo > 0:
            foll = self.vehicles[keys[lo - 1][1]]
            follower_id, follower_speed = foll.id, foll.speed
            follower_gap = max(0.0, me.position - me.length - foll.position)
        return GapView(leader_id, net_gap, leader_speed, follower_id, follower_gap, follower_speed)

    def min_net_gap(self) -> tuple[float, Optional[tuple[int, int]]]:
        """Smallest bumper-to-bumper gap between consecutive vehicles in any lane."""
        worst, pair = INF, None
        for keys in self._lanes.values():
            for (_, rear_id), (_, front_id) in zip(keys, keys[1:]):
                rear, front = self.vehicles[rear_id], self.vehicles[front_id]
                gap = front.position - front.length - rear.position
                if gap < worst:
                    worst, pair = gap, (rear_id, front_id)
        return worst, pair
