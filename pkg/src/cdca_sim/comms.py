"""Loss-free unit-disc radio: V2V geobroadcast and roadside-unit coverage.

Positions here are on the shared physical x axis, so both carriageways hear
each other. Range boundaries are inclusive.
"""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .protocol import Source, Transmission, WarningMessage


@dataclass(frozen=True)
class Rsu:
    id: int
    position: float
    coverage_radius: float


def rsu_layout(main_length: float, spacing: float, coverage_radius: float,
               positions: Optional[Iterable[float]] = None) -> list[Rsu]:
    """Towers every ``spacing`` metres, the first half a spacing in, unless given explicitly."""
    if positions is None:
        positions = []
        x = spacing / 2.0
        while x < main_length:
            positions.append(x)
            x += spacing
    return [Rsu(i, float(p), coverage_radius) for i, p in enumerate(positions)]


def in_v2v_range(pos_a: float, pos_b: float, v2v_range: float) -> bool:
    return abs(pos_a - pos_b) <= v2v_range


def rsu_covers(rsu: Rsu, pos: float) -> bool:
    return abs(rsu.position - pos) <= rsu.coverage_radius


@dataclass
class Inbox:
    recipient: Source
    messages: list = field(default_factory=list)
    _seen: set = field(default_factory=set, repr=False)

    def offer(self, msg: WarningMessage) -> bool:
        if msg.message_id in self._seen:
            return False
        self._seen.add(msg.message_id)
        self.messages.append(msg)
        return True

    @property
    def message_ids(self) -> list[int]:
        return [m.message_id for m in self.messages]


def deliver(transmissions: Iterable[Transmission], vehicle_positions: Mapping[int, float],
            rsus: Iterable[Rsu], v2v_range: float, drop_probability: float = 0.0,
            rng: Optional[random.Random] = None) -> dict[Source, Inbox]:
    """Route one tick's transmissions to every node in range.

    Vehicle transmissions reach other vehicles within ``v2v_range`` of the
    emit point and every roadside unit covering it. Roadside-unit
    transmissions reach vehicles inside that unit's coverage. Each inbox keeps
    one copy per message id: the copy from the lowest source wins, so the
    result does not depend on the order of ``transmissions``.
    """
    rsus = list(rsus)
    ordered = sorted(transmissions, key=lambda t: (t.emit_tick, t.source.sort_key(), t.message.message_id))
    xs = sorted((x, vid) for vid, x in vehicle_positions.items())
    keys = [x for x, _ in xs]
    inboxes: dict[Source, Inbox] = {}

    lossy = bool(drop_probability) and rng is not None

    def hand(recipient: Source, msg: WarningMessage) -> None:
        if lossy and rng.random() < drop_probability:
            return
        box = inboxes.get(recipient)
        if box is None:
            box = inboxes[recipient] = Inbox(recipient)
        if msg.message_id not in box._seen:
            box._seen.add(msg.message_id)
            box.messages.append(msg)

    for tx in ordered:
        if tx.source.kind == "vehicle":
            centre, radius = tx.emit_position, v2v_range
        else:
            rsu = next(r for r in rsus if r.id == tx.source.id)
            centre, radius = rsu.position, rsu.coverage_radius
        # widened window, then the exact inclusive test
        slack = 1e-6 * (1.0 + abs(centre) + radius)
        lo = bisect.bisect_left(keys, centre - radius - slack)
        hi = bisect.bisect_right(keys, centre + radius + slack)
        for x, vid in xs[lo:hi]:
            if tx.source.kind == "vehicle" and vid == tx.source.id:
                continue
            if abs(x - centre) > radius:
                continue
            hand(Source("vehicle", vid), tx.message)
        if tx.source.kind == "vehicle":
            for rsu in rsus:
                if rsu_covers(rsu, tx.emit_position):
                    hand(Source("rsu", rsu.id), tx.message)
    return inboxes
