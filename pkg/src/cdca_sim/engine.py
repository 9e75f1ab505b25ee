"""Deterministic tick loop: accidents, delivery, protocol, lane changes, motion, flow, metrics.

Every tick runs the same seven phases in the same order. A transmission
emitted in tick ``k`` is delivered in tick ``k + 1``.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field, replace
from typing import Optional

from . import protocol as proto
from .comms import Rsu, deliver, rsu_layout
from .config import AccidentEvent, ScenarioConfig
from .dynamics import (
    Kind,
    LaneChange,
    LaneChangeParams,
    Status,
    Vehicle,
    apply_blockage,
    following_accel,
    lane_change_decision,
    lane_change_incentive,
    staying_terms,
    step_kinematics,
    vehicle_accel,
)
from .metrics import EventLogEntry, MetricsRecord, per_lane_congestion
from .protocol import Action, Decision, Mode, ProtocolParams, RsuState, Source
from .road import INF, Direction, LaneId, Traffic, build_network

log = logging.getLogger(__name__)

# phase numbers, used to order events inside a tick
ACCIDENTS, DELIVERY, PROTOCOL, LANE_CHANGE, MOTION, FLOW, METRICS = range(1, 8)
STALL_SEARCH = 100.0


class SimulationInvariantError(RuntimeError):
    """A runtime invariant broke (collision, speed bound). Carries a world dump."""

    def __init__(self, message: str, dump: str = ""):
        super().__init__(message)
        self.dump = dump


@dataclass
class RunResult:
    config: ScenarioConfig
    metrics: list = field(default_factory=list)
    events: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


class Simulation:
    def __init__(self, config: ScenarioConfig):
        self.cfg = config
        self.network = build_network(config)
        self.traffic = Traffic(self.network)
        self.rsus: list[Rsu] = rsu_layout(config.main_length, config.rsu_spacing,
                                          config.rsu_coverage, config.rsu_positions)
        self.rsu_states = {r.id: RsuState() for r in self.rsus}
        self.rng = random.Random(config.seed)
        self.params = ProtocolParams(
            rebroadcast_ticks=config.ticks(config.rebroadcast_interval),
            max_hops=config.max_hops,
            lookahead=config.lookahead,
            advisory_factor=config.advisory_factor,
            cessation=config.cessation,
            message_ttl_ticks=config.ticks(config.message_ttl) if config.message_ttl > 0 else 0,
        )
        self.lc_params = config.lane_change_params()
        self._gentle_lc = replace(self.lc_params,
                                  safe_decel=min(self.lc_params.safe_decel, config.comfortable_decel))
        self.tick = 0
        self._next_vehicle = 1
        self._next_message = 1
        self.pending: list = []
        self.accidents = sorted(config.accidents, key=lambda a: (a.time, a.lane.sort_key(), a.position))
        self._accident_cursor = 0
        # message id (or negative vehicle id without protocol) -> (vehicle id, clear tick)
        self.incidents: dict[int, tuple[int, Optional[int]]] = {}
        self.messages_total = 0
        self.diversions = 0
        self.malformed = 0
        self.max_queued_stop = 0.0
        self.metrics: list[MetricsRecord] = []
        self.events: list[EventLogEntry] = []
        self.snapshots: list[list[str]] = []
        self._tick_events: list[tuple] = []
        self._snapshot_ticks = config.ticks(config.snapshot_interval) if config.snapshot_interval > 0 else 0
        self._cooldown = config.lane_change_cooldown
        # discretionary changes are reconsidered once per this many ticks, staggered by id
        self._lc_period = config.ticks(config.lane_change_interval)
        # vehicle id -> lanes it knows blocked ahead, refreshed in the protocol phase
        self._blocked_ahead: dict[int, set] = {}
        if config.prefill:
            self._prefill()

    @property
    def time(self) -> float:
        return self.tick * self.cfg.dt

    # -- helpers ---------------------------------------------------------

    def _event(self, phase: int, kind: str, subject: Source, message_id=None, detail: str = "") -> None:
        key = (phase, subject.kind != "vehicle", subject.id, len(self._tick_events))
        self._tick_events.append((key, EventLogEntry(self.time, kind, str(subject), message_id, detail)))

    def _x(self, v: Vehicle) -> float:
        return self.network.to_physical(v.lane.direction, v.position)

    def _new_vehicle(self, kind: Kind, lane: LaneId, position: float, speed: float) -> Vehicle:
        v = Vehicle(
            id=self._next_vehicle,
            vclass=self.cfg.vehicle_class(kind),
            lane=lane,
            position=position,
            speed=speed,
            driving=self.cfg.driving_params(kind),
        )
        self._next_vehicle += 1
        self.traffic.add(v)
        return v

    def add_vehicle(self, kind: Kind, lane: LaneId, position: float, speed: float = 0.0) -> Vehicle:
        """Place a vehicle by hand (scripted scenarios and tests)."""
        if len(self.traffic.vehicles) >= self.cfg.vehicle_count:
            raise ValueError("population target reached")
        v = self._new_vehicle(kind, lane, position, min(speed, self.cfg.driving_params(kind).max_speed))
        self.events.append(EventLogEntry(self.time, "spawn", str(Source("vehicle", v.id)),
                                         detail=f"{kind.value} lane={lane} placed"))
        return v

    def _lane_gaps(self, v: Vehicle) -> dict[LaneId, float]:
        return {ln: self.traffic.gap_view(v.id, ln).net_gap
                for ln in self.network.adjacent_lanes(v.lane, v.position)}

    def dump(self) -> str:
        lines = [f"tick={self.tick} t={self.time:.3f}"]
        for vid in sorted(self.traffic.vehicles):
            v = self.traffic.vehicles[vid]
            lines.append(f"v{vid} {v.kind.value} lane={v.lane} s={v.position:.3f} "
                         f"v={v.speed:.3f} a={v.accel:.3f} {v.status.value} {v.protocol.mode.value}")
        return "\n".join(lines)

    # -- phase 1 ---------------------------------------------------------

    def _bind_accident(self, ev: AccidentEvent) -> Optional[Vehicle]:
        lane_vs = self.traffic.lane_vehicles(ev.lane)
        upstream = [v for v in lane_vs if v.status is not Status.BLOCKED
                    and v.position <= ev.position and ev.position - v.position <= STALL_SEARCH]
        if upstream:
            return max(upstream, key=lambda v: (v.position, -v.id))
        stall_len = self.cfg.car_length
        overlapping = [v for v in lane_vs if v.status is not Status.BLOCKED
                       and v.position - v.length < ev.position and v.position > ev.position - stall_len]
        if overlapping:
            return min(overlapping, key=lambda v: (v.position, v.id))
        if len(self.traffic.vehicles) < self.cfg.vehicle_count:
            v = self._new_vehicle(Kind.CAR, ev.lane, ev.position, 0.0)
            self._event(ACCIDENTS, "spawn", Source("vehicle", v.id), detail=f"stalled lane={ev.lane}")
            return v
        anywhere = [v for v in lane_vs if v.status is not Status.BLOCKED and v.position <= ev.position]
        if anywhere:
            return max(anywhere, key=lambda v: (v.position, -v.id))
        log.warning("accident at t=%.1f in %s has no vehicle to stop", ev.time, ev.lane)
        return None

    def _phase_accidents(self) -> None:
        eps = 1e-9
        while self._accident_cursor < len(self.accidents) and \
                self.accidents[self._accident_cursor].time <= self.time + eps:
            ev = self.accidents[self._accident_cursor]
            self._accident_cursor += 1
            v = self._bind_accident(ev)
            if v is None or not apply_blockage(v):
                continue
            self._event(ACCIDENTS, "accident", Source("vehicle", v.id),
                        detail=f"lane={v.lane} position={v.position:.3f}")
            clear = None
            if self.cfg.incident_duration > 0:
                clear = self.tick + self.cfg.ticks(self.cfg.incident_duration)
            if self.cfg.cdca_enabled:
                msg = proto.on_accident(v, self._next_message, self.tick)
                if msg is not None:
                    self.incidents[msg.message_id] = (v.id, clear)
                    self._next_message += 1
            else:
                self.incidents[-v.id] = (v.id, clear)
        for key, (vid, clear) in list(self.incidents.items()):
            if clear is not None and self.tick >= clear:
                self._clear_incident(key, vid)

    def _clear_incident(self, key: int, vid: int) -> None:
        del self.incidents[key]
        if vid in self.traffic.vehicles:
            self.traffic.remove(vid)
            self._event(ACCIDENTS, "despawn", Source("vehicle", vid), detail="cleared")
        if key > 0:
            for st in self.rsu_states.values():
                proto.rsu_clear(st, key)
            for v in self.traffic.vehicles.values():
                proto.forget_incident(v.protocol, key)
                if v.protocol.planned_target_lane is None and v.status is Status.DIVERTING:
                    v.status = Status.ACTIVE

    # -- phases 2 and 3 --------------------------------------------------

    def _handle(self, v: Vehicle, decision: Decision, msg_id: int) -> None:
        if decision.action is Action.DIVERT:
            v.status = Status.DIVERTING
            self.diversions += 1
            self._event(PROTOCOL, "diversion", Source("vehicle", v.id), msg_id,
                        f"from={v.lane} to={decision.target_lane} forward={int(decision.forward)}")

    def _phase_protocol(self, inboxes) -> int:
        cfg, params = self.cfg, self.params
        sent = 0
        self._blocked_ahead = {}
        for vid in sorted(self.traffic.vehicles):
            v = self.traffic.vehicles[vid]
            box = inboxes.get(Source("vehicle", vid))
            if box is not None:
                known = v.protocol.known_message_ids
                for msg in box.messages:
                    is_new = msg.message_id not in known
                    if not is_new:
                        continue  # on_receive ignores known ids; skip the call
                    try:
                        decision = proto.on_receive(v, msg, params, self._lane_gaps(v) if is_new else {})
                    except proto.MalformedMessageError as exc:
                        self.malformed += 1
                        log.info("rejected: %s", exc)
                        continue
                    if is_new:
                        self._event(PROTOCOL, "receive", Source("vehicle", vid), msg.message_id,
                                    f"action={decision.action.value} rsu={int(msg.relayed_by_rsu)} "
                                    f"hops={msg.hop_count}")
                    self._handle(v, decision, msg.message_id)
            if v.protocol.incidents:
                blocked = self._blocked_ahead[vid] = proto.blocked_lanes_ahead(v)
                if v.lane in blocked and v.protocol.planned_target_lane is None:
                    decision = proto.reassess(v, params, self._lane_gaps(v))
                    self._handle(v, decision, v.protocol.diverting_from)
                v.speed_cap = proto.advisory_cap(v, params, cfg.speed_limit)
        for rsu in self.rsus:
            box = inboxes.get(Source("rsu", rsu.id))
            if box is None:
                continue
            for msg in box.messages:
                try:
                    new = proto.rsu_on_receive(self.rsu_states[rsu.id], msg, self.tick)
                except proto.MalformedMessageError:
                    self.malformed += 1
                    continue
                if new:
                    self._event(PROTOCOL, "receive", Source("rsu", rsu.id), msg.message_id, "schedule")
        for vid in sorted(self.traffic.vehicles):
            v = self.traffic.vehicles[vid]
            src = Source("vehicle", vid)
            for tx in proto.broadcast_tick(v.protocol, self.tick, params.rebroadcast_ticks,
                                           source=src, emit_position=self._x(v)):
                self.pending.append(tx)
                sent += 1
                self._event(PROTOCOL, "broadcast", src, tx.message.message_id, tx.message.serialize())
        for rsu in self.rsus:
            src = Source("rsu", rsu.id)
            for tx in proto.rsu_broadcast_tick(self.rsu_states[rsu.id], self.tick, params.rebroadcast_ticks,
                                               params, source=src, emit_position=rsu.position):
                self.pending.append(tx)
                sent += 1
                self._event(PROTOCOL, "broadcast", src, tx.message.message_id, tx.message.serialize())
        return sent

    # -- phase 4 ---------------------------------------------------------

    def _change_lane(self, v: Vehicle, target: LaneId) -> None:
        was_diverting = v.protocol.planned_target_lane is not None
        old = v.lane
        self.traffic.move_lane(v.id, target)
        v.last_lane_change = self.time
        if was_diverting and v.lane != old:
            mid = v.protocol.diverting_from
            if proto.on_lane_change_complete(v.protocol, self.cfg.cessation):
                self._event(LANE_CHANGE, "cessation", Source("vehicle", v.id), mid, f"lane={v.lane}")
            if v.status is Status.DIVERTING:
                v.status = Status.ACTIVE

    def _diversion_params(self, v: Vehicle) -> LaneChangeParams:
        """Diverters with room to spare only take gaps the new follower can absorb comfortably."""
        inc = v.protocol.incidents.get(v.protocol.diverting_from)
        if inc is None or inc.message.incident_position - v.position <= self.cfg.urgent_distance:
            return self.lc_params
        return self._gentle_lc

    def _gap_taken(self, v: Vehicle, target: LaneId) -> bool:
        """True if a neighbour of the target gap already changed lanes this tick.

        Keeps two vehicles from opposite sides from filling one gap at once.
        """
        view = self.traffic.gap_view(v.id, target)
        vs = self.traffic.vehicles
        for other in (view.leader_id, view.follower_id):
            if other is not None and vs[other].last_lane_change == self.time:
                return True
        return False

    def _phase_lane_changes(self) -> None:
        vs = self.traffic.vehicles
        forced = [vid for vid in sorted(vs) if vs[vid].protocol.planned_target_lane is not None]
        for vid in forced:
            v = vs[vid]
            target = v.protocol.planned_target_lane
            if target not in self.network.adjacent_lanes(v.lane, v.position) or self._gap_taken(v, target):
                continue
            if lane_change_decision(v, target, self.traffic, self._diversion_params(v),
                                    bias=self.cfg.diversion_bonus) is LaneChange.CHANGE:
                self._change_lane(v, target)
        forced_set = set(forced)
        threshold = self.lc_params.changing_threshold
        for vid in sorted(vs):
            if vid in forced_set:
                continue
            v = vs[vid]
            if v.status is Status.BLOCKED:
                continue
            ramp = v.lane.is_ramp
            if not ramp:
                if (vid + self.tick) % self._lc_period or self.time - v.last_lane_change < self._cooldown:
                    continue
            candidates = self.network.adjacent_lanes(v.lane, v.position)
            if not candidates:
                continue
            # the ramp must merge whatever lies ahead; the protocol diverts it later
            if v.protocol.incidents and not ramp:
                avoid = self._blocked_ahead.get(vid)
                if avoid is None:
                    avoid = proto.blocked_lanes_ahead(v)
                candidates = [c for c in candidates if c not in avoid]
            bias = self.cfg.diversion_bonus if ramp else 0.0
            best, best_gain = None, threshold
            cached: list = []

            def staying(v=v, cached=cached):
                if not cached:
                    cached.append(staying_terms(v, self.traffic, self.lc_params))
                return cached[0]
            for lane_id in candidates:
                gain = lane_change_incentive(v, lane_id, self.traffic, self.lc_params, staying)
                if gain is not None and gain + bias > best_gain:
                    best, best_gain = lane_id, gain + bias
            if best is not None and not self._gap_taken(v, best):
                self._change_lane(v, best)

    # -- phase 5 ---------------------------------------------------------

    def _merge_target(self, v: Vehicle) -> Optional[LaneId]:
        target = v.protocol.planned_target_lane
        if target is not None and target != v.lane:
            return target
        if v.lane.is_ramp:
            return LaneId(v.lane.direction, 3)
        return None

    def _sync_accel(self, v: Vehicle, target: LaneId) -> float:
        """Speed adaptation towards the lane being merged into.

        A merging vehicle drives at most ``sync_margin`` faster than the
        nearest target-lane vehicle ahead, so it slides past gaps slowly
        enough to take one. Relaxation towards that speed is the free-road
        law, which never brakes harder than the comfortable rate.
        """
        view = self.traffic.gap_view(v.id, target)
        if view.leader_id is None:
            return INF
        cap = view.leader_speed + self.cfg.sync_margin
        if cap >= v.target_speed:
            return INF
        return following_accel(v.speed, INF, 0.0, v.driving, max(cap, 0.1))

    def _yield_accel(self, v: Vehicle, mergers: list) -> float:
        """Courtesy braking for an announced diverter ahead in the next lane.

        A merger whose front is ahead of ours gets the right of way; if it is
        still alongside, we ease off at the comfortable rate. A merger that
        could not fit in front of us anyway is not waited for, which would
        only deadlock the two.
        """
        b = v.driving.comfortable_decel
        best = INF
        for m in mergers:
            ahead = m.position - v.position
            if ahead <= 0 or ahead > self.cfg.yield_distance:
                continue
            gap = m.position - m.length - v.position
            if gap <= 0 and not self.cfg.yield_alongside:
                continue
            if 0 < gap < v.driving.min_gap:
                continue
            best = min(best, -b if gap <= 0 else max(-b, vehicle_accel(v, gap, m.speed)))
        return best

    def _phase_motion(self) -> None:
        cfg = self.cfg
        accels: list[tuple[Vehicle, float]] = []
        # announced diverters are yielded to by informed drivers, ramp merges by everyone
        diverters: dict[LaneId, list[Vehicle]] = {}
        mergers: dict[LaneId, list[Vehicle]] = {}
        targets = {}
        for v in self.traffic.vehicles.values():
            target = self._merge_target(v)
            if target is not None:
                targets[v.id] = target
        if cfg.yield_distance > 0:
            for vid, target in targets.items():
                v = self.traffic.vehicles[vid]
                if v.lane.is_ramp:
                    if self.network.in_merge_zone(v.position):
                        mergers.setdefault(target, []).append(v)
                elif cfg.cdca_enabled:
                    diverters.setdefault(target, []).append(v)
        for lane_id in sorted({v.lane for v in self.traffic.vehicles.values()}):
            lane_vs = self.traffic.lane_vehicles(lane_id)
            end = self.network.lane_end(lane_id)
            for i, v in enumerate(lane_vs):
                if v.status is Status.BLOCKED:
                    accels.append((v, 0.0))
                    continue
                if i + 1 < len(lane_vs):
                    lead = lane_vs[i + 1]
                    gap, lead_speed = lead.position - lead.length - v.position, lead.speed
                else:
                    gap, lead_speed = INF, 0.0
                if end - v.position < gap:
                    gap, lead_speed = end - v.position, 0.0
                acc = vehicle_accel(v, gap, lead_speed)
                merge_lane = targets.get(v.id)
                if merge_lane is not None:
                    acc = min(acc, self._sync_accel(v, merge_lane))
                else:
                    if lane_id in mergers:
                        acc = min(acc, self._yield_accel(v, mergers[lane_id]))
                    if lane_id in diverters and v.protocol.incidents:
                        acc = min(acc, self._yield_accel(v, diverters[lane_id]))
                accels.append((v, acc))
        for v, acc in accels:
            step_kinematics(v, acc, cfg.dt, cfg.standstill_speed)
        self.traffic.reindex()
        gap, pair = self.traffic.min_net_gap()
        if gap <= 0:
            raise SimulationInvariantError(
                f"collision at t={self.time:.3f} between vehicles {pair} (net gap {gap:.3f})", self.dump())
        for v in self.traffic.vehicles.values():
            if v.speed < 0 or v.speed > v.driving.max_speed + 1e-9:
                raise SimulationInvariantError(f"speed bound broken by vehicle {v.id}", self.dump())
            if v.speed == 0.0 and v.status is not Status.BLOCKED:
                if v.stopped_since is None:
                    v.stopped_since = self.time
                self.max_queued_stop = max(self.max_queued_stop, self.time - v.stopped_since)
            else:
                v.stopped_since = None

    # -- phase 6 ---------------------------------------------------------

    def _safe_speed(self, kind: Kind, lead: Optional[Vehicle], position: float) -> Optional[float]:
        """Fastest entry speed (1 m/s steps) that needs no more than comfortable braking."""
        params = self.cfg.driving_params(kind)
        if lead is None:
            return params.max_speed
        gap = lead.position - lead.length - position
        if gap <= params.min_gap + 1.0:
            return None
        speed = params.max_speed
        while speed > 0 and following_accel(speed, gap, speed - lead.speed, params) < -params.comfortable_decel:
            speed = max(0.0, speed - 1.0)
        return speed

    def _spawn_speed(self, lane_id: LaneId, position: float, kind: Kind) -> Optional[float]:
        keys = self.traffic.lane_keys(lane_id)
        lead = self.traffic.vehicles[keys[0][1]] if keys else None
        return self._safe_speed(kind, lead, position)

    def _prefill(self) -> None:
        """Load the main carriageways at t = 0 with the density the inflow implies.

        Vehicles are laid out from the road end upstream with exponential
        headways, so traffic is already present when the first accident hits.
        """
        rate = self.cfg.main_inflow / 3.0 / 3600.0
        if rate <= 0:
            return
        for direction in self.network.direction_list:
            for lane_id in self.network.main_lanes(direction):
                lead: Optional[Vehicle] = None
                x = self.cfg.main_length
                while len(self.traffic.vehicles) < self.cfg.vehicle_count:
                    kind = Kind.TRUCK if self.rng.random() < self.cfg.truck_share else Kind.CAR
                    v_max = self.cfg.driving_params(kind).max_speed
                    x -= self.rng.expovariate(rate) * v_max
                    if x < 0:
                        break
                    speed = self._safe_speed(kind, lead, x)
                    if speed is None:
                        continue
                    lead = self._new_vehicle(kind, lane_id, x, speed)
                    self._event(FLOW, "spawn", Source("vehicle", lead.id), detail=f"{kind.value} lane={lane_id}")
        self._tick_events.sort(key=lambda item: item[0])
        self.events.extend(e for _, e in self._tick_events)
        self._tick_events = []

    def _try_spawn(self, lane_id: LaneId, position: float) -> None:
        kind = Kind.TRUCK if self.rng.random() < self.cfg.truck_share else Kind.CAR
        if len(self.traffic.vehicles) >= self.cfg.vehicle_count:
            return
        speed = self._spawn_speed(lane_id, position, kind)
        if speed is None:
            return
        v = self._new_vehicle(kind, lane_id, position, speed)
        self._event(FLOW, "spawn", Source("vehicle", v.id), detail=f"{kind.value} lane={lane_id}")

    def _phase_flow(self) -> None:
        cfg = self.cfg
        for vid in sorted(self.traffic.vehicles):
            v = self.traffic.vehicles[vid]
            if v.position > cfg.main_length:
                self.traffic.remove(vid)
                self._event(FLOW, "despawn", Source("vehicle", vid), detail="road end")
        p_main = cfg.main_inflow / 3.0 / 3600.0 * cfg.dt
        p_ramp = cfg.ramp_inflow / 3600.0 * cfg.dt
        for direction in self.network.direction_list:
            for lane_id in self.network.main_lanes(direction):
                if self.rng.random() < p_main:
                    self._try_spawn(lane_id, 0.0)
            if self.rng.random() < p_ramp:
                self._try_spawn(self.network.ramp_lane(direction), self.network.ramp_start)

    # -- phase 7 ---------------------------------------------------------

    def _phase_metrics(self, sent: int) -> None:
        vs = list(self.traffic.vehicles.values())
        thr = self.cfg.congestion_threshold
        per_lane = per_lane_congestion(vs, thr)
        congested = sum(1 for v in vs if v.speed <= thr)
        mean = sum(v.speed for v in vs) / len(vs) if vs else 0.0
        self.messages_total += sent
        self.metrics.append(MetricsRecord(self.time, len(vs), congested, per_lane, mean,
                                          sent, self.messages_total, self.diversions))
        if self._snapshot_ticks and self.tick % self._snapshot_ticks == 0:
            for vid in sorted(self.traffic.vehicles):
                v = self.traffic.vehicles[vid]
                self.snapshots.append([f"{self.time:.3f}", str(vid), v.kind.value, v.lane.direction.value,
                                       str(v.lane.index), f"{v.position:.3f}", f"{v.speed:.3f}",
                                       v.status.value, v.protocol.mode.value])

    # -- loop ------------------------------------------------------------

    def step(self) -> None:
        self.tick += 1
        self._tick_events = []
        self._phase_accidents()
        sent = 0
        if self.cfg.cdca_enabled:
            positions = {vid: self._x(v) for vid, v in self.traffic.vehicles.items()}
            inboxes = deliver(self.pending, positions, self.rsus, self.cfg.v2v_range,
                              self.cfg.drop_probability, self.rng if self.cfg.drop_probability else None)
            self.pending = []
            sent = self._phase_protocol(inboxes)
        self._phase_lane_changes()
        self._phase_motion()
        self._phase_flow()
        self._phase_metrics(sent)
        self._tick_events.sort(key=lambda item: item[0])
        self.events.extend(e for _, e in self._tick_events)

    def run(self) -> RunResult:
        for _ in range(self.cfg.n_ticks):
            self.step()
        return RunResult(self.cfg, self.metrics, self.events, self.snapshots, self.summary())

    def summary(self) -> dict:
        blocked = sum(1 for v in self.traffic.vehicles.values() if v.status is Status.BLOCKED)
        last = self.metrics[-1] if self.metrics else None
        ceased = sum(1 for v in self.traffic.vehicles.values() if v.protocol.mode is Mode.CEASED)
        return {
            "duration": self.time,
            "cdca_enabled": self.cfg.cdca_enabled,
            "cessation": self.cfg.cessation,
            "messages_total": self.messages_total,
            "diversions": self.diversions,
            "blocked_vehicles": blocked,
            "final_congested": last.congested_vehicles if last else 0,
            "final_queued": (last.congested_vehicles - blocked) if last else 0,
            "max_queued_stop_s": round(self.max_queued_stop, 3),
            "malformed_messages": self.malformed,
            "ceased_vehicles_on_road": ceased,
            "vehicles_spawned": self._next_vehicle - 1,
        }


def run(config: ScenarioConfig) -> RunResult:
    """Pure entry point: config in, results out."""
    return Simulation(config).run()
