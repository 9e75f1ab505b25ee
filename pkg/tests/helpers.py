"""Small builders shared by the test modules."""

from __future__ import annotations

from pathlib import Path

from cdca_sim.config import AccidentEvent, ScenarioConfig
from cdca_sim.dynamics import Kind, Vehicle
from cdca_sim.road import Direction, LaneId, RoadNetwork, Traffic

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"


def F(index: int) -> LaneId:
    return LaneId(Direction.FORWARD, index)


def make(vid: int, lane, position: float, speed: float = 0.0, kind: Kind = Kind.CAR,
         cfg: ScenarioConfig | None = None) -> Vehicle:
    cfg = cfg or ScenarioConfig()
    ln = lane if isinstance(lane, LaneId) else F(lane)
    return Vehicle(vid, cfg.vehicle_class(kind), ln, position, speed, cfg.driving_params(kind))


def world(*vehicles) -> Traffic:
    return Traffic(RoadNetwork(), vehicles)


def split_lane_accidents(time: float = 120.0, position: float = 5000.0) -> tuple:
    """Lanes 1 and 3 blocked at the same spot, middle lane free."""
    return (AccidentEvent(time, F(1), position), AccidentEvent(time, F(3), position))


def quiet_config(**kw) -> ScenarioConfig:
    """No inflow and no prefill: only what a test places by hand."""
    base = dict(main_inflow=0.0, ramp_inflow=0.0, prefill=False, duration=60.0)
    base.update(kw)
    return ScenarioConfig(**base).validate()
