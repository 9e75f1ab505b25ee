"""Scenario files (TOML) and the validated ``ScenarioConfig``.

Speeds are written in km/h in files (``*_kmh`` keys) and held in m/s.
Unknown keys are errors.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

import tomli

from .dynamics import DrivingParams, Kind, LaneChangeParams, VehicleClass, kmh_to_ms
from .road import Direction, LaneId


class ConfigError(ValueError):
    """Bad scenario. ``problems`` lists every offending key."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class AccidentEvent:
    time: float
    lane: LaneId
    position: float


@dataclass(frozen=True)
class ScenarioConfig:
    # vehicle mix and speeds of the baseline scenario
    vehicle_count: int = 500
    car_speed: float = kmh_to_ms(108.0)
    truck_speed: float = kmh_to_ms(54.0)
    speed_limit: float = kmh_to_ms(80.0)
    truck_share: float = 0.2
    lanes_per_direction: int = 3
    road_type: str = "main+ramp"
    broadcast_pattern: str = "geobroadcast"
    changing_threshold: float = 0.2
    politeness: float = 0.25
    simulation_speed: float = 10.0  # echoed only, no physical meaning here
    platform: str = ""
    operating_system: str = ""
    simulator: str = "traffic"

    # run control
    seed: int = 1
    dt: float = 0.5
    duration: float = 600.0
    warmup: float = 60.0
    snapshot_interval: float = 60.0

    # geometry
    main_length: float = 10_000.0
    ramp_length: float = 300.0
    merge_position: float = 2_000.0
    directions: int = 2
    car_length: float = 5.0
    truck_length: float = 12.0

    # demand, vehicles per hour per carriageway
    main_inflow: float = 1500.0
    ramp_inflow: float = 150.0
    prefill: bool = True

    # driver model
    time_headway: float = 1.5
    car_max_accel: float = 1.5
    truck_max_accel: float = 1.0
    comfortable_decel: float = 2.0
    min_gap: float = 2.0
    accel_exponent: float = 4.0
    emergency_decel: float = 8.0
    safe_decel: float = 4.0
    standstill_speed: float = 0.1
    lane_change_cooldown: float = 2.0
    lane_change_interval: float = 1.0
    diversion_bonus: float = 5.0
    sight_distance: float = 150.0
    yield_distance: float = 40.0
    yield_alongside: bool = False
    urgent_distance: float = 300.0
    sync_margin: float = 3.0

    # radio and infrastructure
    v2v_range: float = 1000.0
    rsu_spacing: float = 2500.0
    rsu_coverage: float = 1500.0
    rsu_positions: Optional[tuple] = None
    drop_probability: float = 0.0

    # protocol
    cdca_enabled: bool = True
    cessation: bool = True
    rebroadcast_interval: float = 1.0
    max_hops: int = 3
    lookahead: float = 2000.0
    advisory_factor: float = 0.6
    message_ttl: float = 0.0
    incident_duration: float = 0.0

    congestion_threshold: float = 0.0
    accidents: tuple = field(default_factory=tuple)

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration / self.dt))

    def ticks(self, seconds: float) -> int:
        return max(1, int(round(seconds / self.dt)))

    def vehicle_class(self, kind: Kind) -> VehicleClass:
        if kind is Kind.TRUCK:
            return VehicleClass(Kind.TRUCK, self.truck_speed, self.truck_length)
        return VehicleClass(Kind.CAR, self.car_speed, self.car_length)

    def driving_params(self, kind: Kind) -> DrivingParams:
        truck = kind is Kind.TRUCK
        return DrivingParams(
            desired_speed=self.truck_speed if truck else self.car_speed,
            time_headway=self.time_headway,
            max_accel=self.truck_max_accel if truck else self.car_max_accel,
            comfortable_decel=self.comfortable_decel,
            min_gap=self.min_gap,
            accel_exponent=self.accel_exponent,
            speed_limit=self.speed_limit,
            emergency_decel=self.emergency_decel,
        )

    def lane_change_params(self) -> LaneChangeParams:
        return LaneChangeParams(self.politeness, self.changing_threshold, self.safe_decel,
                                self.sight_distance, start_accel=self.standstill_speed / self.dt)

    def validate(self) -> "ScenarioConfig":
        p = []
        if not self.dt > 0:
            p.append("dt: must be > 0")
        if not self.duration > 0:
            p.append("duration: must be > 0")
        if not 0.0 <= self.truck_share <= 1.0:
            p.append("truck_share: must be within [0, 1]")
        for name in ("car_speed", "truck_speed", "speed_limit"):
            if not getattr(self, name) > 0:
                p.append(f"{name}_kmh: must be > 0")
        for name in ("main_length", "ramp_length", "car_length", "truck_length", "time_headway",
                     "car_max_accel", "truck_max_accel", "comfortable_decel", "min_gap",
                     "accel_exponent", "emergency_decel", "safe_decel", "v2v_range",
                     "rsu_spacing", "rsu_coverage", "rebroadcast_interval", "lookahead",
                     "lane_change_interval"):
            if not getattr(self, name) > 0:
                p.append(f"{name}: must be > 0")
        if not 0 < self.merge_position < self.main_length:
            p.append("merge_position: must lie strictly inside (0, main_length)")
        elif self.ramp_length > self.merge_position:
            p.append("ramp_length: ramp would start before the road origin")
        if self.lanes_per_direction != 3:
            p.append("lanes_per_direction: only 3 is supported")
        if self.directions not in (1, 2):
            p.append("directions: must be 1 or 2")
        if self.vehicle_count < 0:
            p.append("vehicle_count: must be >= 0")
        if self.road_type != "main+ramp":
            p.append("road_type: only 'main+ramp' is supported")
        if self.broadcast_pattern != "geobroadcast":
            p.append("broadcast_pattern: only 'geobroadcast' is supported")
        if self.politeness < 0:
            p.append("politeness: must be >= 0")
        if self.changing_threshold < 0:
            p.append("changing_threshold: must be >= 0")
        if self.main_inflow < 0 or self.ramp_inflow < 0:
            p.append("main_inflow/ramp_inflow: must be >= 0")
        if self.rsu_coverage <= self.v2v_range:
            p.append("rsu_coverage: must exceed v2v_range")
        if not 0.0 <= self.drop_probability < 1.0:
            p.append("drop_probability: must be within [0, 1)")
        if self.max_hops < 0:
            p.append("max_hops: must be >= 0")
        if not 0 < self.advisory_factor <= 1:
            p.append("advisory_factor: must be within (0, 1]")
        if self.congestion_threshold < 0:
            p.append("congestion_threshold: must be >= 0")
        if not self.sight_distance > 0:
            p.append("sight_distance: must be > 0")
        if self.yield_distance < 0:
            p.append("yield_distance: must be >= 0")
        if self.standstill_speed < 0:
            p.append("standstill_speed: must be >= 0")
        for i, ev in enumerate(self.accidents):
            if not 0 <= ev.time < self.duration:
                p.append(f"accidents[{i}].time: must be within [0, duration)")
            if ev.lane.index not in (1, 2, 3):
                p.append(f"accidents[{i}].lane: must be 1, 2 or 3")
            if not 0 <= ev.position <= self.main_length:
                p.append(f"accidents[{i}].position: must be on the road")
            if ev.lane.direction is Direction.BACKWARD and self.directions < 2:
                p.append(f"accidents[{i}].direction: road has a single direction")
        if p:
            raise ConfigError(p)
        return self

    def echo(self) -> dict[str, Any]:
        """Flat, file-shaped view of the config (speeds back in km/h)."""
        out: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in _KMH_KEYS:
                out[f"{f.name}_kmh"] = round(value * 3.6, 6)
            elif f.name == "accidents":
                out["accidents"] = [
                    {"time": a.time, "lane": a.lane.index, "direction": a.lane.direction.value,
                     "position": a.position}
                    for a in value
                ]
            elif f.name == "rsu_positions":
                if value is not None:
                    out[f.name] = list(value)
            else:
                out[f.name] = value
        return out


_KMH_KEYS = ("car_speed", "truck_speed", "speed_limit")
_FIELD_NAMES = {f.name for f in fields(ScenarioConfig)}
_INT_KEYS = {"vehicle_count", "lanes_per_direction", "seed", "directions", "max_hops"}
_ACCIDENT_KEYS = {"time", "lane", "position", "direction"}


def _parse_accident(i: int, raw: Any, problems: list[str]) -> Optional[AccidentEvent]:
    if not isinstance(raw, dict):
        problems.append(f"accidents[{i}]: must be a table")
        return None
    extra = sorted(set(raw) - _ACCIDENT_KEYS)
    if extra:
        problems.append(f"accidents[{i}]: unknown keys {', '.join(extra)}")
    missing = sorted({"time", "lane", "position"} - set(raw))
    if missing:
        problems.append(f"accidents[{i}]: missing keys {', '.join(missing)}")
        return None
    try:
        direction = Direction(raw.get("direction", "forward"))
    except ValueError:
        problems.append(f"accidents[{i}].direction: must be 'forward' or 'backward'")
        return None
    if not isinstance(raw["lane"], int) or isinstance(raw["lane"], bool):
        problems.append(f"accidents[{i}].lane: must be an integer")
        return None
    return AccidentEvent(float(raw["time"]), LaneId(direction, raw["lane"]), float(raw["position"]))


def config_from_dict(data: dict[str, Any], **overrides: Any) -> ScenarioConfig:
    """Build and validate a config from file-shaped keys."""
    problems: list[str] = []
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key == "accidents":
            if not isinstance(value, list):
                problems.append("accidents: must be an array of tables")
                continue
            events = [_parse_accident(i, raw, problems) for i, raw in enumerate(value)]
            kwargs["accidents"] = tuple(e for e in events if e is not None)
        elif key.endswith("_kmh") and key[:-4] in _KMH_KEYS:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                problems.append(f"{key}: must be a number")
            else:
                kwargs[key[:-4]] = kmh_to_ms(float(value))
        elif key == "rsu_positions":
            if not isinstance(value, list) or not all(isinstance(x, (int, float)) for x in value):
                problems.append("rsu_positions: must be a list of numbers")
            else:
                kwargs[key] = tuple(float(x) for x in value)
        elif key in _FIELD_NAMES and key not in _KMH_KEYS:
            default = ScenarioConfig.__dataclass_fields__[key].default
            if isinstance(default, bool):
                if not isinstance(value, bool):
                    problems.append(f"{key}: must be true or false")
                    continue
            elif isinstance(default, str):
                if not isinstance(value, str):
                    problems.append(f"{key}: must be a string")
                    continue
            elif key in _INT_KEYS:
                if isinstance(value, bool) or not isinstance(value, int):
                    problems.append(f"{key}: must be an integer")
                    continue
            elif isinstance(value, bool) or not isinstance(value, (int, float)):
                problems.append(f"{key}: must be a number")
                continue
            elif isinstance(value, float) and not math.isfinite(value):
                problems.append(f"{key}: must be finite")
                continue
            kwargs[key] = float(value) if isinstance(default, float) else value
        else:
            problems.append(f"{key}: unknown key")
    cfg = replace(ScenarioConfig(**kwargs), **overrides)
    try:
        cfg.validate()
    except ConfigError as exc:
        problems.extend(exc.problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_scenario(path: str | Path, **overrides: Any) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read ({exc.strerror or exc})"]) from exc
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: parse error: {exc}"]) from exc
    return config_from_dict(data, **overrides)


def dump_config(cfg: ScenarioConfig) -> str:
    """Render a config as TOML that ``load_scenario`` reads back."""
    echo = cfg.echo()
    accidents = echo.pop("accidents")
    lines = []
    for key, value in echo.items():
        lines.append(f"{key} = {_toml_value(value)}")
    for acc in accidents:
        lines.append("")
        lines.append("[[accidents]]")
        for key, value in acc.items():
            lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return str(value)


def as_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    return asdict(cfg)
