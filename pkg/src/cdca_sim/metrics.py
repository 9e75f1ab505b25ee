"""Per-tick metrics, the event log, and their CSV files."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

METRICS_HEADER = ["t", "active", "congested", "cong_l1", "cong_l2", "cong_l3",
                  "mean_speed", "msgs_tick", "msgs_total", "diversions"]
EVENTS_HEADER = ["t", "kind", "subject", "message_id", "detail"]
SNAPSHOT_HEADER = ["t", "vehicle", "class", "direction", "lane", "position", "speed", "status", "mode"]

EVENT_KINDS = ("accident", "broadcast", "receive", "diversion", "cessation", "spawn", "despawn")


@dataclass(frozen=True)
class MetricsRecord:
    time: float
    active_vehicles: int
    congested_vehicles: int
    per_lane_congested: tuple
    mean_speed: float
    messages_sent_this_tick: int
    messages_cumulative: int
    diversions_cumulative: int

    def row(self) -> list[str]:
        return [_f(self.time), str(self.active_vehicles), str(self.congested_vehicles),
                *(str(c) for c in self.per_lane_congested), _f(self.mean_speed),
                str(self.messages_sent_this_tick), str(self.messages_cumulative),
                str(self.diversions_cumulative)]


@dataclass(frozen=True)
class EventLogEntry:
    time: float
    kind: str
    subject: str
    message_id: Optional[int] = None
    detail: str = ""

    def row(self) -> list[str]:
        mid = "" if self.message_id is None else str(self.message_id)
        return [_f(self.time), self.kind, self.subject, mid, self.detail]


def _f(x: float) -> str:
    return f"{x:.3f}"


def congestion_count(vehicles: Iterable, threshold: float = 0.0) -> int:
    """Vehicles at or below ``threshold`` m/s; 0 means exactly standing."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    return sum(1 for v in vehicles if v.speed <= threshold)


def per_lane_congestion(vehicles: Iterable, threshold: float = 0.0) -> tuple[int, int, int]:
    counts = [0, 0, 0]
    for v in vehicles:
        if v.speed <= threshold and 1 <= v.lane.index <= 3:
            counts[v.lane.index - 1] += 1
    return tuple(counts)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_outputs(series: Sequence[MetricsRecord], log: Sequence[EventLogEntry], out_dir,
                  config_echo: Optional[str] = None, snapshots: Sequence[Sequence[str]] = (),
                  summary: Optional[dict] = None) -> dict[str, Path]:
    """Write metrics.csv, events.csv and friends into ``out_dir``.

    Output is byte-stable: LF endings, UTF-8, three-decimal floats.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"metrics": out / "metrics.csv", "events": out / "events.csv"}
    _write_csv(paths["metrics"], METRICS_HEADER, (r.row() for r in series))
    _write_csv(paths["events"], EVENTS_HEADER, (e.row() for e in log))
    if snapshots:
        paths["snapshots"] = out / "snapshots.csv"
        _write_csv(paths["snapshots"], SNAPSHOT_HEADER, snapshots)
    if config_echo is not None:
        paths["config"] = out / "config_echo.toml"
        paths["config"].write_text(config_echo, encoding="utf-8", newline="\n")
    if summary is not None:
        paths["summary"] = out / "summary.json"
        paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                    encoding="utf-8", newline="\n")
    return paths


def read_metrics(path) -> dict[str, list[float]]:
    """Columns of a metrics.csv, checked against the fixed header."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != METRICS_HEADER:
        raise SchemaError(f"{path}: header does not match metrics schema")
    cols: dict[str, list[float]] = {h: [] for h in METRICS_HEADER}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(METRICS_HEADER):
            raise SchemaError(f"{path}:{lineno}: expected {len(METRICS_HEADER)} fields")
        try:
            for h, cell in zip(METRICS_HEADER, row):
                cols[h].append(float(cell))
        except ValueError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    return cols


class SchemaError(ValueError):
    pass
