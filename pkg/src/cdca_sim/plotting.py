"""SVG charts over finished runs: congestion, speeds and message overhead."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import SNAPSHOT_HEADER, SchemaError, read_metrics  # noqa: E402

KINDS = ("congestion_vs_time", "speed_histogram", "overhead_vs_time")

# fixed salt and no timestamp keep the SVG byte-stable between runs
_RC = {
    "svg.hashsalt": "cdca-sim",
    "svg.fonttype": "none",
    "figure.figsize": (7.0, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
    "legend.fontsize": 9,
}


def series_label(csv_path: Path) -> str:
    """Legend text for a run: CDCA on/off from the sibling summary, else the folder name."""
    summary = csv_path.parent / "summary.json"
    if summary.exists():
        try:
            info = json.loads(summary.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            info = {}
        if "cdca_enabled" in info:
            label = "CDCA on" if info["cdca_enabled"] else "CDCA off"
            if info.get("cdca_enabled") and info.get("cessation") is False:
                label += " (no cessation)"
            return label
    return csv_path.parent.name or csv_path.stem


def read_snapshots(path) -> dict[str, list]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != SNAPSHOT_HEADER:
        raise SchemaError(f"{path}: header does not match snapshot schema")
    cols: dict[str, list] = {"t": [], "speed": []}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(SNAPSHOT_HEADER):
            raise SchemaError(f"{path}:{lineno}: expected {len(SNAPSHOT_HEADER)} fields")
        try:
            cols["t"].append(float(row[0]))
            cols["speed"].append(float(row[6]))
        except ValueError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    return cols


def _snapshot_source(path: Path) -> Path:
    """speed_histogram takes a snapshots.csv, or a metrics.csv that has one beside it."""
    with open(path, encoding="utf-8", newline="") as fh:
        header = next(csv.reader(fh), None)
    if header == SNAPSHOT_HEADER:
        return path
    read_metrics(path)  # raises SchemaError on anything that is not a metrics file either
    sibling = path.parent / "snapshots.csv"
    if not sibling.exists():
        raise SchemaError(f"{path}: no snapshots.csv next to it for a speed histogram")
    return sibling


def _congestion(ax, paths: Sequence[Path], labels: Sequence[str]) -> None:
    for path, label in zip(paths, labels):
        cols = read_metrics(path)
        ax.plot(cols["t"], cols["congested"], label=label, drawstyle="steps-post", linewidth=1.4)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("vehicles at zero speed")
    ax.set_title("Congested vehicles over time")


def _overhead(ax, paths: Sequence[Path], labels: Sequence[str]) -> None:
    for path, label in zip(paths, labels):
        cols = read_metrics(path)
        ax.plot(cols["t"], cols["msgs_total"], label=label, linewidth=1.4)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("messages sent (cumulative)")
    ax.set_title("Warning message overhead")


def _speeds(ax, paths: Sequence[Path], labels: Sequence[str]) -> None:
    data, names = [], []
    for path, label in zip(paths, labels):
        cols = read_snapshots(_snapshot_source(path))
        if cols["t"]:
            last = max(cols["t"])
            data.append([s for t, s in zip(cols["t"], cols["speed"]) if t == last])
            names.append(f"{label}, t = {last:g} s")
    if data:
        top = max(max(d) for d in data)
        bins = [i * 1.0 for i in range(int(top) + 2)]
        ax.hist(data, bins=bins, label=names, histtype="bar", rwidth=0.9)
    ax.set_xlabel("speed [m/s]")
    ax.set_ylabel("number of vehicles")
    ax.set_title("Vehicle speeds at the last snapshot")


_DRAW = {
    "congestion_vs_time": _congestion,
    "speed_histogram": _speeds,
    "overhead_vs_time": _overhead,
}


def render_chart(inputs, kind: str, out_path, labels: Optional[Sequence[str]] = None) -> Path:
    """Draw ``kind`` from one or more CSVs into a standalone SVG at ``out_path``.

    A header-only CSV yields empty axes. A file that does not match the
    expected schema raises ``SchemaError``.
    """
    if kind not in _DRAW:
        raise ValueError(f"unknown chart kind {kind!r}; choose from {', '.join(KINDS)}")
    paths = [Path(p) for p in ([inputs] if isinstance(inputs, (str, Path)) else inputs)]
    if not paths:
        raise ValueError("at least one input CSV is required")
    if labels is None:
        labels = [series_label(p) for p in paths]
        if len(set(labels)) < len(labels):
            labels = [f"{lab} ({p})" for lab, p in zip(labels, paths)]
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        try:
            _DRAW[kind](ax, paths, labels)
            if ax.get_legend_handles_labels()[0]:
                ax.legend(frameon=False)
            fig.tight_layout()
            fig.savefig(out, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return out
