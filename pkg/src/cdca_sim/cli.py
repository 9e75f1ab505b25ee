"""Command-line entry point: ``cdca-sim run | plot | validate | report``.

Exit codes: 0 success, 1 usage or unreadable input, 2 configuration error,
3 runtime invariant breach. Log verbosity comes from ``CDCA_SIM_LOG``
(error, info or trace).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigError, ScenarioConfig, dump_config, load_scenario
from .engine import RunResult, SimulationInvariantError, run as run_scenario
from .metrics import SchemaError, write_outputs
from .plotting import KINDS, render_chart

log = logging.getLogger("cdca_sim")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "trace": logging.DEBUG}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; 2 is reserved for config errors here."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def setup_logging(env: Optional[str] = None) -> None:
    value = (os.environ.get("CDCA_SIM_LOG", "error") if env is None else env).strip().lower()
    level = _LEVELS.get(value)
    logging.basicConfig(level=level or logging.ERROR, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)
    if level is None:
        log.warning("CDCA_SIM_LOG=%r not understood; using 'error'", value)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cdca-sim", description="Highway accident scenarios with and without CDCA warnings.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one scenario and write CSVs and figures")
    r.add_argument("--config", required=True, type=Path, help="scenario TOML file")
    r.add_argument("--seed", type=int)
    r.add_argument("--cdca", choices=("on", "off"))
    r.add_argument("--duration", type=float, help="simulated seconds")
    r.add_argument("--no-cessation", action="store_true",
                   help="diverting vehicles keep forwarding after their lane change")
    r.add_argument("--threshold", type=float, help="congestion speed threshold in m/s (default 0)")
    r.add_argument("--no-figures", action="store_true", help="skip the SVG charts")
    r.add_argument("--out", required=True, type=Path, help="output directory")

    pl = sub.add_parser("plot", help="render a chart from run CSVs")
    pl.add_argument("--kind", required=True, choices=KINDS)
    pl.add_argument("--in", dest="inputs", required=True, action="append", type=Path,
                    help="metrics.csv (repeat for a second series)")
    pl.add_argument("--label", action="append", help="legend label per --in")
    pl.add_argument("--out", required=True, type=Path, help="SVG file")

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("--config", required=True, type=Path)

    rep = sub.add_parser("report", help="CDCA off, on and on-without-cessation side by side")
    rep.add_argument("--config", required=True, type=Path)
    rep.add_argument("--seed", type=int)
    rep.add_argument("--duration", type=float)
    rep.add_argument("--out", required=True, type=Path)
    return p


def _overrides(args, **fixed) -> dict:
    out = dict(fixed)
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "duration", None) is not None:
        out["duration"] = args.duration
    if getattr(args, "cdca", None) is not None:
        out["cdca_enabled"] = args.cdca == "on"
    if getattr(args, "no_cessation", False):
        out["cessation"] = False
    if getattr(args, "threshold", None) is not None:
        out["congestion_threshold"] = args.threshold
    return out


def execute(cfg: ScenarioConfig, out_dir: Path, figures: bool = True) -> RunResult:
    """Run ``cfg`` and write every artifact into ``out_dir``."""
    result = run_scenario(cfg)
    paths = write_outputs(result.metrics, result.events, out_dir, config_echo=dump_config(cfg),
                          snapshots=result.snapshots, summary=result.summary)
    if figures:
        render_chart(paths["metrics"], "congestion_vs_time", out_dir / "congestion.svg")
        render_chart(paths["metrics"], "overhead_vs_time", out_dir / "overhead.svg")
        if "snapshots" in paths:
            render_chart(paths["snapshots"], "speed_histogram", out_dir / "speeds.svg")
    return result


def _print_summary(summary: dict, out_dir: Path) -> None:
    blocked = summary["blocked_vehicles"]
    print(f"wrote {out_dir}")
    print(f"congested at end: {summary['final_congested']} "
          f"({blocked} blocked by the accident, {summary['final_queued']} queued)")
    print(f"diversions: {summary['diversions']}  messages: {summary['messages_total']}")


def cmd_run(args) -> int:
    cfg = load_scenario(args.config, **_overrides(args))
    result = execute(cfg, args.out, figures=not args.no_figures)
    _print_summary(result.summary, args.out)
    return EXIT_OK


def cmd_plot(args) -> int:
    if args.label and len(args.label) != len(args.inputs):
        raise _UsageError("give one --label per --in")
    for path in args.inputs:
        if not path.is_file():
            raise _UsageError(f"{path}: no such file")
    render_chart(args.inputs, args.kind, args.out, labels=args.label)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_scenario(args.config)
    print(f"{args.config}: ok ({len(cfg.accidents)} accident(s), {cfg.n_ticks} ticks)")
    return EXIT_OK


def cmd_report(args) -> int:
    base = load_scenario(args.config, **_overrides(args))
    variants = {
        "cdca_off": replace(base, cdca_enabled=False),
        "cdca_on": replace(base, cdca_enabled=True, cessation=True),
        "no_cessation": replace(base, cdca_enabled=True, cessation=False),
    }
    rows = []
    for name, cfg in variants.items():
        result = execute(cfg.validate(), args.out / name)
        s = result.summary
        rows.append([name, s["final_congested"], s["blocked_vehicles"], s["final_queued"],
                     s["diversions"], s["messages_total"], f"{s['max_queued_stop_s']:.3f}"])
    off, on, naive = (args.out / n / "metrics.csv" for n in variants)
    render_chart([off, on], "congestion_vs_time", args.out / "congestion_off_vs_on.svg")
    render_chart([on, naive], "overhead_vs_time", args.out / "overhead_cessation.svg")
    render_chart([off, on], "speed_histogram", args.out / "speeds_off_vs_on.svg")
    with open(args.out / "report.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "final_congested", "blocked", "queued", "diversions",
                    "messages", "max_queued_stop_s"])
        w.writerows(rows)
    for row in rows:
        print(f"{row[0]:>13}: congested {row[1]} (blocked {row[2]}), diversions {row[4]}, messages {row[5]}")
    on_msgs, naive_msgs = rows[1][5], rows[2][5]
    if naive_msgs:
        print(f"message ratio with/without cessation: {on_msgs / naive_msgs:.3f}")
    print(f"wrote {args.out}")
    return EXIT_OK


_COMMANDS = {"run": cmd_run, "plot": cmd_plot, "validate": cmd_validate, "report": cmd_report}


def main(argv: Optional[Sequence[str]] = None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationInvariantError as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        if exc.dump:
            print(exc.dump, file=sys.stderr)
        return EXIT_RUNTIME
    except (SchemaError, _UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
