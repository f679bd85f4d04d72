"""Command-line front end.

Subcommands: run (one simulation), sweep (cartesian config sweep), figure
(canned study recipes), calibrate (verify or re-tune the model constants).
Exit codes: 0 success, 1 user/configuration error, 2 internal fault.
"""

from __future__ import annotations

import argparse
import sys
import time

from . import analysis, figures
from .calibration import CALIBRATED_FILE, calibrated_defaults, format_constants
from .errors import ConfigError, SimFault
from .system import RunConfig, load_config, run_config


def _base_config(args) -> RunConfig:
    cfg = RunConfig.defaults()
    if getattr(args, "calibrated", False):
        cfg = cfg.apply(calibrated_defaults())
    if args.config:
        cfg = load_config(args.config, cfg)
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got '{item}'")
        key, _, value = item.partition("=")
        cfg = cfg.apply({key.strip(): value.strip()})
    return cfg


def _parse_axes(pairs) -> dict[str, list[str]]:
    axes: dict[str, list[str]] = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--axis expects key=v1,v2,..., got '{pair}'")
        key, _, values = pair.partition("=")
        tokens = [v.strip() for v in values.split(",") if v.strip()]
        if not tokens:
            raise ConfigError(f"axis '{key}' has no values")
        axes[key.strip()] = tokens
    return axes


def cmd_run(args) -> int:
    cfg = _base_config(args)
    report = run_config(cfg)
    rows = [dict(run_id=0, **report.config,
                 **{c: getattr(report, c) for c in analysis.REPORT_COLUMNS},
                 **{c: report.translation[c] for c in analysis.TABLE5_COLUMNS},
                 normalized_exec_time=1.0)]
    print(f"workload         : {cfg['workload.kind']} "
          f"(n={cfg['workload.n']}, vit={cfg['workload.vit']})")
    print(f"mode / memory    : {cfg['mode']} / host={cfg['mem.preset']}"
          + (f" device={cfg['mem.device_preset']}" if cfg["mem.device_preset"] else ""))
    print(f"total time       : {report.total_ns} ns "
          f"({report.total_ns / 1e6:.3f} ms)")
    print(f"gemm / non-gemm  : {report.gemm_ns} / {report.nongemm_ns} ns")
    print(f"bytes h2d / d2h  : {report.bytes_h2d} / {report.bytes_d2h}")
    ov = report.translation["Trans Overhead"]
    print(f"translation      : {report.translation['uTLB Misses times']:.0f} misses, "
          f"{ov:.2f}% overhead")
    if args.out:
        with open(args.out, "a", encoding="utf-8") as fh:
            text = analysis.rows_to_csv(rows)
            fh.write(text if fh.tell() == 0 else text.split("\n", 1)[1])
        print(f"appended CSV row : {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _base_config(args)
    axes = _parse_axes(args.axis)
    started = time.time()
    rows = analysis.sweep(cfg, axes)
    text = analysis.rows_to_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"# {len(rows)} points in {time.time() - started:.1f}s", file=sys.stderr)
    return 0


def cmd_figure(args) -> int:
    out = figures.run_figure(args.name, quick=args.quick)
    paths = out.write(args.out)
    for note in out.notes:
        print(f"note: {note}")
    for path in paths:
        print(f"wrote {path}")
    return 0


def cmd_calibrate(args) -> int:
    constants = calibrated_defaults()
    groups = set(args.group) if args.group else None
    result = analysis.calibrate(constants, groups=groups, descend=args.descend,
                                rounds=args.rounds)
    width = max(len(n) for n in result.residuals)
    for name in sorted(result.residuals):
        value = result.values[name]
        res = result.residuals[name]
        state = "ok" if res == 0 else f"RESIDUAL {res:.3f}"
        shown = "n/a" if value is None else f"{value:.4g}"
        print(f"{name:<{width}} : {shown:>10} [{state}]")
    print(f"worst residual: {result.worst_residual:.4f} "
          f"({'all targets satisfied' if result.satisfied() else 'targets missed'})")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(format_constants(result.constants))
        print(f"wrote {args.out}")
    return 0 if result.satisfied() else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="axsim",
        description="System-level performance simulator for a PCIe-attached "
                    "systolic GEMM accelerator.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    common.add_argument("--calibrated", action="store_true",
                        help=f"apply the shipped {CALIBRATED_FILE} constants")

    p = sub.add_parser("run", parents=[common], help="run one simulation")
    p.add_argument("--out", help="append one CSV row to this file")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="run a config sweep")
    p.add_argument("--axis", action="append", metavar="KEY=V1,V2,...",
                   help="sweep axis (repeatable)")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--jobs", type=int, default=1,
                   help="accepted for compatibility; sweeps run sequentially")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("figure", help="run a canned study recipe")
    p.add_argument("name", help="fig2|fig3|fig4|fig5|fig6|fig7|fig8|fig9|table5")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--quick", action="store_true", help="coarser grids, same schema")
    p.set_defaults(fn=cmd_figure)

    p = sub.add_parser("calibrate", help="verify or re-tune model constants")
    p.add_argument("--group", action="append",
                   help="restrict to target groups (repeatable): "
                        + ", ".join(sorted(analysis.GROUP_EVALUATORS)))
    p.add_argument("--descend", action="store_true",
                   help="run coordinate descent instead of a verification pass")
    p.add_argument("--rounds", type=int, default=2)
    p.add_argument("--out", help="write the resulting constants file")
    p.set_defaults(fn=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    except (SimFault, AssertionError) as exc:
        print(f"internal fault: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
