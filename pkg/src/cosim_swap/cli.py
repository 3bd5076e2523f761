"""cosim-swap command line.

    cosim-swap run --config mm.json --start 0 --end 40 --step 0.1 --out run.csv
    cosim-swap validate --config mm.json [--swap-spec swap.json]
    cosim-swap scenario watertank-swap --transfer-at 22.0 --out wt.csv

Exit status: 0 ok, 1 configuration / validation / simulation failure,
2 usage error, 3 missing file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, condition_kinds, load_config, validate_config
from .engine import EngineError, Engine, RunOptions
from .graph import LoopError, build_port_graph, initialization_order
from .scenarios import SCENARIOS, run_scenario
from .steplog import CsvSink
from .transfer import ScheduledTransfers, TransferDirError, WatchFolder
from .units.base import UnitError
from .units.broker import SharedFeed
from .units.faults import load_fault_rules
from .units.registry import Registry

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3

log = logging.getLogger("cosim_swap")


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p = argparse.ArgumentParser(prog="cosim-swap", description="Fixed-step co-simulation with run-time model swapping")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run a multi-model configuration")
    run.add_argument("--config", required=True)
    run.add_argument("--start", type=float, default=0.0)
    run.add_argument("--end", type=float, required=True)
    run.add_argument("--step", type=float, required=True)
    run.add_argument("--out", required=True, help="CSV output path")
    run.add_argument("--transfer-dir", help="watch folder for swap specifications")
    run.add_argument("--schedule", help="JSON list of {iteration|time, spec}: scripted transfers (test mode)")
    run.add_argument("--min-steps", type=int, default=1, help="minimum steps before the first transfer point")
    run.add_argument("--check-every", type=int, default=1, help="check for transfers every N steps")
    run.add_argument("--faults", help="fault-rule JSON file")
    run.add_argument("--feed", help="broker feed CSV (timestamp,value)")

    val = sub.add_parser("validate", parents=[common], help="static checks of a configuration")
    val.add_argument("--config", required=True)
    val.add_argument("--swap-spec")

    sc = sub.add_parser("scenario", parents=[common], help="run a bundled scenario")
    sc.add_argument("name", choices=SCENARIOS)
    sc.add_argument("--out", required=True)
    sc.add_argument("--transfer-at", type=float)
    sc.add_argument("--end", type=float)
    return p


def _print_diagnostics(diags):
    for d in diags:
        print(str(d), file=sys.stderr)


def _load_schedule(path, start, step):
    entries = json.loads(Path(path).read_text(encoding="utf-8"))
    out = []
    base = Path(path).parent
    for e in entries:
        if "iteration" in e:
            it = int(e["iteration"])
        else:
            it = int(round((float(e["time"]) - start) / step))
        spec = Path(e["spec"])
        if not spec.is_absolute():
            spec = base / spec
        out.append((it, spec))
    return ScheduledTransfers.from_files(out)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.transfer_dir and args.schedule:
        print("error: --transfer-dir and --schedule are exclusive", file=sys.stderr)
        return EXIT_USAGE
    feed = SharedFeed.from_csv(args.feed) if args.feed else None
    registry = Registry(feed)
    report = validate_config(cfg, registry)
    _print_diagnostics(report.diagnostics)
    if not report.ok:
        return EXIT_FAIL
    source = None
    if args.transfer_dir:
        if not Path(args.transfer_dir).is_dir():
            raise FileNotFoundError(args.transfer_dir)
        source = WatchFolder(args.transfer_dir)
    elif args.schedule:
        source = _load_schedule(args.schedule, args.start, args.step)
    rules = tuple(load_fault_rules(args.faults)) if args.faults else ()
    options = RunOptions(args.start, args.end, args.step, source, args.min_steps, args.check_every, rules)
    try:
        options.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = Engine(cfg, options, registry, CsvSink(args.out)).run()
    _print_diagnostics(result.diagnostics)
    log.info("%d steps written to %s", len(result.logs), ", ".join(map(str, result.sink.segments)))
    return EXIT_OK


def cmd_validate(args) -> int:
    registry = Registry()
    cfg = load_config(args.config)
    report = validate_config(cfg, registry)
    if report.ok:
        try:
            initialization_order(build_port_graph(cfg, registry))
        except LoopError as exc:
            report.add("error", str(exc))
    if args.swap_spec:
        spec = load_config(args.swap_spec)
        spec_report = validate_config(spec, registry, extra_kinds=condition_kinds(cfg, registry))
        live = cfg.instances()
        for old in spec.model_transfers:
            if old not in live:
                spec_report.add("error", f"unknown transfer instance {old}")
        for d in spec_report.diagnostics:
            report.add(d.severity, f"{args.swap_spec}: {d.message}")
    _print_diagnostics(report.diagnostics)
    if report.ok:
        print("ok")
        return EXIT_OK
    return EXIT_FAIL


def cmd_scenario(args) -> int:
    result = run_scenario(args.name, out=args.out, transfer_at=args.transfer_at, end=args.end)
    _print_diagnostics(result.diagnostics)
    for it, t, kind, detail in result.events:
        log.info("iteration %d (t=%.9g): %s %s", it, t, kind, detail)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "validate": cmd_validate, "scenario": cmd_scenario}[args.command]
    try:
        return handler(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except (ConfigError, LoopError, EngineError, UnitError, TransferDirError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
