"""Command line entry point: ``evolvefem convergence|simulate|verify``."""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from .config import ConfigError, parse_config, validate
from .linalg import IndefinitenessDetected, NonConvergence
from .postproc import format_error_table, write_error_table
from .timestepper import BoundsViolation, NonFiniteStateError, StabilityWarning, StepError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

log = logging.getLogger("evolvefem")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evolvefem", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("convergence", "manufactured-solution error/EOC table over refinement levels"),
        ("simulate", "integrate one configuration, writing diagnostics and snapshots"),
        ("verify", "fast invariant checks with a pass/fail report"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="INI configuration file")
        s.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one configuration value (repeatable)")
        if name == "convergence":
            s.add_argument("--workers", type=int, default=None,
                           help="parallel levels (default: $EVOLVEFEM_THREADS or 1)")
    return p


def cmd_convergence(cfg, workers=None) -> int:
    from .experiments import run_convergence

    report = run_convergence(cfg, workers)
    path = Path(cfg.output.directory) / cfg.output.table
    write_error_table(report, path)
    print(format_error_table(report))
    print(f"table written to {path}")
    failed = [r for r in report.rows if r.get("status") != "ok"]
    for r in failed:
        print(f"level {r['level']}: {r['status']}", file=sys.stderr)
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_simulate(cfg) -> int:
    from .experiments import run_simulation

    res = run_simulation(cfg)
    traj = res.trajectory
    last = traj.diagnostics[-1]
    print(f"{res.space.dof_count} dofs, {last.step} steps to t = {last.time:g}")
    for i, (lo, hi) in enumerate(zip(last.mins, last.maxs), start=1):
        print(f"  u{i}: final min {lo:.6g}, max {hi:.6g}")
    if traj.bounds_violations:
        print(f"  bounds [{cfg.monitor.lower}, {cfg.monitor.upper}] violated at "
              f"{len(traj.bounds_violations)} steps (first {traj.bounds_violations[0]})")
    print(f"diagnostics written to {res.diagnostics_path}")
    for p in res.snapshots:
        print(f"snapshot {p}")
    return EXIT_OK


def cmd_verify(cfg) -> int:
    from .verify import format_report, run_checks

    results = run_checks(cfg)
    print(format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config, args.override)
        if cfg.run.mode != args.command:
            log.info("config mode %s overridden by subcommand %s", cfg.run.mode, args.command)
            cfg.run.mode = args.command
            validate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.verbose:
        # one warning per distinct message is enough on the console
        warnings.simplefilter("once", StabilityWarning)
    try:
        if args.command == "convergence":
            return cmd_convergence(cfg, args.workers)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        return cmd_verify(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepError, NonFiniteStateError, BoundsViolation, NonConvergence,
            IndefinitenessDetected) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        # e.g. snapshot times outside the run, tau not dividing the final time
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
