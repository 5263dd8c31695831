"""Command-line interface.

    drivenbh <task> --config cfg.json [--out DIR] [--workers N] [--verbose]

Tasks: ness, phase-diagram, spectrum, response, equilibrium.  Exit code 0
on full success, 1 when any grid point failed (details in manifest.json),
2 on configuration errors.  DRIVENBH_WORKERS sets the default worker
count; the --workers flag overrides it.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, parse_config_file
from .runner import run

_TASK_BY_COMMAND = {
    "ness": "ness",
    "phase-diagram": "phase_diagram",
    "spectrum": "spectrum",
    "response": "response",
    "equilibrium": "equilibrium",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drivenbh",
        description="Steady states, collective modes and optical response "
                    "of an incoherently pumped cavity array.")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in _TASK_BY_COMMAND:
        sp = sub.add_parser(cmd, help=f"run the {cmd} task")
        sp.add_argument("--config", required=True, help="path to a JSON run config")
        sp.add_argument("--out", default=None, help="output directory (overrides config)")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker processes (overrides config and environment)")
        sp.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s", stream=sys.stderr)
    log = logging.getLogger("drivenbh")
    try:
        cfg = parse_config_file(args.config)
        task = _TASK_BY_COMMAND[args.command]
        if cfg.task != task:
            raise ConfigError(
                f"config declares task {cfg.task!r} but command is {args.command!r}")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    log.info("task %s (config hash will be recorded in the manifest)", cfg.task)
    try:
        outcome = run(cfg, out_dir=args.out, workers=args.workers)
    except OSError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    for f in outcome.files:
        log.info("wrote %s", f)
    if outcome.exit_code:
        n = len(outcome.manifest["failures"])
        print(f"{n} point(s) failed; see manifest.json", file=sys.stderr)
    return outcome.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
