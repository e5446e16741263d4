"""Command line front end: arena run | batch | replay | validate-spec."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, config_from_file
from .harness import (
    LogParseError,
    VersionMismatch,
    replay,
    run_batch,
    run_match,
    validate_spec,
)
from .orgmodel import SpecError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage faults exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def parse_seeds(spec: str) -> list[int]:
    spec = spec.strip()
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in spec.split(",") if part]


def _build_parser() -> _Parser:
    parser = _Parser(prog="arena", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single match")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--log", default=None, help="write the JSONL event log here")

    p_batch = sub.add_parser("batch", help="run a seeded batch and summarize")
    p_batch.add_argument("--config", required=True)
    p_batch.add_argument("--seeds", required=True, help="e.g. 1..20 or 1,5,9")
    p_batch.add_argument("--csv", default=None)

    p_replay = sub.add_parser("replay", help="verify a log re-simulates byte-identically")
    p_replay.add_argument("logfile")

    p_validate = sub.add_parser("validate-spec", help="check an org spec file")
    p_validate.add_argument("specfile")
    return parser


def _cmd_run(args) -> int:
    config = config_from_file(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    record, lines = run_match(config)
    if args.log:
        Path(args.log).write_text("\n".join(lines) + "\n")
    print(f"seed {record.seed}: winner={record.winner} ticks={record.ticks}")
    for tid in sorted(record.teams):
        m = record.teams[tid]
        lat = m.mean_latency()
        print(
            f"  team {tid}: goals={m.goals_satisfied}"
            f" mean_latency={'n/a' if lat is None else f'{lat:.3f}'}"
            f" cnp={m.cnp_completed}/{m.cnp_issued} lost={m.agents_lost}"
        )
    return EXIT_OK


def _cmd_batch(args) -> int:
    config = config_from_file(args.config)
    try:
        seeds = parse_seeds(args.seeds)
    except ValueError:
        print(f"error: bad seed spec {args.seeds!r}", file=sys.stderr)
        return EXIT_USAGE
    summary = run_batch(config, seeds)
    if args.csv:
        summary.to_csv(args.csv)
    print(summary.table())
    return EXIT_OK


def _cmd_replay(args) -> int:
    verdict = replay(args.logfile)
    print(verdict.describe())
    return EXIT_OK if verdict.ok else EXIT_DIVERGENCE


def _cmd_validate(args) -> int:
    report = validate_spec(args.specfile)
    print(report)
    return EXIT_OK if report.startswith("OK") else EXIT_CONFIG


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "batch":
            return _cmd_batch(args)
        if args.command == "replay":
            return _cmd_replay(args)
        return _cmd_validate(args)
    except (ConfigError, SpecError, LogParseError, VersionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
