"""Command-line entry point: ``confball coverage|radius-scan|lower-bound|lemmas``.

Exit status is 0 when every gate passes, 1 when a gate fails and 2 for a bad
config or usage.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import ConfigError, ExperimentConfig, run

COMMANDS = {
    "coverage": "coverage",
    "radius-scan": "radius_scan",
    "lower-bound": "lower_bound_check",
    "lemmas": "lemma_suite",
}
EXIT_PASS, EXIT_GATE, EXIT_USAGE = 0, 1, 2


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {value}")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="confball", description="Seeded Monte-Carlo checks of adaptive confidence balls.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "lemmas", help="JSON experiment config")
        p.add_argument("--seed", type=_u64, help="overrides the config seed")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--workers", type=_positive, default=1, help="worker threads (does not change the report)")
    return parser


def load_config(path: str | None, kind: str, seed: int | None) -> ExperimentConfig:
    if path is None:
        raw = {"kind": kind}
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON in {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config: must be a JSON object")
    if seed is not None:
        raw = {**raw, "seed": seed}
    return ExperimentConfig.from_dict(raw, kind=kind)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE
    try:
        cfg = load_config(args.config, COMMANDS[args.command], args.seed)
        report = run(cfg, workers=args.workers)
    except ConfigError as exc:
        print(f"confball: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = report.to_json() if args.format == "json" else report.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for gate, ok in report.gates.items():
        if not ok:
            print(f"confball: gate failed: {gate}", file=sys.stderr)
    return EXIT_PASS if report.passed else EXIT_GATE


if __name__ == "__main__":
    sys.exit(main())
