"""Command-line harness: generate | ingest | train | sweep | report.

Exit codes: 0 success, 1 validation error, 2 data error, 3 internal error.
"""
from __future__ import annotations

import argparse
import sys
import traceback

import yaml

from . import __version__
from .config import config_from_dict
from .core import DataError, InternalError, ValidationError
from .pipeline import cmd_generate, cmd_ingest, cmd_report, cmd_sweep, cmd_train


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route usage errors to exit code 1
        raise ValidationError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="earlystream", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        dest="overrides",
        help="override any config field by dotted path, e.g. "
        "--set data.synthetic.num_series=50",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", help="write a seeded synthetic dataset, pre-split")
    ingest = sub.add_parser("ingest", help="convert the public three-file layout")
    ingest.add_argument("--telemetry")
    ingest.add_argument("--errors")
    ingest.add_argument("--failures")
    sub.add_parser("train", help="train and tune the per-horizon classifier collection")
    sub.add_parser("sweep", help="tune triggers and evaluate every (method, alpha, cm) cell")
    sub.add_parser("report", help="emit charts and tables from sweep results")
    return parser


def _apply_dotted(doc: dict, dotted: str) -> None:
    if "=" not in dotted:
        raise ValidationError(f"--set expects KEY=VALUE, got {dotted!r}")
    key, raw = dotted.split("=", 1)
    value = yaml.safe_load(raw)
    node = doc
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ValidationError(f"--set path {key!r} crosses a non-mapping value")
    node[parts[-1]] = value


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        overrides: dict = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["out"] = args.out
        if args.command == "ingest" and args.telemetry:
            if not (args.errors and args.failures):
                raise ValidationError("--telemetry/--errors/--failures go together")
            overrides["data"] = {
                "pdm": {
                    "telemetry": args.telemetry,
                    "errors": args.errors,
                    "failures": args.failures,
                }
            }
        doc = {}
        if args.config is not None:
            try:
                with open(args.config) as fh:
                    loaded = yaml.safe_load(fh) or {}
            except FileNotFoundError as exc:
                raise ValidationError(str(exc)) from exc
            except yaml.YAMLError as exc:
                raise ValidationError(f"{args.config}: {exc}") from exc
            if not isinstance(loaded, dict):
                raise ValidationError(f"{args.config}: config must be a mapping")
            doc = loaded
        doc.update(overrides)
        for dotted in args.overrides:
            _apply_dotted(doc, dotted)
        cfg = config_from_dict(doc)
        if args.command == "generate":
            manifest = cmd_generate(cfg)
        elif args.command == "ingest":
            manifest = cmd_ingest(cfg)
        elif args.command == "train":
            manifest = cmd_train(cfg)
        elif args.command == "sweep":
            manifest = cmd_sweep(cfg, jobs=args.jobs)
        else:
            manifest = cmd_report(cfg)
        print(f"{args.command}: done ({manifest})")
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (InternalError, Exception) as exc:  # noqa: BLE001 - deliberate catch-all
        print(f"internal error: {exc}", file=sys.stderr)
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
