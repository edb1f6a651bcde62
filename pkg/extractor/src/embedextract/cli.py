"""Command-line interface.

Subcommands: ``run`` (extract stores for a spec), ``pairs`` (list the
(text, image) pairs a spec requires, for assembling an image directory).

Exit codes: 0 success, 1 usage error, 2 data error. Per-pair extraction
failures are warnings on stderr and leave the exit code at 0 unless
``--strict`` is given.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .encoders import list_encoders
from .errors import ExtractError
from .extract import ExtractionJob, extract
from .specio import read_spec, required_pairs

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; this tool reserves 2
    for data errors, so remap to 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="embedextract", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[], help="extract embedding stores")
    run.add_argument("--spec", required=True, type=Path)
    run.add_argument("--images", required=True, type=Path, help="image directory")
    run.add_argument("--out-w", type=Path, help="word-level store path")
    run.add_argument("--out-s", type=Path, help="sentence-level store path")
    run.add_argument("--out-c", type=Path, help="contextualized store path")
    run.add_argument(
        "--model", default="hashed-projection", help=f"one of: {', '.join(list_encoders())}"
    )
    run.add_argument("--dimension", type=int, default=32)
    run.add_argument("--layer", type=int, default=-1)
    run.add_argument("--batch-size", type=int, default=16)
    run.add_argument("--device", default="cpu")
    run.add_argument(
        "--include-ungrounded",
        action="store_true",
        help="also emit text-only twins (key suffix ::-)",
    )
    run.add_argument(
        "--strict", action="store_true", help="exit nonzero if any pair fails"
    )

    pairs = sub.add_parser("pairs", help="list required (text, image) pairs")
    pairs.add_argument("--spec", required=True, type=Path)
    pairs.add_argument("--include-ungrounded", action="store_true")

    return parser


def _cmd_run(args) -> int:
    outputs = {}
    for granularity, path in (("W", args.out_w), ("S", args.out_s), ("C", args.out_c)):
        if path is not None:
            outputs[granularity] = path
    if not outputs:
        print("embedextract: error: need at least one of --out-w/--out-s/--out-c",
              file=sys.stderr)
        return EXIT_USAGE
    job = ExtractionJob(
        spec_path=args.spec,
        image_dir=args.images,
        outputs=outputs,
        model=args.model,
        dimension=args.dimension,
        layer=args.layer,
        include_ungrounded=args.include_ungrounded,
        device=args.device,
        batch_size=args.batch_size,
    )
    report = extract(job)
    for record in report.failures:
        print(
            f"embedextract: failed pair {record.text_id!r} / {record.image_id!r}: "
            f"{record.reason}",
            file=sys.stderr,
        )
    for granularity, path in sorted(report.outputs.items()):
        print(f"wrote {path} ({granularity}, {report.pairs_written} entries)")
    if report.failures:
        print(
            f"embedextract: {len(report.failures)} of {report.pairs_requested} "
            "pairs failed",
            file=sys.stderr,
        )
        if args.strict:
            return EXIT_DATA
    return EXIT_OK


def _cmd_pairs(args) -> int:
    spec = read_spec(args.spec)
    for text, image_id in required_pairs(
        spec, include_ungrounded=args.include_ungrounded
    ):
        print(f"{text}\t{image_id}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_pairs(args)
    except ExtractError as exc:
        print(f"embedextract: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"embedextract: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
