"""Command-line interface.

Subcommands: ``run`` (full suite), ``validate`` (spec, balance, and store
coverage checks), ``synth`` (planted-bias fixture generation),
``inspect`` (store metadata dump).

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal
consistency failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import DataError, GroundedBiasError, InternalConsistencyError
from .model import Experiment, Granularity, ungrounded_key
from .runner import (
    PlanMode,
    PlanRequest,
    ReportFormat,
    RunConfig,
    render_report,
    run_suite,
)
from .significance import DEFAULT_MC_SAMPLES
from .storeio import (
    parse_spec,
    read_store,
    serialize_spec,
    validate_balance,
    write_store,
)
from .synthetic import PlantedBiasParams, generate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; this tool reserves 2
    for data errors, so remap to 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _experiment_list(raw: str) -> tuple[Experiment, ...]:
    out = []
    for token in raw.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            out.append(Experiment(token.upper()))
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"unknown experiment {token!r}; choose from "
                "E1, E2, E3, UNGROUNDED"
            ) from None
    if not out:
        raise argparse.ArgumentTypeError("experiment list is empty")
    return tuple(out)


def _permutations(raw: str):
    if raw == "exact":
        return raw
    try:
        n = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected 'exact' or a sample count, got {raw!r}"
        ) from None
    if n < 1:
        raise argparse.ArgumentTypeError("sample count must be >= 1")
    return n


def _seed(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {raw!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="groundedbias", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="evaluate bias tests against stores")
    run.add_argument("--spec", action="append", required=True, type=Path,
                     help="bias-test spec JSON (repeatable)")
    run.add_argument("--store-w", type=Path, help="word-granularity store")
    run.add_argument("--store-s", type=Path, help="sentence-granularity store")
    run.add_argument("--store-c", type=Path,
                     help="contextualized-word-granularity store")
    run.add_argument("--experiments", type=_experiment_list,
                     default=(Experiment.E1, Experiment.E2, Experiment.E3),
                     help="comma-separated subset of E1,E2,E3,UNGROUNDED "
                          "(default E1,E2,E3)")
    run.add_argument("--permutations", type=_permutations, default=None,
                     metavar="exact|N",
                     help="force exact enumeration or Monte-Carlo with N "
                          "samples (default: exact when feasible, else "
                          f"{DEFAULT_MC_SAMPLES} samples)")
    run.add_argument("--seed", type=_seed, default=0,
                     help="Monte-Carlo seed (default 0)")
    run.add_argument("--format", choices=[f.value for f in ReportFormat],
                     default=ReportFormat.TABLE.value)
    run.add_argument("--out", type=Path, help="write report here instead of stdout")
    run.add_argument("--allow-unbalanced", action="store_true",
                     help="run even when attribute groups or image counts "
                          "are unbalanced")
    run.add_argument("--stddev", choices=["sample", "population"],
                     default="sample",
                     help="effect-size standard deviation convention")

    val = sub.add_parser("validate", help="check a spec, its balance, and "
                                          "store coverage")
    val.add_argument("--spec", action="append", required=True, type=Path)
    val.add_argument("--store-w", type=Path)
    val.add_argument("--store-s", type=Path)
    val.add_argument("--store-c", type=Path)
    val.add_argument("--allow-unbalanced", action="store_true")

    synth = sub.add_parser("synth", help="generate a planted-bias fixture")
    synth.add_argument("--out-spec", type=Path, required=True)
    synth.add_argument("--out-store", type=Path, required=True)
    synth.add_argument("--dimension", type=int, default=16)
    synth.add_argument("--targets-per-set", type=int, default=6)
    synth.add_argument("--attrs-per-group", type=int, default=4)
    synth.add_argument("--association-strength", type=float, default=1.0)
    synth.add_argument("--vision-effect", type=float, default=0.5)
    synth.add_argument("--seed", type=_seed, default=0)

    inspect = sub.add_parser("inspect", help="dump store metadata")
    inspect.add_argument("--store", type=Path, required=True)
    inspect.add_argument("--keys", action="store_true",
                         help="also list every key")
    return parser


class UsageError(Exception):
    """Command-line usage problem detected after argparse handed over."""


def _store_map(args) -> dict[Granularity, Path]:
    stores = {}
    for granularity, attr in (
        (Granularity.W, "store_w"),
        (Granularity.S, "store_s"),
        (Granularity.C, "store_c"),
    ):
        path = getattr(args, attr)
        if path is not None:
            stores[granularity] = path
    return stores


def _cmd_run(args, out) -> int:
    stores = _store_map(args)
    if not stores:
        raise UsageError("at least one of --store-w/--store-s/--store-c is required")
    if args.permutations == "exact":
        plan = PlanRequest(mode=PlanMode.EXACT, seed=args.seed)
    elif args.permutations is None:
        plan = PlanRequest(mode=PlanMode.AUTO, seed=args.seed)
    else:
        plan = PlanRequest(
            mode=PlanMode.MONTE_CARLO, n_samples=args.permutations, seed=args.seed
        )
    config = RunConfig(
        specs=tuple(args.spec),
        stores=stores,
        experiments=args.experiments,
        plan=plan,
        output_format=ReportFormat(args.format),
        allow_unbalanced=args.allow_unbalanced,
        sample_stddev=args.stddev == "sample",
    )
    suite = run_suite(config)
    report = render_report(suite, config.output_format)
    if args.out is not None:
        args.out.write_text(report, encoding="utf-8")
    else:
        out.write(report)
    return suite.exit_code


def _required_keys(test):
    keys = set()
    if test.has_grounded_attributes:
        for element in test.x_targets + test.y_targets:
            keys.update(element.grounded_keys())
        for group_keys in test.attribute_groups().values():
            keys.update(group_keys)
    if test.has_ungrounded_attributes:
        for element in test.x_targets + test.y_targets:
            keys.add(ungrounded_key(element.text_id))
        for text_id in test.a_text + test.b_text:
            keys.add(ungrounded_key(text_id))
    return keys


def _cmd_validate(args, out) -> int:
    stores = _store_map(args)
    status = EXIT_OK
    for spec_path in args.spec:
        spec = parse_spec(spec_path)
        out.write(f"spec {spec_path}: test {spec.test.name!r} parsed\n")
        report = validate_balance(spec)
        for name, count in sorted(report.group_counts.items()):
            out.write(f"  {name}: {count} stimuli\n")
        if report.balanced:
            out.write("  balance: ok\n")
        else:
            for violation in report.violations:
                out.write(f"  balance: {violation.describe()}\n")
            if not args.allow_unbalanced:
                status = EXIT_DATA
        required = _required_keys(spec.test)
        for granularity, path in sorted(stores.items(), key=lambda kv: kv[0].value):
            store = read_store(path)
            missing = sorted(
                k.serialize() for k in required if k not in store
            )
            if missing:
                status = EXIT_DATA
                out.write(
                    f"  store {granularity.value}: {len(missing)} missing "
                    f"keys ({', '.join(missing[:5])}"
                    f"{', ...' if len(missing) > 5 else ''})\n"
                )
            else:
                out.write(
                    f"  store {granularity.value}: all {len(required)} "
                    "required keys present\n"
                )
    return status


def _cmd_synth(args, out) -> int:
    try:
        params = PlantedBiasParams(
            dimension=args.dimension,
            n_targets_per_set=args.targets_per_set,
            n_attrs_per_group=args.attrs_per_group,
            association_strength=args.association_strength,
            vision_effect=args.vision_effect,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    spec, store = generate(params)
    args.out_spec.write_text(serialize_spec(spec), encoding="utf-8")
    write_store(store, args.out_store)
    out.write(
        f"wrote {args.out_spec} and {args.out_store} "
        f"({len(store)} embeddings, dimension {store.dimension})\n"
    )
    return EXIT_OK


def _cmd_inspect(args, out) -> int:
    store = read_store(args.store)
    out.write("version: 1\n")
    out.write(f"dimension: {store.dimension}\n")
    out.write(f"entries: {len(store)}\n")
    out.write(f"provenance: {store.provenance}\n")
    if args.keys:
        for key in store.keys():
            out.write(key + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    commands = {
        "run": _cmd_run,
        "validate": _cmd_validate,
        "synth": _cmd_synth,
        "inspect": _cmd_inspect,
    }
    try:
        return commands[args.command](args, sys.stdout)
    except UsageError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InternalConsistencyError as exc:
        print(f"{parser.prog}: internal consistency failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (DataError, OSError) as exc:
        print(f"{parser.prog}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GroundedBiasError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
