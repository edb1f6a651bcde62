"""Batch runner: every (test, experiment, granularity) cell of the run
matrix, plus deterministic report rendering.

A cell failure is recorded, never fatal: the suite keeps going and the
exit code reflects whether any hard error occurred. Degenerate variance
(an effect size over identical per-element values, the distinguished E3
"vision contributes nothing" outcome) is reported as its own status, not
as an error.

Reports are pure functions of the records: no timestamps, no environment
details, byte-identical across runs with the same inputs and seed.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import DataError, DegenerateVariance, GroundedBiasError
from .model import (
    DEFAULT_SIGNIFICANCE_THRESHOLD,
    Experiment,
    Granularity,
    TestResult,
)
from .significance import (
    DEFAULT_EXACT_THRESHOLD,
    DEFAULT_MC_SAMPLES,
    PermutationPlan,
    PValueMethod,
    auto_plan,
    grounded_permutation,
)
from .storeio import parse_spec, read_store, validate_balance

EXPERIMENT_ORDER = (
    Experiment.UNGROUNDED,
    Experiment.E1,
    Experiment.E2,
    Experiment.E3,
)
GRANULARITY_ORDER = (Granularity.W, Granularity.S, Granularity.C)


class PlanMode(str, enum.Enum):
    AUTO = "auto"
    EXACT = "exact"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class PlanRequest:
    """Deferred permutation plan; realized per test once set sizes are
    known (AUTO picks exact enumeration only when it fits)."""

    mode: PlanMode = PlanMode.AUTO
    n_samples: int = DEFAULT_MC_SAMPLES
    seed: int = 0
    exact_threshold: int = DEFAULT_EXACT_THRESHOLD

    def realize(self, nx: int, ny: int) -> PermutationPlan:
        if self.mode is PlanMode.AUTO:
            return auto_plan(
                nx,
                ny,
                seed=self.seed,
                exact_threshold=self.exact_threshold,
                n_samples=self.n_samples,
            )
        mode = (
            PValueMethod.EXACT
            if self.mode is PlanMode.EXACT
            else PValueMethod.MONTE_CARLO
        )
        return PermutationPlan(
            mode=mode,
            n_samples=self.n_samples,
            seed=self.seed,
            exact_threshold=self.exact_threshold,
        )


class ReportFormat(str, enum.Enum):
    TABLE = "table"
    CSV = "csv"
    JSON = "json"


@dataclass(frozen=True)
class RunConfig:
    specs: tuple[Path, ...]
    stores: Mapping[Granularity, Path]
    experiments: tuple[Experiment, ...] = (Experiment.E1, Experiment.E2, Experiment.E3)
    plan: PlanRequest = field(default_factory=PlanRequest)
    output_format: ReportFormat = ReportFormat.TABLE
    threshold: float = DEFAULT_SIGNIFICANCE_THRESHOLD
    allow_unbalanced: bool = False
    sample_stddev: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "specs", tuple(Path(p) for p in self.specs))
        stores = {Granularity(g): Path(p) for g, p in dict(self.stores).items()}
        object.__setattr__(self, "stores", stores)
        requested = {Experiment(e) for e in self.experiments}
        ordered = tuple(e for e in EXPERIMENT_ORDER if e in requested)
        object.__setattr__(self, "experiments", ordered)
        if not self.specs:
            raise DataError("run config needs at least one spec")
        if not self.stores:
            raise DataError("run config needs at least one store")
        if not self.experiments:
            raise DataError("run config needs at least one experiment")


class RecordStatus(str, enum.Enum):
    OK = "ok"
    DEGENERATE = "degenerate"
    ERROR = "error"


@dataclass(frozen=True)
class SuiteRecord:
    """One run-matrix cell, or a spec/store-level failure record (those
    use "-" placeholders for the coordinates they lack)."""

    test_name: str
    experiment: Experiment | None
    granularity: Granularity | None
    status: RecordStatus
    result: TestResult | None = None
    message: str = ""


@dataclass(frozen=True)
class SuiteResult:
    records: tuple[SuiteRecord, ...]

    @property
    def results(self) -> tuple[TestResult, ...]:
        return tuple(r.result for r in self.records if r.result is not None)

    @property
    def errors(self) -> tuple[SuiteRecord, ...]:
        return tuple(r for r in self.records if r.status is RecordStatus.ERROR)

    @property
    def exit_code(self) -> int:
        return 2 if self.errors else 0


def run_suite(config: RunConfig) -> SuiteResult:
    """Evaluate every requested cell; deterministic record order (specs in
    input order, granularities W/S/C, experiments in canonical order)."""
    records: list[SuiteRecord] = []

    stores = {}
    for granularity in GRANULARITY_ORDER:
        path = config.stores.get(granularity)
        if path is None:
            continue
        try:
            stores[granularity] = read_store(path)
        except (DataError, OSError) as exc:
            records.append(
                SuiteRecord(
                    test_name="-",
                    experiment=None,
                    granularity=granularity,
                    status=RecordStatus.ERROR,
                    message=f"store unavailable: {exc}",
                )
            )

    for spec_path in config.specs:
        try:
            spec = parse_spec(spec_path)
        except (DataError, OSError) as exc:
            records.append(
                SuiteRecord(
                    test_name=str(spec_path),
                    experiment=None,
                    granularity=None,
                    status=RecordStatus.ERROR,
                    message=f"spec unreadable: {exc}",
                )
            )
            continue
        balance = validate_balance(spec)
        note = ""
        if not balance.balanced:
            detail = "; ".join(v.describe() for v in balance.violations)
            if not config.allow_unbalanced:
                records.append(
                    SuiteRecord(
                        test_name=spec.test.name,
                        experiment=None,
                        granularity=None,
                        status=RecordStatus.ERROR,
                        message=f"unbalanced dataset: {detail}",
                    )
                )
                continue
            # Override requested: run anyway, but the warning must reach
            # the report.
            note = f"unbalanced dataset override: {detail}"
        for granularity in GRANULARITY_ORDER:
            if granularity not in stores:
                continue
            store = stores[granularity]
            for experiment in config.experiments:
                records.append(
                    _run_cell(config, spec, store, granularity, experiment, note)
                )
    return SuiteResult(records=tuple(records))


def _run_cell(config, spec, store, granularity, experiment, note="") -> SuiteRecord:
    nx = len(spec.test.x_targets)
    ny = len(spec.test.y_targets)
    try:
        plan = config.plan.realize(nx, ny)
        result = grounded_permutation(
            spec.test,
            store,
            experiment,
            plan=plan,
            images=spec.images,
            granularity=granularity,
            threshold=config.threshold,
            sample_stddev=config.sample_stddev,
        )
    except DegenerateVariance as exc:
        message = str(exc) if not note else f"{exc}; {note}"
        return SuiteRecord(
            test_name=spec.test.name,
            experiment=experiment,
            granularity=granularity,
            status=RecordStatus.DEGENERATE,
            message=message,
        )
    except DataError as exc:
        return SuiteRecord(
            test_name=spec.test.name,
            experiment=experiment,
            granularity=granularity,
            status=RecordStatus.ERROR,
            message=str(exc),
        )
    return SuiteRecord(
        test_name=spec.test.name,
        experiment=experiment,
        granularity=granularity,
        status=RecordStatus.OK,
        result=result,
        message=note,
    )


# --------------------------------------------------------------------------
# Rendering

_COLUMNS = (
    "test",
    "experiment",
    "granularity",
    "status",
    "statistic",
    "effect_size",
    "p_value",
    "method",
    "n_permutations",
    "seed",
    "sig",
    "message",
)


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _row(record: SuiteRecord) -> dict[str, str]:
    result = record.result
    return {
        "test": record.test_name,
        "experiment": record.experiment.value if record.experiment else "-",
        "granularity": record.granularity.value if record.granularity else "-",
        "status": record.status.value,
        "statistic": _fmt(result.statistic) if result else "-",
        "effect_size": _fmt(result.effect_size) if result else "-",
        "p_value": _fmt(result.p_value) if result else "-",
        "method": result.p_method.value if result else "-",
        "n_permutations": str(result.n_permutations) if result else "-",
        "seed": str(result.seed) if result and result.seed is not None else "-",
        "sig": ("*" if result.significant else "") if result else "",
        "message": record.message,
    }


def _coerce_records(results) -> tuple[SuiteRecord, ...]:
    if isinstance(results, SuiteResult):
        return results.records
    records = []
    for item in results:
        if isinstance(item, SuiteRecord):
            records.append(item)
        else:
            records.append(
                SuiteRecord(
                    test_name=item.test_name,
                    experiment=item.experiment,
                    granularity=item.granularity,
                    status=RecordStatus.OK,
                    result=item,
                )
            )
    return tuple(records)


def render_report(results, output_format: ReportFormat | str) -> str:
    """Render records (or bare TestResults) in the requested format.

    Every TestResult field appears in every format; numbers are printed
    with six decimal places in table and CSV, and significance is a marker
    column (strictly below the threshold used at run time).
    """
    records = _coerce_records(results)
    output_format = ReportFormat(output_format)
    if output_format is ReportFormat.CSV:
        return _render_csv(records)
    if output_format is ReportFormat.JSON:
        return _render_json(records)
    return _render_table(records)


def _render_table(records: tuple[SuiteRecord, ...]) -> str:
    rows = [_row(r) for r in records]
    widths = {
        c: max(len(c), *(len(row[c]) for row in rows)) if rows else len(c)
        for c in _COLUMNS
    }
    out = io.StringIO()

    def emit(cells: dict[str, str]) -> None:
        out.write(
            "  ".join(cells[c].ljust(widths[c]) for c in _COLUMNS).rstrip() + "\n"
        )

    emit({c: c for c in _COLUMNS})
    emit({c: "-" * widths[c] for c in _COLUMNS})
    for row in rows:
        emit(row)
    return out.getvalue()


def _render_csv(records: tuple[SuiteRecord, ...]) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for record in records:
        writer.writerow(_row(record))
    return out.getvalue()


def _render_json(records: tuple[SuiteRecord, ...]) -> str:
    payload = []
    for record in records:
        entry: dict = {
            "test": record.test_name,
            "experiment": record.experiment.value if record.experiment else None,
            "granularity": record.granularity.value if record.granularity else None,
            "status": record.status.value,
            "message": record.message,
        }
        if record.result is not None:
            result = record.result
            entry["result"] = {
                "statistic": result.statistic,
                "statistic_6dp": _fmt(result.statistic),
                "effect_size": result.effect_size,
                "effect_size_6dp": _fmt(result.effect_size),
                "p_value": result.p_value,
                "p_value_6dp": _fmt(result.p_value),
                "method": result.p_method.value,
                "n_permutations": result.n_permutations,
                "seed": result.seed,
                "significant": result.significant,
            }
        payload.append(entry)
    return json.dumps({"records": payload}, indent=2, sort_keys=True) + "\n"
