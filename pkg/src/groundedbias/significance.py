"""Permutation-test significance for the four bias statistics.

The permutation distribution reassigns target elements to the X/Y set
positions with the set sizes preserved. Every element carries one fixed
value into the statistic (its association value for E1/E2/ungrounded, its
image-category contrast for E3), so the statistic over a partition is a
pure function of which elements occupy the X slot. For E3 an element in
the Y slot contributes its contrast negated, and the two absolute block
sums make the statistic invariant under swapping the slots.

Exact mode enumerates every size-preserving partition (combinations of
pool indices in lexicographic order); Monte-Carlo mode shuffles the pooled
index list with a seeded generator and takes the first nx entries as X.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidPlan, Overflow
from .experiments import (
    ResolvedSets,
    element_values,
    experiment_statistic,
    grounded_effect_size,
    resolve,
)
from .model import (
    DEFAULT_SIGNIFICANCE_THRESHOLD,
    Experiment,
    Granularity,
    GroundedBiasTest,
    ImageLabel,
    PValueMethod,
    TestResult,
)

DEFAULT_EXACT_THRESHOLD = 200000
DEFAULT_MC_SAMPLES = 99999
PARTITION_COUNT_LIMIT = 2**63 - 1
_CHUNK_ROWS = 8192


@dataclass(frozen=True)
class PermutationPlan:
    """How to realize the permutation distribution.

    ``n_samples`` and ``seed`` only govern Monte-Carlo execution;
    ``exact_threshold`` caps the partition count EXACT mode will enumerate.
    """

    mode: PValueMethod
    n_samples: int = DEFAULT_MC_SAMPLES
    seed: int = 0
    exact_threshold: int = DEFAULT_EXACT_THRESHOLD

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise InvalidPlan(f"n_samples must be >= 1, got {self.n_samples}")
        if self.exact_threshold < 1:
            raise InvalidPlan(
                f"exact_threshold must be >= 1, got {self.exact_threshold}"
            )
        if not 0 <= self.seed < 2**64:
            raise InvalidPlan(f"seed must fit in 64 unsigned bits, got {self.seed}")


def count_partitions(nx: int, ny: int) -> int:
    """Number of size-preserving partitions of the pooled targets,
    C(nx+ny, nx), in exact integer arithmetic.

    Raises Overflow beyond the signed 64-bit range; callers treat that as
    "exact enumeration is out of the question".
    """
    if nx < 1 or ny < 1:
        raise InvalidPlan(f"need at least one element per set, got nx={nx} ny={ny}")
    total = math.comb(nx + ny, nx)
    if total > PARTITION_COUNT_LIMIT:
        raise Overflow(
            f"C({nx + ny}, {nx}) exceeds the 64-bit partition budget"
        )
    return total


def auto_plan(
    nx: int,
    ny: int,
    seed: int = 0,
    exact_threshold: int = DEFAULT_EXACT_THRESHOLD,
    n_samples: int = DEFAULT_MC_SAMPLES,
) -> PermutationPlan:
    """EXACT when the full enumeration fits under ``exact_threshold``,
    otherwise Monte-Carlo with ``n_samples`` draws."""
    try:
        total = count_partitions(nx, ny)
    except Overflow:
        total = None
    if total is not None and total <= exact_threshold:
        return PermutationPlan(
            mode=PValueMethod.EXACT,
            n_samples=n_samples,
            seed=seed,
            exact_threshold=exact_threshold,
        )
    return PermutationPlan(
        mode=PValueMethod.MONTE_CARLO,
        n_samples=n_samples,
        seed=seed,
        exact_threshold=exact_threshold,
    )


def _partition_statistics(
    experiment: Experiment,
    values: np.ndarray,
    pool_sum: float,
    x_index_rows: np.ndarray,
) -> np.ndarray:
    """Statistic for each row of X-slot indices. The observed statistic
    must go through this same path so that exact counting compares
    bit-identical floats for the observed partition."""
    sums_x = values[x_index_rows].sum(axis=1)
    sums_y = pool_sum - sums_x
    if experiment is Experiment.E3:
        return 0.5 * (np.abs(sums_x) + np.abs(sums_y))
    return sums_x - sums_y


def _observed_row(nx: int) -> np.ndarray:
    return np.arange(nx, dtype=np.intp)[None, :]


def _combination_chunks(n: int, nx: int):
    combos = itertools.combinations(range(n), nx)
    while True:
        block = list(itertools.islice(combos, _CHUNK_ROWS))
        if not block:
            return
        yield np.array(block, dtype=np.intp)


def exact_distribution(experiment, values: np.ndarray, nx: int) -> np.ndarray:
    """All C(n, nx) partition statistics, in lexicographic order of the
    X-slot index combinations. The observed partition is the first entry."""
    experiment = Experiment(experiment)
    n = len(values)
    count_partitions(nx, n - nx)
    pool_sum = float(np.sum(values))
    parts = [
        _partition_statistics(experiment, values, pool_sum, rows)
        for rows in _combination_chunks(n, nx)
    ]
    return np.concatenate(parts)


def _exact_pvalue(
    experiment: Experiment, values: np.ndarray, nx: int, threshold: int
) -> tuple[float, int]:
    n = len(values)
    try:
        total = count_partitions(nx, n - nx)
    except Overflow as exc:
        raise InvalidPlan(f"exact mode requested but {exc}") from exc
    if total > threshold:
        raise InvalidPlan(
            f"exact mode requested but C({n}, {nx}) = {total} exceeds the "
            f"plan's exact_threshold of {threshold}"
        )
    pool_sum = float(np.sum(values))
    s_obs = float(
        _partition_statistics(experiment, values, pool_sum, _observed_row(nx))[0]
    )
    count_ge = 0
    for rows in _combination_chunks(n, nx):
        stats = _partition_statistics(experiment, values, pool_sum, rows)
        count_ge += int(np.count_nonzero(stats >= s_obs))
    return count_ge / total, total


def _monte_carlo_pvalue(
    experiment: Experiment,
    values: np.ndarray,
    nx: int,
    plan: PermutationPlan,
) -> tuple[float, int]:
    n = len(values)
    pool_sum = float(np.sum(values))
    s_obs = float(
        _partition_statistics(experiment, values, pool_sum, _observed_row(nx))[0]
    )
    rng = np.random.default_rng(plan.seed)
    base = np.arange(n, dtype=np.intp)
    count_ge = 0
    remaining = plan.n_samples
    while remaining > 0:
        rows = min(_CHUNK_ROWS, remaining)
        perms = rng.permuted(np.tile(base, (rows, 1)), axis=1)
        stats = _partition_statistics(experiment, values, pool_sum, perms[:, :nx])
        count_ge += int(np.count_nonzero(stats >= s_obs))
        remaining -= rows
    return (1 + count_ge) / (1 + plan.n_samples), plan.n_samples


def pvalue_from_values(
    experiment, values: np.ndarray, nx: int, plan: PermutationPlan
) -> tuple[float, int, PValueMethod]:
    """p-value of the observed partition (first nx entries of ``values`` in
    the X slot) under ``plan``. Returns (p, n_permutations, method)."""
    experiment = Experiment(experiment)
    n = len(values)
    if nx < 1 or n - nx < 1:
        raise InvalidPlan(f"need at least one element per set, got nx={nx} ny={n - nx}")
    if plan.mode is PValueMethod.EXACT:
        p, used = _exact_pvalue(experiment, values, nx, plan.exact_threshold)
        return p, used, PValueMethod.EXACT
    p, used = _monte_carlo_pvalue(experiment, values, nx, plan)
    return p, used, PValueMethod.MONTE_CARLO


def permutation_pvalue(
    statistic_fn, nx: int, ny: int, plan: PermutationPlan
) -> tuple[float, int, PValueMethod]:
    """Generic permutation test over an opaque statistic.

    ``statistic_fn`` receives a tuple of pool indices occupying the X slot
    (the pool is ``0..nx+ny-1``; the observed assignment is ``0..nx-1``)
    and must be deterministic. One-sided: large statistics are extreme.
    """
    if nx < 1 or ny < 1:
        raise InvalidPlan(f"need at least one element per set, got nx={nx} ny={ny}")
    n = nx + ny
    observed = tuple(range(nx))
    s_obs = float(statistic_fn(observed))
    if plan.mode is PValueMethod.EXACT:
        try:
            total = count_partitions(nx, ny)
        except Overflow as exc:
            raise InvalidPlan(f"exact mode requested but {exc}") from exc
        if total > plan.exact_threshold:
            raise InvalidPlan(
                f"exact mode requested but C({n}, {nx}) = {total} exceeds the "
                f"plan's exact_threshold of {plan.exact_threshold}"
            )
        count_ge = sum(
            1
            for combo in itertools.combinations(range(n), nx)
            if float(statistic_fn(combo)) >= s_obs
        )
        return count_ge / total, total, PValueMethod.EXACT
    rng = np.random.default_rng(plan.seed)
    pool = np.arange(n, dtype=np.intp)
    count_ge = 0
    for _ in range(plan.n_samples):
        shuffled = rng.permutation(pool)
        if float(statistic_fn(tuple(int(i) for i in shuffled[:nx]))) >= s_obs:
            count_ge += 1
    return (1 + count_ge) / (1 + plan.n_samples), plan.n_samples, PValueMethod.MONTE_CARLO


def resolved_permutation(
    r: ResolvedSets,
    plan: PermutationPlan | None = None,
    test_name: str = "",
    granularity: Granularity | None = None,
    threshold: float = DEFAULT_SIGNIFICANCE_THRESHOLD,
    sample_stddev: bool = True,
) -> TestResult:
    """Statistic, effect size and p-value for already-resolved sets."""
    if plan is None:
        plan = auto_plan(r.n_x, r.n_y)
    values = element_values(r)
    statistic = experiment_statistic(r)
    effect = grounded_effect_size(r, sample=sample_stddev)
    p, n_used, method = pvalue_from_values(r.experiment, values, r.n_x, plan)
    return TestResult.build(
        test_name=test_name,
        experiment=r.experiment,
        granularity=granularity,
        statistic=statistic,
        effect_size=effect,
        p_value=p,
        p_method=method,
        n_permutations=n_used,
        seed=plan.seed if method is PValueMethod.MONTE_CARLO else None,
        threshold=threshold,
    )


def grounded_permutation(
    test: GroundedBiasTest,
    store,
    experiment,
    plan: PermutationPlan | None = None,
    images: dict[str, ImageLabel] | None = None,
    granularity: Granularity | None = None,
    threshold: float = DEFAULT_SIGNIFICANCE_THRESHOLD,
    sample_stddev: bool = True,
) -> TestResult:
    """Resolve ``test`` against ``store`` and run the full test for one
    experiment: statistic, effect size, permutation p-value, significance
    call at ``threshold`` (strict less-than)."""
    r = resolve(test, store, experiment, images=images)
    return resolved_permutation(
        r,
        plan=plan,
        test_name=test.name,
        granularity=granularity,
        threshold=threshold,
        sample_stddev=sample_stddev,
    )


def with_seed(plan: PermutationPlan, seed: int) -> PermutationPlan:
    return replace(plan, seed=seed)
