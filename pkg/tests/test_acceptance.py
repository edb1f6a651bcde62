"""Acceptance gate: one test per shipping criterion, each at its stated
tolerance and wall-clock budget. These are the checks that decide whether
a build of this package is releasable; keep them independent of each other
and free of tuned magic numbers beyond the frozen seeds noted inline.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from groundedbias import (
    EmbeddingStore,
    Experiment,
    FormulaTerm,
    Granularity,
    GroundedBiasTest,
    ImageLabel,
    PermutationPlan,
    PlanRequest,
    PlantedBiasParams,
    PValueMethod,
    RecordStatus,
    ReportFormat,
    RunConfig,
    SpecFile,
    TargetElement,
    differential_association,
    effect_size,
    element_values,
    exact_distribution,
    experiment_statistic,
    formula_terms,
    generate,
    grounded_effect_size,
    grounded_permutation,
    make_key,
    render_report,
    resolve,
    run_suite,
    validate_balance,
    word_association,
    write_spec,
    write_store,
)
from groundedbias import TestResult as Result
from groundedbias.errors import DegenerateVariance
from groundedbias.runner import PlanMode
from groundedbias.synthetic import (
    oracle_differential_association,
    oracle_effect_size,
    oracle_statistic,
    oracle_word_association,
)

EXACT = PermutationPlan(mode=PValueMethod.EXACT)


def grounded_instance(rng, dim=8, n_targets=4, n_attrs=6):
    """One randomized grounded test with a matching store and manifest:
    every target carries one own-category image, every attribute group is
    split by depicted category."""
    entries, images = {}, {}

    def targets(prefix, category):
        out = []
        for i in range(n_targets):
            text, image = f"{prefix}{i}", f"img-{prefix}{i}"
            out.append(TargetElement(text, (image,)))
            images[image] = ImageLabel(category, None)
            entries[f"{text}::{image}"] = rng.standard_normal(dim)
        return tuple(out)

    def group(prefix, category, side):
        out = []
        for j in range(n_attrs):
            text, image = f"{prefix}{j}", f"img-{prefix}{j}-{category}"
            out.append(make_key(text, image))
            images[image] = ImageLabel(category, side)
            entries[f"{text}::{image}"] = rng.standard_normal(dim)
        return tuple(out)

    test = GroundedBiasTest(
        name="instance",
        x_targets=targets("x", "x"),
        y_targets=targets("y", "y"),
        a_x=group("ax", "x", "A"),
        a_y=group("ay", "y", "A"),
        b_x=group("bx", "x", "B"),
        b_y=group("by", "y", "B"),
    )
    return test, EmbeddingStore(dim, entries), images


def rows(matrix):
    return [row.tolist() for row in matrix]


def test_oracle_equivalence_on_thousand_seeded_instances():
    # association value, differential association, effect size, and the
    # three grounded statistics all agree with the brute-force oracle to
    # 1e-12 on 1,000 instances (dim 8, 4/4 targets, attribute groups of 6)
    started = time.monotonic()
    worst = 0.0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        test, store, images = grounded_instance(rng)
        xs = rng.standard_normal((4, 8))
        ys = rng.standard_normal((4, 8))
        attrs_a = rng.standard_normal((6, 8))
        attrs_b = rng.standard_normal((6, 8))
        for w in xs:
            worst = max(
                worst,
                abs(
                    word_association(w, attrs_a, attrs_b)
                    - oracle_word_association(
                        w.tolist(), rows(attrs_a), rows(attrs_b)
                    )
                ),
            )
        worst = max(
            worst,
            abs(
                differential_association(xs, ys, attrs_a, attrs_b)
                - oracle_differential_association(
                    rows(xs), rows(ys), rows(attrs_a), rows(attrs_b)
                )
            ),
        )
        worst = max(
            worst,
            abs(
                effect_size(xs, ys, attrs_a, attrs_b)
                - oracle_effect_size(rows(xs), rows(ys), rows(attrs_a), rows(attrs_b))
            ),
        )
        for experiment in (Experiment.E1, Experiment.E2, Experiment.E3):
            r = resolve(test, store, experiment, images=images)
            oracle = oracle_statistic(
                rows(r.x_vecs), rows(r.y_vecs),
                rows(r.a_x_vecs), rows(r.a_y_vecs),
                rows(r.b_x_vecs), rows(r.b_y_vecs),
                experiment,
            )
            worst = max(worst, abs(experiment_statistic(r) - oracle))
    elapsed = time.monotonic() - started
    assert worst <= 1e-12, f"worst engine-oracle deviation {worst:.3e}"
    assert elapsed <= 10.0, f"oracle equivalence took {elapsed:.1f}s"


def test_micro_dataset_selection_key_for_key(micro):
    # the twelve grounded embeddings of the micro dataset, numbered in
    # enumeration order: targets 1-4, lawyer 5-8, teacher 9-12
    emb = {
        1: ("man", "img-man"),
        2: ("man", "img-woman"),
        3: ("woman", "img-man"),
        4: ("woman", "img-woman"),
        5: ("lawyer", "img-man-lawyer"),
        6: ("lawyer", "img-man-teacher"),
        7: ("lawyer", "img-woman-lawyer"),
        8: ("lawyer", "img-woman-teacher"),
        9: ("teacher", "img-man-lawyer"),
        10: ("teacher", "img-man-teacher"),
        11: ("teacher", "img-woman-lawyer"),
        12: ("teacher", "img-woman-teacher"),
    }

    def term(sign, target, a_ids, b_ids):
        return FormulaTerm(
            sign,
            (make_key(*emb[target]),),
            tuple(make_key(*emb[i]) for i in a_ids),
            tuple(make_key(*emb[i]) for i in b_ids),
        )

    spec, store = micro
    r1 = formula_terms(resolve(spec.test, store, "E1", images=spec.images))
    assert r1.coefficient == 1.0 and not r1.absolute
    assert r1.blocks == (
        (term(+1, 1, (5, 7), (10, 12)), term(-1, 4, (5, 7), (10, 12))),
    )

    r2 = formula_terms(resolve(spec.test, store, "E2", images=spec.images))
    assert r2.blocks == (
        (term(+1, 1, (5,), (10,)), term(-1, 4, (7,), (12,))),
    )

    r3 = formula_terms(resolve(spec.test, store, "E3", images=spec.images))
    assert r3.coefficient == 0.5 and r3.absolute
    assert r3.blocks == (
        (term(+1, 1, (5,), (10,)), term(-1, 1, (7,), (12,))),
        (term(+1, 4, (7,), (12,)), term(-1, 4, (5,), (10,))),
    )

    consumed = set()
    for audit in (r1, r2, r3):
        consumed |= audit.consumed_keys()
    assert consumed == {make_key(*emb[i]) for i in (1, 4, 5, 7, 10, 12)}


def test_null_calibration_false_positive_rate():
    # lambda = 0 plants no association; over 100 seeds the exact test on
    # 6/6 targets must show near-nominal rejection and a centred effect
    started = time.monotonic()
    p_values, effects = [], []
    for seed in range(100):
        spec, store = generate(
            PlantedBiasParams(association_strength=0.0, seed=seed)
        )
        result = grounded_permutation(
            spec.test, store, Experiment.E1, plan=EXACT, images=spec.images
        )
        p_values.append(result.p_value)
        effects.append(result.effect_size)
    elapsed = time.monotonic() - started
    fpr = sum(p < 0.05 for p in p_values) / len(p_values)
    mean_effect = math.fsum(effects) / len(effects)
    assert 0.0 <= fpr <= 0.12, f"false-positive rate {fpr}"
    assert abs(mean_effect) <= 0.15, f"mean null effect size {mean_effect}"
    assert elapsed <= 60.0, f"null calibration took {elapsed:.1f}s"


def test_power_increases_with_association_strength():
    outcomes = {}
    for lam in (0.5, 1.0, 2.0):
        spec, store = generate(
            PlantedBiasParams(association_strength=lam, seed=0)
        )
        outcomes[lam] = grounded_permutation(
            spec.test, store, Experiment.E1, plan=EXACT, images=spec.images
        )
    effects = [outcomes[lam].effect_size for lam in (0.5, 1.0, 2.0)]
    assert effects[0] < effects[1] < effects[2]
    assert outcomes[2.0].p_value <= 0.01


def test_vision_invariance_zero_nu_gives_exact_zero():
    for seed in range(10):
        spec, store = generate(PlantedBiasParams(vision_effect=0.0, seed=seed))
        r = resolve(spec.test, store, Experiment.E3, images=spec.images)
        assert experiment_statistic(r) == 0.0
        with pytest.raises(DegenerateVariance):
            grounded_effect_size(r)


def test_vision_invariance_has_distinguished_outcome(tmp_path):
    spec, store = generate(PlantedBiasParams(vision_effect=0.0, seed=0))
    spec_path, store_path = tmp_path / "nu0.json", tmp_path / "nu0.geb"
    write_spec(spec, spec_path)
    write_store(store, store_path)
    suite = run_suite(
        RunConfig(
            specs=(spec_path,),
            stores={Granularity.W: store_path},
            experiments=(Experiment.E3,),
        )
    )
    assert suite.exit_code == 0
    (record,) = suite.records
    assert record.status is RecordStatus.DEGENERATE
    assert record.result is None
    assert record.message  # the outcome explains itself in the report


def test_exact_and_monte_carlo_agree_within_binomial_bound():
    # frozen seed 1: exact p sits mid-range, where the bound is widest
    spec, store = generate(PlantedBiasParams(association_strength=0.0, seed=1))
    mc_plan = PermutationPlan(
        mode=PValueMethod.MONTE_CARLO, n_samples=99999, seed=0
    )
    for experiment in (Experiment.E1, Experiment.E2):
        p_exact = grounded_permutation(
            spec.test, store, experiment, plan=EXACT, images=spec.images
        ).p_value
        p_mc = grounded_permutation(
            spec.test, store, experiment, plan=mc_plan, images=spec.images
        ).p_value
        bound = 3.0 * math.sqrt(p_exact * (1.0 - p_exact) / 99999)
        assert abs(p_exact - p_mc) <= bound, (
            f"{experiment.value}: |{p_exact} - {p_mc}| > {bound}"
        )


def test_exact_distributions_have_zero_mean_for_equal_sets():
    for seed in range(20):
        spec, store = generate(PlantedBiasParams(seed=seed))
        for experiment in (Experiment.E1, Experiment.E2):
            r = resolve(spec.test, store, experiment, images=spec.images)
            values = element_values(r)
            dist = exact_distribution(experiment, values, r.n_x)
            mean = math.fsum(dist.tolist()) / len(dist)
            assert abs(mean) <= 1e-12, f"{experiment.value} mean {mean:.3e}"


def test_reports_and_store_files_are_deterministic(tmp_path):
    spec, store = generate(PlantedBiasParams(seed=4))
    spec_path, store_path = tmp_path / "d.json", tmp_path / "d.geb"
    write_spec(spec, spec_path)
    write_store(store, store_path)

    def render_all():
        config = RunConfig(
            specs=(spec_path,),
            stores={Granularity.W: store_path, Granularity.S: store_path},
            plan=PlanRequest(mode=PlanMode.MONTE_CARLO, n_samples=2000, seed=9),
        )
        suite = run_suite(config)
        return {fmt: render_report(suite, fmt) for fmt in ReportFormat}

    first, second = render_all(), render_all()
    for fmt in ReportFormat:
        path_a = tmp_path / f"a.{fmt.value}"
        path_b = tmp_path / f"b.{fmt.value}"
        path_a.write_text(first[fmt], encoding="utf-8")
        path_b.write_text(second[fmt], encoding="utf-8")
        assert path_a.read_bytes() == path_b.read_bytes()

    # canonical store write: admission order must not leak into the bytes
    items = store.items()
    shuffled = dict(reversed(items))
    p1, p2 = tmp_path / "c1.geb", tmp_path / "c2.geb"
    write_store(EmbeddingStore(store.dimension, dict(items), store.provenance), p1)
    write_store(EmbeddingStore(store.dimension, shuffled, store.provenance), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_balance_validator_exhaustive_off_by_one():
    group_names = ("a_x", "a_y", "b_x", "b_y")

    def spec_for(counts):
        def group(name, count):
            return tuple(
                make_key("w", f"img-{name}-{i}") for i in range(count)
            )

        test = GroundedBiasTest(
            name="balance",
            x_targets=(TargetElement("x0", ("ix",)),),
            y_targets=(TargetElement("y0", ("iy",)),),
            **{name: group(name, counts[name]) for name in group_names},
        )
        return SpecFile(test=test)

    balanced = {name: 5 for name in group_names}
    assert validate_balance(spec_for(balanced)).balanced

    for perturbed in group_names:
        for delta in (-1, +1):
            counts = dict(balanced, **{perturbed: 5 + delta})
            report = validate_balance(spec_for(counts))
            observed = {(v.pair, v.counts) for v in report.violations}
            expected = set()
            for i, gi in enumerate(group_names):
                for gj in group_names[i + 1:]:
                    if counts[gi] != counts[gj]:
                        expected.add(((gi, gj), (counts[gi], counts[gj])))
            assert observed == expected, (
                f"{perturbed} {5 + delta}: reported {observed}"
            )
            assert all(
                v.kind == "attribute-group" for v in report.violations
            )


def test_significance_marking_is_strictly_below_threshold():
    def result(p):
        return Result.build(
            test_name="marking",
            experiment=Experiment.E1,
            granularity=Granularity.W,
            statistic=0.0,
            effect_size=0.0,
            p_value=p,
            p_method=PValueMethod.EXACT,
            n_permutations=924,
        )

    marked, unmarked = result(0.049999), result(0.05)
    assert marked.significant
    assert not unmarked.significant
    report = render_report([marked, unmarked], ReportFormat.CSV)
    lines = report.splitlines()
    sig_column = lines[0].split(",").index("sig")
    assert lines[1].split(",")[sig_column] == "*"
    assert lines[2].split(",")[sig_column] == ""
