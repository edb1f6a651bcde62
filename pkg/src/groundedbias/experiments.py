"""The three grounded experiment statistics and the selection rules that
decide which (text, image) embeddings feed each of them.

Selection semantics per experiment:

* E1 integrates the image category out: every target is scored against the
  union of both image-category attribute groups (``a_x + a_y`` vs
  ``b_x + b_y``).
* E2 keeps only category-matched images: X targets score against
  (``a_x``, ``b_x``), Y targets against (``a_y``, ``b_y``).
* E3 contrasts the two image categories per target and combines the two
  target-set contrasts by absolute value, so it is non-negative and
  invariant under swapping the image categories.

Each target element contributes the average of its grounded vectors (one
vector per element), keeping the number of summands equal to the number of
target concepts. Within every group, vectors are ordered lexicographically
by serialized key; statistics are therefore bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVariance, InvalidTest
from .model import (
    Experiment,
    GroundedBiasTest,
    ImageLabel,
    StimulusKey,
    ungrounded_key,
    validate_image_labels,
)
from .stats import VARIANCE_FLOOR, association_values, stddev

KeyTuple = tuple[StimulusKey, ...]


@dataclass(frozen=True)
class ResolvedSets:
    """Concrete vector selections for one experiment, with full key
    provenance: element ``i`` of ``x_vecs`` is the mean of the store vectors
    for ``x_keys[i]``, and attribute row ``j`` of ``a_x_vecs`` belongs to
    ``a_x_keys[j]``.

    For the ungrounded baseline the attribute vectors sit in the ``a_x`` /
    ``b_x`` slots and the ``_y`` slots are empty.
    """

    experiment: Experiment
    x_vecs: np.ndarray
    y_vecs: np.ndarray
    a_x_vecs: np.ndarray
    a_y_vecs: np.ndarray
    b_x_vecs: np.ndarray
    b_y_vecs: np.ndarray
    x_keys: tuple[KeyTuple, ...]
    y_keys: tuple[KeyTuple, ...]
    a_x_keys: KeyTuple
    a_y_keys: KeyTuple
    b_x_keys: KeyTuple
    b_y_keys: KeyTuple

    @property
    def n_x(self) -> int:
        return len(self.x_keys)

    @property
    def n_y(self) -> int:
        return len(self.y_keys)

    def _union(self, side: str) -> tuple[np.ndarray, KeyTuple]:
        """Attribute union for E1, ordered lexicographically by key."""
        if side == "a":
            keys = self.a_x_keys + self.a_y_keys
            vecs = np.vstack([self.a_x_vecs, self.a_y_vecs])
        else:
            keys = self.b_x_keys + self.b_y_keys
            vecs = np.vstack([self.b_x_vecs, self.b_y_vecs])
        order = sorted(range(len(keys)), key=lambda i: keys[i].serialize())
        return vecs[order], tuple(keys[i] for i in order)


def _sorted_keys(keys) -> list[StimulusKey]:
    return sorted(keys, key=lambda k: k.serialize())


def resolve(
    test: GroundedBiasTest,
    store,
    experiment: Experiment | str,
    images: dict[str, ImageLabel] | None = None,
) -> ResolvedSets:
    """Select from ``store`` exactly the vectors the experiment consumes.

    ``images`` is the optional image manifest; when given, category
    congruence is re-verified (CategoryMismatch on failure). Unresolvable
    keys raise MissingEmbedding listing every one of them.
    """
    experiment = Experiment(experiment)
    if experiment is Experiment.UNGROUNDED:
        return _resolve_ungrounded(test, store)
    test.require_grounded()
    if images is not None:
        validate_image_labels(test, images)

    x_elements = sorted(test.x_targets, key=lambda t: t.text_id)
    y_elements = sorted(test.y_targets, key=lambda t: t.text_id)
    x_keys = tuple(t.grounded_keys() for t in x_elements)
    y_keys = tuple(t.grounded_keys() for t in y_elements)
    groups = {name: tuple(_sorted_keys(keys)) for name, keys in test.attribute_groups().items()}

    all_keys = [k for element in x_keys + y_keys for k in element]
    for keys in groups.values():
        all_keys.extend(keys)
    store.require(all_keys)

    def element_mean(keys: KeyTuple) -> np.ndarray:
        return np.vstack([store.get(k) for k in keys]).mean(axis=0)

    def group_matrix(keys: KeyTuple) -> np.ndarray:
        return np.vstack([store.get(k) for k in keys])

    return ResolvedSets(
        experiment=experiment,
        x_vecs=np.vstack([element_mean(k) for k in x_keys]),
        y_vecs=np.vstack([element_mean(k) for k in y_keys]),
        a_x_vecs=group_matrix(groups["a_x"]),
        a_y_vecs=group_matrix(groups["a_y"]),
        b_x_vecs=group_matrix(groups["b_x"]),
        b_y_vecs=group_matrix(groups["b_y"]),
        x_keys=x_keys,
        y_keys=y_keys,
        a_x_keys=groups["a_x"],
        a_y_keys=groups["a_y"],
        b_x_keys=groups["b_x"],
        b_y_keys=groups["b_y"],
    )


def _resolve_ungrounded(test: GroundedBiasTest, store) -> ResolvedSets:
    test.require_ungrounded()
    x_elements = sorted(test.x_targets, key=lambda t: t.text_id)
    y_elements = sorted(test.y_targets, key=lambda t: t.text_id)
    x_keys = tuple((ungrounded_key(t.text_id),) for t in x_elements)
    y_keys = tuple((ungrounded_key(t.text_id),) for t in y_elements)
    a_keys = tuple(_sorted_keys(ungrounded_key(t) for t in test.a_text))
    b_keys = tuple(_sorted_keys(ungrounded_key(t) for t in test.b_text))
    flat = [k for element in x_keys + y_keys for k in element]
    store.require(flat + list(a_keys) + list(b_keys))
    empty = np.empty((0, store.dimension))
    return ResolvedSets(
        experiment=Experiment.UNGROUNDED,
        x_vecs=np.vstack([store.get(k[0]) for k in x_keys]),
        y_vecs=np.vstack([store.get(k[0]) for k in y_keys]),
        a_x_vecs=np.vstack([store.get(k) for k in a_keys]),
        a_y_vecs=empty,
        b_x_vecs=np.vstack([store.get(k) for k in b_keys]),
        b_y_vecs=empty,
        x_keys=x_keys,
        y_keys=y_keys,
        a_x_keys=a_keys,
        a_y_keys=(),
        b_x_keys=b_keys,
        b_y_keys=(),
    )


def _require(r: ResolvedSets, experiment: Experiment) -> None:
    if r.experiment is not experiment:
        raise InvalidTest(
            f"resolved sets were built for {r.experiment.value}, not {experiment.value}"
        )


def element_values(r: ResolvedSets) -> np.ndarray:
    """Per-target-element association values, X elements first.

    For E1 and the ungrounded baseline every element is scored against the
    same attribute sets. For E2 each element is scored against its own
    category's groups. For E3 the value is the category contrast
    ``s(t, a_x, b_x) - s(t, a_y, b_y)``; an element in the Y slot enters
    the statistic with this contrast negated.
    """
    targets = np.vstack([r.x_vecs, r.y_vecs])
    if r.experiment is Experiment.E1:
        a_union, _ = r._union("a")
        b_union, _ = r._union("b")
        return association_values(targets, a_union, b_union)
    if r.experiment is Experiment.UNGROUNDED:
        return association_values(targets, r.a_x_vecs, r.b_x_vecs)
    if r.experiment is Experiment.E2:
        sx = association_values(r.x_vecs, r.a_x_vecs, r.b_x_vecs)
        sy = association_values(r.y_vecs, r.a_y_vecs, r.b_y_vecs)
        return np.concatenate([sx, sy])
    # E3: per-element image-category contrast
    return association_values(targets, r.a_x_vecs, r.b_x_vecs) - association_values(
        targets, r.a_y_vecs, r.b_y_vecs
    )


def statistic_over_partition(
    r: ResolvedSets, values: np.ndarray, x_indices: np.ndarray
) -> float:
    """Evaluate the experiment statistic with ``x_indices`` occupying the X
    slot; the observed assignment is indices ``0..n_x-1``."""
    mask = np.zeros(len(values), dtype=bool)
    mask[x_indices] = True
    sum_x = float(np.sum(values[mask]))
    sum_y = float(np.sum(values[~mask]))
    if r.experiment is Experiment.E3:
        return 0.5 * (abs(sum_x) + abs(sum_y))
    return sum_x - sum_y


def _observed_statistic(r: ResolvedSets) -> float:
    values = element_values(r)
    return statistic_over_partition(r, values, np.arange(r.n_x))


def exp1_statistic(r: ResolvedSets) -> float:
    """Differential association against the unions of both image-category
    attribute groups (vision integrated out)."""
    _require(r, Experiment.E1)
    return _observed_statistic(r)


def exp2_statistic(r: ResolvedSets) -> float:
    """Differential association using only images matching each target's
    own category (counter-stereotypical evidence withheld from neither)."""
    _require(r, Experiment.E2)
    return _observed_statistic(r)


def exp3_statistic(r: ResolvedSets) -> float:
    """Mean absolute image-category contrast; non-negative, zero when the
    image category has no effect on attribute embeddings."""
    _require(r, Experiment.E3)
    return _observed_statistic(r)


def ungrounded_statistic(r: ResolvedSets) -> float:
    _require(r, Experiment.UNGROUNDED)
    return _observed_statistic(r)


def experiment_statistic(r: ResolvedSets) -> float:
    """Dispatch to the statistic for ``r.experiment``."""
    return _observed_statistic(r)


def grounded_effect_size(r: ResolvedSets, sample: bool = True) -> float:
    """Standardized effect size for the experiment.

    E1/E2 (and the ungrounded baseline) standardize the difference of mean
    per-element association values by their stddev pooled over both target
    sets. E3 uses the per-element category contrasts: X elements enter as
    ``s(t,a_x,b_x) - s(t,a_y,b_y)``, Y elements with the roles reversed,
    and the numerator is the mean absolute contrast per set.

    Raises DegenerateVariance when all per-element values coincide; for E3
    this is the distinguished "image category contributes nothing" outcome.
    """
    values = element_values(r)
    nx = r.n_x
    if r.experiment is Experiment.E3:
        deltas = np.concatenate([values[:nx], -values[nx:]])
        sd = stddev(deltas, sample=sample)
        if sd < VARIANCE_FLOOR:
            raise DegenerateVariance(
                "all image-category contrasts are identical (no visual "
                "contribution); E3 effect size undefined"
            )
        return float(
            0.5 * (abs(np.mean(deltas[:nx])) + abs(np.mean(deltas[nx:]))) / sd
        )
    sd = stddev(values, sample=sample)
    if sd < VARIANCE_FLOOR:
        raise DegenerateVariance(
            "all per-target associations are identical; effect size undefined"
        )
    return float((np.mean(values[:nx]) - np.mean(values[nx:])) / sd)


@dataclass(frozen=True)
class FormulaTerm:
    """One ``s(target, A, B)`` term in an experiment's composition."""

    sign: int
    target_keys: KeyTuple
    a_keys: KeyTuple
    b_keys: KeyTuple


@dataclass(frozen=True)
class FormulaAudit:
    """Literal composition of an experiment statistic, for auditing which
    store keys feed which term. ``blocks`` each sum their terms; with
    ``absolute`` set, each block is passed through ``abs`` before the
    blocks are summed and scaled by ``coefficient``."""

    coefficient: float
    absolute: bool
    blocks: tuple[tuple[FormulaTerm, ...], ...]

    def consumed_keys(self) -> set[StimulusKey]:
        keys: set[StimulusKey] = set()
        for block in self.blocks:
            for term in block:
                keys.update(term.target_keys)
                keys.update(term.a_keys)
                keys.update(term.b_keys)
        return keys


def formula_terms(r: ResolvedSets) -> FormulaAudit:
    """The exact index sets each experiment formula consumes."""
    if r.experiment is Experiment.E1:
        _, a_union = r._union("a")
        _, b_union = r._union("b")
        block = tuple(
            [FormulaTerm(+1, t, a_union, b_union) for t in r.x_keys]
            + [FormulaTerm(-1, t, a_union, b_union) for t in r.y_keys]
        )
        return FormulaAudit(1.0, False, (block,))
    if r.experiment in (Experiment.E2, Experiment.UNGROUNDED):
        block = tuple(
            [FormulaTerm(+1, t, r.a_x_keys, r.b_x_keys) for t in r.x_keys]
            + [
                FormulaTerm(
                    -1,
                    t,
                    r.a_y_keys if r.experiment is Experiment.E2 else r.a_x_keys,
                    r.b_y_keys if r.experiment is Experiment.E2 else r.b_x_keys,
                )
                for t in r.y_keys
            ]
        )
        return FormulaAudit(1.0, False, (block,))
    x_block = tuple(
        [FormulaTerm(+1, t, r.a_x_keys, r.b_x_keys) for t in r.x_keys]
        + [FormulaTerm(-1, t, r.a_y_keys, r.b_y_keys) for t in r.x_keys]
    )
    y_block = tuple(
        [FormulaTerm(+1, t, r.a_y_keys, r.b_y_keys) for t in r.y_keys]
        + [FormulaTerm(-1, t, r.a_x_keys, r.b_x_keys) for t in r.y_keys]
    )
    return FormulaAudit(0.5, True, (x_block, y_block))
