"""Planted-bias fixture generator and an independent brute-force oracle.

The generator plants a known association structure: X targets lean toward
the attribute-A axis with strength ``association_strength`` (lambda), Y
targets toward the B axis, and image category shifts grounded attribute
embeddings along a third axis with strength ``vision_effect`` (nu). All
noise is drawn up front in a fixed order, so sweeping lambda or nu with
one seed reuses the identical noise realization; with nu = 0 the two
image-category variants of an attribute are the same vector bit for bit
and the category-contrast statistic is exactly zero.

The oracle functions reimplement every statistic as literal nested loops
over plain Python lists (stdlib math/statistics only). They share no code
with the engine modules on purpose; tests compare the two paths to 1e-12.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

import numpy as np

from .model import (
    AttributeSide,
    Experiment,
    GroundedBiasTest,
    ImageCategory,
    ImageLabel,
    StimulusKey,
    TargetElement,
    make_key,
)
from .storeio import EmbeddingStore, SpecFile

NOISE_SCALE = 0.5


@dataclass(frozen=True)
class PlantedBiasParams:
    """Knobs for the planted-bias construction.

    ``association_strength`` is the target-to-attribute-axis pull; 0 gives
    a pure-noise null. ``vision_effect`` is the image-category shift
    applied to grounded attribute embeddings; 0 makes grounding vacuous.
    """

    dimension: int = 16
    n_targets_per_set: int = 6
    n_attrs_per_group: int = 4
    association_strength: float = 1.0
    vision_effect: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dimension < 4:
            raise ValueError(f"dimension must be >= 4, got {self.dimension}")
        if self.n_targets_per_set < 1:
            raise ValueError("n_targets_per_set must be >= 1")
        if self.n_attrs_per_group < 1:
            raise ValueError("n_attrs_per_group must be >= 1")
        for label in ("association_strength", "vision_effect"):
            value = getattr(self, label)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{label} must be finite and >= 0, got {value}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")


def _normalize(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def generate(params: PlantedBiasParams) -> tuple[SpecFile, EmbeddingStore]:
    """Deterministic balanced spec plus matching embedding store.

    The store holds grounded keys for every target and attribute stimulus
    and ungrounded ("-") twins for the text-only baseline; targets carry
    one image each.
    """
    d = params.dimension
    n = params.n_targets_per_set
    m = params.n_attrs_per_group
    lam = params.association_strength
    nu = params.vision_effect

    rng = np.random.default_rng(params.seed)
    # One block per stimulus family, fixed order: parameter sweeps with a
    # shared seed must see identical noise.
    eta_x = rng.standard_normal((n, d))
    eta_y = rng.standard_normal((n, d))
    eta_a = rng.standard_normal((m, d))
    eta_b = rng.standard_normal((m, d))

    axis_a = np.zeros(d)
    axis_a[0] = 1.0
    axis_b = np.zeros(d)
    axis_b[1] = 1.0
    axis_cat = np.zeros(d)
    axis_cat[2] = 1.0

    x_vecs = _normalize(lam * axis_a + NOISE_SCALE * eta_x)
    y_vecs = _normalize(lam * axis_b + NOISE_SCALE * eta_y)
    base_a = axis_a + NOISE_SCALE * eta_a
    base_b = axis_b + NOISE_SCALE * eta_b

    width = len(str(max(n, m) - 1))

    def tid(prefix: str, i: int) -> str:
        return f"{prefix}{i:0{width}d}"

    entries: dict[tuple[str, str], np.ndarray] = {}
    images: dict[str, ImageLabel] = {}

    x_targets = []
    y_targets = []
    for prefix, vecs, out, category in (
        ("x", x_vecs, x_targets, ImageCategory.X),
        ("y", y_vecs, y_targets, ImageCategory.Y),
    ):
        for i in range(len(vecs)):
            text = tid(prefix, i)
            image = f"img-{text}"
            out.append(TargetElement(text_id=text, image_ids=(image,)))
            images[image] = ImageLabel(category=category, attribute=None)
            entries[(text, image)] = vecs[i]
            entries[(text, "-")] = vecs[i]

    groups: dict[str, list[StimulusKey]] = {"a_x": [], "a_y": [], "b_x": [], "b_y": []}
    a_text = []
    b_text = []
    for prefix, base, side, texts in (
        ("attA", base_a, AttributeSide.A, a_text),
        ("attB", base_b, AttributeSide.B, b_text),
    ):
        for i in range(len(base)):
            text = tid(prefix, i)
            texts.append(text)
            entries[(text, "-")] = _normalize(base[i][None, :])[0]
            for cat_tag, category, shift in (
                ("x", ImageCategory.X, nu),
                ("y", ImageCategory.Y, -nu),
            ):
                image = f"img-{text}-{cat_tag}"
                images[image] = ImageLabel(category=category, attribute=side)
                groups[f"{side.value.lower()}_{cat_tag}"].append(make_key(text, image))
                entries[(text, image)] = _normalize(
                    (base[i] + shift * axis_cat)[None, :]
                )[0]

    test = GroundedBiasTest(
        name="synthetic-planted-bias",
        x_targets=tuple(x_targets),
        y_targets=tuple(y_targets),
        a_x=tuple(groups["a_x"]),
        a_y=tuple(groups["a_y"]),
        b_x=tuple(groups["b_x"]),
        b_y=tuple(groups["b_y"]),
        a_text=tuple(a_text),
        b_text=tuple(b_text),
    )
    provenance = (
        "synthetic planted-bias generator: "
        f"d={d} targets={n}/{n} attrs={m} lambda={lam!r} nu={nu!r} seed={params.seed}"
    )
    store = EmbeddingStore(
        dimension=d,
        entries={f"{t}::{i}": vec for (t, i), vec in entries.items()},
        provenance=provenance,
    )
    return SpecFile(test=test, images=images, source=None), store


# --------------------------------------------------------------------------
# Oracle: literal nested-loop reimplementation on plain lists. Nothing here
# may call into stats/experiments; independence is the point.


def oracle_cosine(u, v) -> float:
    dot = math.fsum(a * b for a, b in zip(u, v, strict=True))
    nu = math.sqrt(math.fsum(a * a for a in u))
    nv = math.sqrt(math.fsum(b * b for b in v))
    return dot / (nu * nv)


def oracle_word_association(w, attrs_a, attrs_b) -> float:
    mean_a = math.fsum(oracle_cosine(w, a) for a in attrs_a) / len(attrs_a)
    mean_b = math.fsum(oracle_cosine(w, b) for b in attrs_b) / len(attrs_b)
    return mean_a - mean_b


def oracle_differential_association(xs, ys, attrs_a, attrs_b) -> float:
    return math.fsum(
        oracle_word_association(x, attrs_a, attrs_b) for x in xs
    ) - math.fsum(oracle_word_association(y, attrs_a, attrs_b) for y in ys)


def oracle_effect_size(xs, ys, attrs_a, attrs_b, sample: bool = True) -> float:
    sx = [oracle_word_association(x, attrs_a, attrs_b) for x in xs]
    sy = [oracle_word_association(y, attrs_a, attrs_b) for y in ys]
    spread = statistics.stdev(sx + sy) if sample else statistics.pstdev(sx + sy)
    return (
        math.fsum(sx) / len(sx) - math.fsum(sy) / len(sy)
    ) / spread


def oracle_exp1(xs, ys, a_x, a_y, b_x, b_y) -> float:
    a_union = list(a_x) + list(a_y)
    b_union = list(b_x) + list(b_y)
    return oracle_differential_association(xs, ys, a_union, b_union)


def oracle_exp2(xs, ys, a_x, a_y, b_x, b_y) -> float:
    return math.fsum(
        oracle_word_association(x, a_x, b_x) for x in xs
    ) - math.fsum(oracle_word_association(y, a_y, b_y) for y in ys)


def oracle_exp3(xs, ys, a_x, a_y, b_x, b_y) -> float:
    own_x = math.fsum(oracle_word_association(x, a_x, b_x) for x in xs)
    cross_x = math.fsum(oracle_word_association(x, a_y, b_y) for x in xs)
    own_y = math.fsum(oracle_word_association(y, a_y, b_y) for y in ys)
    cross_y = math.fsum(oracle_word_association(y, a_x, b_x) for y in ys)
    return 0.5 * (abs(own_x - cross_x) + abs(own_y - cross_y))


def oracle_statistic(xs, ys, a_x, a_y, b_x, b_y, experiment) -> float:
    experiment = Experiment(experiment)
    if experiment is Experiment.E1:
        return oracle_exp1(xs, ys, a_x, a_y, b_x, b_y)
    if experiment is Experiment.E2:
        return oracle_exp2(xs, ys, a_x, a_y, b_x, b_y)
    if experiment is Experiment.E3:
        return oracle_exp3(xs, ys, a_x, a_y, b_x, b_y)
    return oracle_differential_association(xs, ys, a_x, b_x)


def oracle_exact_pvalue(values_x, values_y, experiment=Experiment.E1) -> float:
    """Exhaustive permutation p-value over fixed per-element values, via
    recursive partition enumeration (no itertools, no numpy)."""
    experiment = Experiment(experiment)
    pool = list(values_x) + list(values_y)
    nx = len(values_x)

    def stat(x_idx: list[int]) -> float:
        chosen = set(x_idx)
        sum_x = math.fsum(pool[i] for i in range(len(pool)) if i in chosen)
        sum_y = math.fsum(pool[i] for i in range(len(pool)) if i not in chosen)
        if experiment is Experiment.E3:
            return 0.5 * (abs(sum_x) + abs(sum_y))
        return sum_x - sum_y

    observed = stat(list(range(nx)))
    outcomes: list[float] = []

    def pick(start: int, chosen: list[int]) -> None:
        if len(chosen) == nx:
            outcomes.append(stat(chosen))
            return
        for i in range(start, len(pool)):
            pick(i + 1, chosen + [i])

    pick(0, [])
    hits = sum(1 for s in outcomes if s >= observed)
    return hits / len(outcomes)
