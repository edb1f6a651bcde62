"""Domain vocabulary shared by every other module.

A stimulus is addressed by a (text id, image id) pair; the reserved image id
``"-"`` marks an ungrounded (text-only) stimulus so classic word/sentence
association tests and grounded tests share one store format. All types here
are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import InvalidIdentifier, InvalidTest

KEY_SEPARATOR = "::"
UNGROUNDED_IMAGE_ID = "-"

DEFAULT_SIGNIFICANCE_THRESHOLD = 0.05


class Granularity(str, enum.Enum):
    """Which kind of vector a store holds: word, sentence, or word-in-context."""

    W = "W"
    S = "S"
    C = "C"


class Experiment(str, enum.Enum):
    """The three grounded statistics plus the ungrounded baseline."""

    E1 = "E1"
    E2 = "E2"
    E3 = "E3"
    UNGROUNDED = "UNGROUNDED"


GROUNDED_EXPERIMENTS = (Experiment.E1, Experiment.E2, Experiment.E3)


def _check_identifier(value: str, what: str) -> None:
    if not isinstance(value, str) or not value:
        raise InvalidIdentifier(f"{what} must be a non-empty string")
    if KEY_SEPARATOR in value:
        raise InvalidIdentifier(
            f"{what} {value!r} contains the reserved separator {KEY_SEPARATOR!r}"
        )


@dataclass(frozen=True, order=True)
class StimulusKey:
    """Address of one embedding: a text stimulus paired with an image id."""

    text_id: str
    image_id: str

    def __post_init__(self):
        _check_identifier(self.text_id, "text_id")
        _check_identifier(self.image_id, "image_id")
        # A ':' at the junction would forge a second separator in the
        # serialized form and break round-tripping, so reject it here.
        if self.text_id.endswith(":"):
            raise InvalidIdentifier(
                f"text_id {self.text_id!r} must not end with ':'"
            )
        if self.image_id.startswith(":"):
            raise InvalidIdentifier(
                f"image_id {self.image_id!r} must not start with ':'"
            )

    @property
    def grounded(self) -> bool:
        return self.image_id != UNGROUNDED_IMAGE_ID

    def serialize(self) -> str:
        return f"{self.text_id}{KEY_SEPARATOR}{self.image_id}"

    def __str__(self) -> str:
        return self.serialize()


def make_key(text_id: str, image_id: str) -> StimulusKey:
    """Build a validated stimulus key; image id ``"-"`` means ungrounded."""
    return StimulusKey(text_id, image_id)


def ungrounded_key(text_id: str) -> StimulusKey:
    return StimulusKey(text_id, UNGROUNDED_IMAGE_ID)


def parse_key(serialized: str) -> StimulusKey:
    """Inverse of :meth:`StimulusKey.serialize`."""
    text_id, sep, image_id = serialized.partition(KEY_SEPARATOR)
    if not sep:
        raise InvalidIdentifier(
            f"serialized key {serialized!r} lacks the {KEY_SEPARATOR!r} separator"
        )
    return StimulusKey(text_id, image_id)


@dataclass(frozen=True)
class TargetElement:
    """One target concept: a text id plus its category-congruent image ids.

    The image list may be empty for elements only used in ungrounded runs.
    Image ids must be unique; the element contributes the average of its
    grounded vectors to grounded statistics.
    """

    text_id: str
    image_ids: tuple[str, ...] = ()

    def __post_init__(self):
        _check_identifier(self.text_id, "target text_id")
        if self.text_id.endswith(":"):
            raise InvalidIdentifier(f"target text_id {self.text_id!r} must not end with ':'")
        object.__setattr__(self, "image_ids", tuple(self.image_ids))
        for image_id in self.image_ids:
            make_key(self.text_id, image_id)
        if len(set(self.image_ids)) != len(self.image_ids):
            raise InvalidTest(
                f"target {self.text_id!r} lists a duplicate image id"
            )

    def grounded_keys(self) -> tuple[StimulusKey, ...]:
        return tuple(make_key(self.text_id, i) for i in sorted(self.image_ids))


class ImageCategory(str, enum.Enum):
    X = "x"
    Y = "y"


class AttributeSide(str, enum.Enum):
    A = "A"
    B = "B"


@dataclass(frozen=True)
class ImageLabel:
    """Manifest entry for one image: which target category it depicts, and
    which attribute (if any; target-depiction images carry none)."""

    category: ImageCategory
    attribute: AttributeSide | None = None

    def __post_init__(self):
        object.__setattr__(self, "category", ImageCategory(self.category))
        if self.attribute is not None:
            object.__setattr__(self, "attribute", AttributeSide(self.attribute))


def _as_key_tuple(keys) -> tuple[StimulusKey, ...]:
    return tuple(k if isinstance(k, StimulusKey) else make_key(*k) for k in keys)


@dataclass(frozen=True)
class GroundedBiasTest:
    """A full bias-test definition.

    ``x_targets``/``y_targets`` are the two target concept sets. The four
    grounded attribute groups split each attribute side by the target
    category its images depict: ``a_x`` holds attribute-A stimuli grounded
    on category-x images, and so on. ``a_text``/``b_text`` optionally carry
    ungrounded attribute stimuli for the classic baseline.

    ``granularity`` is an advisory label (results are labelled with the
    granularity of the store they were computed from); it may be None.
    """

    name: str
    x_targets: tuple[TargetElement, ...]
    y_targets: tuple[TargetElement, ...]
    a_x: tuple[StimulusKey, ...] = ()
    a_y: tuple[StimulusKey, ...] = ()
    b_x: tuple[StimulusKey, ...] = ()
    b_y: tuple[StimulusKey, ...] = ()
    a_text: tuple[str, ...] = ()
    b_text: tuple[str, ...] = ()
    granularity: Granularity | None = None

    def __post_init__(self):
        if not self.name:
            raise InvalidTest("test name must be non-empty")
        object.__setattr__(self, "x_targets", tuple(self.x_targets))
        object.__setattr__(self, "y_targets", tuple(self.y_targets))
        for group in ("a_x", "a_y", "b_x", "b_y"):
            object.__setattr__(self, group, _as_key_tuple(getattr(self, group)))
        object.__setattr__(self, "a_text", tuple(self.a_text))
        object.__setattr__(self, "b_text", tuple(self.b_text))
        if self.granularity is not None:
            object.__setattr__(self, "granularity", Granularity(self.granularity))
        self._validate()

    def _validate(self) -> None:
        if not self.x_targets or not self.y_targets:
            raise InvalidTest(f"test {self.name!r}: both target sets must be non-empty")
        texts = [t.text_id for t in self.x_targets + self.y_targets]
        if len(set(texts)) != len(texts):
            raise InvalidTest(
                f"test {self.name!r}: target text ids must be unique across X and Y"
            )
        groups = {"a_x": self.a_x, "a_y": self.a_y, "b_x": self.b_x, "b_y": self.b_y}
        for name, keys in groups.items():
            if len(set(keys)) != len(keys):
                raise InvalidTest(f"test {self.name!r}: duplicate key in {name}")
        names = list(groups)
        for i, gi in enumerate(names):
            for gj in names[i + 1:]:
                overlap = set(groups[gi]) & set(groups[gj])
                if overlap:
                    key = sorted(overlap, key=str)[0]
                    raise InvalidTest(
                        f"test {self.name!r}: groups {gi} and {gj} share key {key}"
                    )
        for side in ("a_text", "b_text"):
            for text_id in getattr(self, side):
                ungrounded_key(text_id)  # validates the identifier
        if not self.has_grounded_attributes and not self.has_ungrounded_attributes:
            raise InvalidTest(
                f"test {self.name!r}: needs grounded attribute groups or "
                "a_text/b_text"
            )

    @property
    def has_grounded_attributes(self) -> bool:
        return bool(self.a_x and self.a_y and self.b_x and self.b_y)

    @property
    def has_ungrounded_attributes(self) -> bool:
        return bool(self.a_text and self.b_text)

    def require_grounded(self) -> None:
        if not self.has_grounded_attributes:
            raise InvalidTest(
                f"test {self.name!r}: grounded experiments need all four "
                "attribute groups (a_x, a_y, b_x, b_y) to be non-empty"
            )
        for element in self.x_targets + self.y_targets:
            if not element.image_ids:
                raise InvalidTest(
                    f"test {self.name!r}: target {element.text_id!r} has no "
                    "grounded images"
                )

    def require_ungrounded(self) -> None:
        if not self.has_ungrounded_attributes:
            raise InvalidTest(
                f"test {self.name!r}: the ungrounded baseline needs a_text "
                "and b_text"
            )

    def attribute_groups(self) -> dict[str, tuple[StimulusKey, ...]]:
        return {"a_x": self.a_x, "a_y": self.a_y, "b_x": self.b_x, "b_y": self.b_y}

    def referenced_images(self) -> set[str]:
        """All image ids the test mentions, excluding the ungrounded marker."""
        images: set[str] = set()
        for element in self.x_targets + self.y_targets:
            images.update(element.image_ids)
        for keys in self.attribute_groups().values():
            images.update(k.image_id for k in keys)
        images.discard(UNGROUNDED_IMAGE_ID)
        return images


def validate_image_labels(
    test: GroundedBiasTest, images: dict[str, ImageLabel]
) -> None:
    """Check every image reference in a test against a manifest.

    Raises DanglingReference for ids missing from the manifest and
    CategoryMismatch when an image's labels contradict the group using it
    (targets need images of their own category; group ``a_x`` needs
    category-x images labelled attribute A; and so on).
    """
    from .errors import CategoryMismatch, DanglingReference

    for set_label, category, elements in (
        ("targets.x", ImageCategory.X, test.x_targets),
        ("targets.y", ImageCategory.Y, test.y_targets),
    ):
        for element in elements:
            for image_id in element.image_ids:
                if image_id == UNGROUNDED_IMAGE_ID:
                    continue
                if image_id not in images:
                    raise DanglingReference(
                        f"{set_label}[{element.text_id}]: image {image_id!r} "
                        "not in the image manifest"
                    )
                if images[image_id].category is not category:
                    raise CategoryMismatch(
                        f"{set_label}[{element.text_id}]: image {image_id!r} is "
                        f"labelled category {images[image_id].category.value!r}, "
                        f"expected {category.value!r}"
                    )
    group_labels = {
        "a_x": (AttributeSide.A, ImageCategory.X),
        "a_y": (AttributeSide.A, ImageCategory.Y),
        "b_x": (AttributeSide.B, ImageCategory.X),
        "b_y": (AttributeSide.B, ImageCategory.Y),
    }
    for name, keys in test.attribute_groups().items():
        side, category = group_labels[name]
        for key in keys:
            if key.image_id == UNGROUNDED_IMAGE_ID:
                raise CategoryMismatch(
                    f"attributes.{name}: key {key} is ungrounded; grounded "
                    "groups need real images"
                )
            if key.image_id not in images:
                raise DanglingReference(
                    f"attributes.{name}: image {key.image_id!r} not in the "
                    "image manifest"
                )
            label = images[key.image_id]
            if label.category is not category:
                raise CategoryMismatch(
                    f"attributes.{name}: image {key.image_id!r} is labelled "
                    f"category {label.category.value!r}, expected {category.value!r}"
                )
            if label.attribute is not side:
                have = label.attribute.value if label.attribute else "none"
                raise CategoryMismatch(
                    f"attributes.{name}: image {key.image_id!r} is labelled "
                    f"attribute {have!r}, expected {side.value!r}"
                )


class PValueMethod(str, enum.Enum):
    EXACT = "exact"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class TestResult:
    """One evaluated (test, experiment, granularity) cell."""

    test_name: str
    experiment: Experiment
    granularity: Granularity | None
    statistic: float
    effect_size: float
    p_value: float
    p_method: PValueMethod
    n_permutations: int
    seed: int | None = None
    significant: bool = field(default=False)

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value {self.p_value} outside [0, 1]")

    @staticmethod
    def build(
        test_name: str,
        experiment: Experiment,
        granularity: Granularity | None,
        statistic: float,
        effect_size: float,
        p_value: float,
        p_method: PValueMethod,
        n_permutations: int,
        seed: int | None = None,
        threshold: float = DEFAULT_SIGNIFICANCE_THRESHOLD,
    ) -> "TestResult":
        """Construct a result with the significance flag derived from the
        threshold (strictly below, matching the reporting convention)."""
        return TestResult(
            test_name=test_name,
            experiment=Experiment(experiment),
            granularity=None if granularity is None else Granularity(granularity),
            statistic=float(statistic),
            effect_size=float(effect_size),
            p_value=float(p_value),
            p_method=PValueMethod(p_method),
            n_permutations=int(n_permutations),
            seed=seed,
            significant=bool(p_value < threshold),
        )
