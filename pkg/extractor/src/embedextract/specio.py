"""Reading bias-test spec documents, reduced to what extraction needs.

The full semantic validation of a spec (balance, category congruence,
disjointness) belongs to the evaluation tool; this reader only recovers
the stimulus vocabulary and the image catalogue, and derives the set of
(text, image) pairs a store must provide:

* every target text paired with every catalogued target image (images
  carrying a category label but no attribute label), and
* every attribute text paired with every attribute-labelled image.

That cross product is deliberately wider than what any single experiment
consumes; the store is the superset all of them draw from. Ungrounded
twins (image id "-") are added on request for the text-only baseline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import SpecError

SPEC_FORMAT = "grounded-bias-test"
SPEC_VERSION = 1
UNGROUNDED_IMAGE_ID = "-"
KEY_SEPARATOR = "::"


@dataclass(frozen=True)
class BiasSpec:
    """Stimulus vocabulary of one spec document."""

    name: str
    target_texts: tuple[str, ...]
    attribute_texts: tuple[str, ...]
    target_images: tuple[str, ...]
    attribute_images: tuple[str, ...]
    ungrounded_texts: tuple[str, ...]


def _identifier(value, path: str) -> str:
    if not isinstance(value, str) or not value:
        raise SpecError(path, "expected a non-empty string")
    if KEY_SEPARATOR in value:
        raise SpecError(path, f"identifier may not contain {KEY_SEPARATOR!r}")
    return value


def serialize_pair(text_id: str, image_id: str) -> str:
    return f"{text_id}{KEY_SEPARATOR}{image_id}"


def read_spec(path) -> BiasSpec:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpecError("$", f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SpecError("$", "expected a JSON object")
    if doc.get("format") != SPEC_FORMAT:
        raise SpecError("$.format", f"expected {SPEC_FORMAT!r}")
    if doc.get("version") != SPEC_VERSION:
        raise SpecError("$.version", f"unsupported version {doc.get('version')!r}")
    name = _identifier(doc.get("name"), "$.name")

    targets = doc.get("targets")
    if not isinstance(targets, dict):
        raise SpecError("$.targets", "expected an object")
    target_texts: list[str] = []
    for side in ("x", "y"):
        elements = targets.get(side)
        if not isinstance(elements, list) or not elements:
            raise SpecError(f"$.targets.{side}", "expected a non-empty array")
        for i, element in enumerate(elements):
            if not isinstance(element, dict):
                raise SpecError(f"$.targets.{side}[{i}]", "expected an object")
            text = _identifier(element.get("text"), f"$.targets.{side}[{i}].text")
            if text not in target_texts:
                target_texts.append(text)

    attrs = doc.get("attributes")
    if not isinstance(attrs, dict):
        raise SpecError("$.attributes", "expected an object")
    attribute_texts: list[str] = []
    for group in ("a_x", "a_y", "b_x", "b_y"):
        for i, item in enumerate(attrs.get(group, [])):
            if not isinstance(item, dict):
                raise SpecError(f"$.attributes.{group}[{i}]", "expected an object")
            text = _identifier(item.get("text"), f"$.attributes.{group}[{i}].text")
            if text not in attribute_texts:
                attribute_texts.append(text)

    ungrounded = list(target_texts)
    for side in ("a_text", "b_text"):
        for i, text in enumerate(attrs.get(side, [])):
            text = _identifier(text, f"$.attributes.{side}[{i}]")
            if text not in ungrounded:
                ungrounded.append(text)

    manifest = doc.get("images")
    if not isinstance(manifest, dict):
        raise SpecError("$.images", "expected an object")
    target_images: list[str] = []
    attribute_images: list[str] = []
    for image_id in sorted(manifest):
        label = manifest[image_id]
        _identifier(image_id, "$.images key")
        if not isinstance(label, dict):
            raise SpecError(f"$.images.{image_id}", "expected an object")
        if "attribute" in label and label["attribute"] is not None:
            attribute_images.append(image_id)
        else:
            target_images.append(image_id)

    return BiasSpec(
        name=name,
        target_texts=tuple(target_texts),
        attribute_texts=tuple(attribute_texts),
        target_images=tuple(target_images),
        attribute_images=tuple(attribute_images),
        ungrounded_texts=tuple(ungrounded),
    )


def required_pairs(
    spec: BiasSpec, include_ungrounded: bool = False
) -> tuple[tuple[str, str], ...]:
    """All (text_id, image_id) pairs a conforming store must contain,
    sorted by serialized key."""
    pairs = [
        (text, image)
        for text in spec.target_texts
        for image in spec.target_images
    ]
    pairs += [
        (text, image)
        for text in spec.attribute_texts
        for image in spec.attribute_images
    ]
    if include_ungrounded:
        pairs += [(text, UNGROUNDED_IMAGE_ID) for text in spec.ungrounded_texts]
    return tuple(sorted(set(pairs), key=lambda p: serialize_pair(*p)))
