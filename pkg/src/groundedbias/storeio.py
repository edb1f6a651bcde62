"""Embedding-store binary format, bias-test spec documents, and dataset
balance validation.

Store layout (all integers little-endian):

    magic        4 bytes  b"GWEB"
    version      u32      currently 1
    dimension    u32
    entry count  u64
    provenance   u32 byte length + UTF-8 text
    entries      per entry: u16 key byte length, UTF-8 serialized key,
                 dimension x f32 values

Entries are written sorted lexicographically by serialized key, so the
serialized bytes are a pure function of store content. Values are stored in
single precision and widened to double on load; vectors are quantized to
single precision when admitted into a store, which makes every statistic
invariant under a save/load round trip.

Spec documents are UTF-8 JSON; see ``SPEC_FORMAT`` and the README schema.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    BadMagic,
    CorruptRecord,
    InvariantViolation,
    MissingEmbedding,
    SchemaError,
    UnsupportedVersion,
)
from .model import (
    AttributeSide,
    GroundedBiasTest,
    ImageCategory,
    ImageLabel,
    StimulusKey,
    TargetElement,
    make_key,
    parse_key,
    validate_image_labels,
)

STORE_MAGIC = b"GWEB"
STORE_VERSION = 1

SPEC_FORMAT = "grounded-bias-test"
SPEC_VERSION = 1


def _quantize(values: np.ndarray) -> np.ndarray:
    # Round-trip through the storage precision once, at admission.
    return values.astype(np.float32).astype(np.float64)


class EmbeddingStore:
    """Immutable mapping from serialized stimulus keys to embedding vectors.

    All vectors share one dimension, contain no NaN/inf, and have strictly
    positive norm; violations are rejected at construction with the
    offending keys listed.
    """

    def __init__(
        self,
        dimension: int,
        entries: Mapping[str, Iterable[float]] | None = None,
        provenance: str = "",
    ):
        if int(dimension) < 1:
            raise InvariantViolation(f"dimension must be >= 1, got {dimension}")
        self.dimension = int(dimension)
        self.provenance = str(provenance)
        self._entries: dict[str, np.ndarray] = {}
        bad: dict[str, str] = {}
        for key, values in (entries or {}).items():
            serialized = key.serialize() if isinstance(key, StimulusKey) else str(key)
            parse_key(serialized)  # rejects malformed identifiers
            if serialized in self._entries:
                bad[serialized] = "duplicate key"
                continue
            vec = _quantize(np.asarray(values, dtype=np.float64))
            if vec.ndim != 1 or vec.shape[0] != self.dimension:
                bad[serialized] = f"dimension {vec.shape} != {self.dimension}"
            elif not np.all(np.isfinite(vec)):
                bad[serialized] = "non-finite value"
            elif float(np.linalg.norm(vec)) == 0.0:
                bad[serialized] = "zero-norm vector"
            else:
                vec.flags.writeable = False
                self._entries[serialized] = vec
        if bad:
            raise InvariantViolation(
                "store rejects invalid entries",
                keys=[f"{k} ({why})" for k, why in bad.items()],
            )

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key) -> bool:
        return self._serialized(key) in self._entries

    @staticmethod
    def _serialized(key) -> str:
        return key.serialize() if isinstance(key, StimulusKey) else str(key)

    def get(self, key) -> np.ndarray:
        serialized = self._serialized(key)
        if serialized not in self._entries:
            raise MissingEmbedding([serialized])
        return self._entries[serialized]

    def require(self, keys: Iterable) -> None:
        """Raise MissingEmbedding listing every unresolved key."""
        missing = [self._serialized(k) for k in keys if self._serialized(k) not in self._entries]
        if missing:
            raise MissingEmbedding(missing)

    def keys(self) -> list[str]:
        return sorted(self._entries)

    def items(self) -> list[tuple[str, np.ndarray]]:
        return [(k, self._entries[k]) for k in self.keys()]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.provenance == other.provenance
            and self.keys() == other.keys()
            and all(np.array_equal(self._entries[k], other._entries[k]) for k in self._entries)
        )


def write_store(store: EmbeddingStore, path) -> None:
    """Serialize a store canonically: identical stores yield identical bytes."""
    buf = io.BytesIO()
    buf.write(STORE_MAGIC)
    buf.write(struct.pack("<I", STORE_VERSION))
    buf.write(struct.pack("<I", store.dimension))
    buf.write(struct.pack("<Q", len(store)))
    meta = store.provenance.encode("utf-8")
    buf.write(struct.pack("<I", len(meta)))
    buf.write(meta)
    for key, vec in store.items():
        key_bytes = key.encode("utf-8")
        if len(key_bytes) > 0xFFFF:
            raise InvariantViolation(f"key too long to serialize: {key[:40]}...")
        buf.write(struct.pack("<H", len(key_bytes)))
        buf.write(key_bytes)
        buf.write(vec.astype("<f4").tobytes())
    Path(path).write_bytes(buf.getvalue())


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.data):
            raise CorruptRecord(f"truncated while reading {what}", self.offset)
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))[0]


def read_store(path) -> EmbeddingStore:
    """Parse a store file, widening values to double and enforcing the
    load-time invariants (unique keys, uniform dimension, finite nonzero
    vectors)."""
    data = Path(path).read_bytes()
    cur = _Cursor(data)
    if cur.take(4, "magic") != STORE_MAGIC:
        raise BadMagic(f"{path}: not an embedding store (bad magic bytes)")
    version = cur.unpack("<I", "version")
    if version != STORE_VERSION:
        raise UnsupportedVersion(f"{path}: format version {version} unsupported")
    dimension = cur.unpack("<I", "dimension")
    count = cur.unpack("<Q", "entry count")
    meta_len = cur.unpack("<I", "provenance length")
    provenance = cur.take(meta_len, "provenance").decode("utf-8")
    entries: dict[str, np.ndarray] = {}
    duplicates = []
    for _ in range(count):
        key_len = cur.unpack("<H", "key length")
        key_offset = cur.offset
        try:
            key = cur.take(key_len, "key").decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptRecord("key is not valid UTF-8", key_offset) from None
        raw = cur.take(4 * dimension, f"values of {key!r}")
        if key in entries:
            duplicates.append(key)
        entries[key] = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    if cur.offset != len(data):
        raise CorruptRecord(
            f"{len(data) - cur.offset} trailing bytes after final record", cur.offset
        )
    if duplicates:
        raise InvariantViolation("duplicate keys in store", keys=duplicates)
    return EmbeddingStore(dimension, entries, provenance)


@dataclass(frozen=True)
class BalanceViolation:
    """One detected count inequality, naming the compared pair."""

    kind: str  # "attribute-group" or "target-images"
    pair: tuple[str, str]
    counts: tuple[int, int]

    def describe(self) -> str:
        return (
            f"{self.kind}: |{self.pair[0]}| = {self.counts[0]} but "
            f"|{self.pair[1]}| = {self.counts[1]}"
        )


@dataclass(frozen=True)
class BalanceReport:
    test_name: str
    group_counts: dict[str, int]
    violations: tuple[BalanceViolation, ...]

    @property
    def balanced(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class SpecFile:
    """A parsed spec document: one bias test plus its image manifest."""

    test: GroundedBiasTest
    images: dict[str, ImageLabel] = field(default_factory=dict)
    source: str | None = None


def validate_balance(spec: SpecFile) -> BalanceReport:
    """Check the dataset-balance norm: equal counts across the four grounded
    attribute groups, and the same number of images on every target element.

    Returns a report (never raises); a balanced spec yields no violations.
    """
    test = spec.test
    violations: list[BalanceViolation] = []
    groups = {name: len(keys) for name, keys in test.attribute_groups().items()}
    names = list(groups)
    for i, gi in enumerate(names):
        for gj in names[i + 1:]:
            if groups[gi] != groups[gj]:
                violations.append(
                    BalanceViolation(
                        "attribute-group", (gi, gj), (groups[gi], groups[gj])
                    )
                )
    elements = [("X", t) for t in test.x_targets] + [("Y", t) for t in test.y_targets]
    ref_label, ref = elements[0]
    for label, element in elements[1:]:
        if len(element.image_ids) != len(ref.image_ids):
            violations.append(
                BalanceViolation(
                    "target-images",
                    (f"{ref_label}[{ref.text_id}]", f"{label}[{element.text_id}]"),
                    (len(ref.image_ids), len(element.image_ids)),
                )
            )
    counts = dict(groups)
    counts.update(
        {f"{label}[{t.text_id}]": len(t.image_ids) for label, t in elements}
    )
    return BalanceReport(test.name, counts, tuple(violations))


# ---------------------------------------------------------------------------
# Spec documents


def _expect(obj, path: str, kind, what: str):
    if not isinstance(obj, kind):
        raise SchemaError(path, f"expected {what}, got {type(obj).__name__}")
    return obj


def _expect_keys(obj: dict, path: str, required: set[str], optional: set[str]):
    unknown = set(obj) - required - optional
    if unknown:
        raise SchemaError(path, f"unknown field(s): {', '.join(sorted(unknown))}")
    missing = required - set(obj)
    if missing:
        raise SchemaError(path, f"missing field(s): {', '.join(sorted(missing))}")


def _parse_target_list(raw, path: str) -> tuple[TargetElement, ...]:
    _expect(raw, path, list, "an array of target objects")
    elements = []
    for i, item in enumerate(raw):
        ipath = f"{path}[{i}]"
        _expect(item, ipath, dict, "an object")
        _expect_keys(item, ipath, {"text"}, {"images"})
        text = _expect(item["text"], f"{ipath}.text", str, "a string")
        images = item.get("images", [])
        _expect(images, f"{ipath}.images", list, "an array of image ids")
        for j, img in enumerate(images):
            _expect(img, f"{ipath}.images[{j}]", str, "a string")
        elements.append(TargetElement(text, tuple(images)))
    return tuple(elements)


def _parse_attr_group(raw, path: str) -> tuple[StimulusKey, ...]:
    _expect(raw, path, list, "an array of {text, image} objects")
    keys = []
    for i, item in enumerate(raw):
        ipath = f"{path}[{i}]"
        _expect(item, ipath, dict, "an object")
        _expect_keys(item, ipath, {"text", "image"}, set())
        text = _expect(item["text"], f"{ipath}.text", str, "a string")
        image = _expect(item["image"], f"{ipath}.image", str, "a string")
        keys.append(make_key(text, image))
    return tuple(keys)


def _parse_manifest(raw, path: str) -> dict[str, ImageLabel]:
    _expect(raw, path, dict, "an object mapping image ids to labels")
    manifest = {}
    for image_id, label in raw.items():
        ipath = f"{path}.{image_id}"
        _expect(label, ipath, dict, "an object")
        _expect_keys(label, ipath, {"category"}, {"attribute"})
        category = _expect(label["category"], f"{ipath}.category", str, "a string")
        if category not in ("x", "y"):
            raise SchemaError(f"{ipath}.category", f"must be 'x' or 'y', got {category!r}")
        attribute = label.get("attribute")
        if attribute is not None:
            if attribute not in ("A", "B"):
                raise SchemaError(
                    f"{ipath}.attribute", f"must be 'A' or 'B', got {attribute!r}"
                )
            attribute = AttributeSide(attribute)
        manifest[image_id] = ImageLabel(ImageCategory(category), attribute)
    return manifest


def parse_spec_text(text: str, source: str | None = None) -> SpecFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from None
    _expect(doc, "$", dict, "a JSON object")
    _expect_keys(
        doc,
        "$",
        {"format", "version", "name", "targets", "attributes", "images"},
        {"granularity"},
    )
    if doc["format"] != SPEC_FORMAT:
        raise SchemaError("$.format", f"expected {SPEC_FORMAT!r}, got {doc['format']!r}")
    if doc["version"] != SPEC_VERSION:
        raise SchemaError("$.version", f"unsupported spec version {doc['version']!r}")
    name = _expect(doc["name"], "$.name", str, "a string")
    granularity = doc.get("granularity")
    if granularity is not None and granularity not in ("W", "S", "C"):
        raise SchemaError("$.granularity", f"must be W, S or C, got {granularity!r}")
    targets = _expect(doc["targets"], "$.targets", dict, "an object")
    _expect_keys(targets, "$.targets", {"x", "y"}, set())
    attrs = _expect(doc["attributes"], "$.attributes", dict, "an object")
    _expect_keys(
        attrs, "$.attributes", set(), {"a_x", "a_y", "b_x", "b_y", "a_text", "b_text"}
    )
    text_lists = {}
    for side in ("a_text", "b_text"):
        raw = attrs.get(side, [])
        _expect(raw, f"$.attributes.{side}", list, "an array of strings")
        for i, t in enumerate(raw):
            _expect(t, f"$.attributes.{side}[{i}]", str, "a string")
        text_lists[side] = tuple(raw)
    test = GroundedBiasTest(
        name=name,
        x_targets=_parse_target_list(targets["x"], "$.targets.x"),
        y_targets=_parse_target_list(targets["y"], "$.targets.y"),
        a_x=_parse_attr_group(attrs.get("a_x", []), "$.attributes.a_x"),
        a_y=_parse_attr_group(attrs.get("a_y", []), "$.attributes.a_y"),
        b_x=_parse_attr_group(attrs.get("b_x", []), "$.attributes.b_x"),
        b_y=_parse_attr_group(attrs.get("b_y", []), "$.attributes.b_y"),
        a_text=text_lists["a_text"],
        b_text=text_lists["b_text"],
        granularity=granularity,
    )
    images = _parse_manifest(doc["images"], "$.images")
    validate_image_labels(test, images)
    return SpecFile(test=test, images=images, source=source)


def parse_spec(path) -> SpecFile:
    """Load and validate a spec document from disk."""
    return parse_spec_text(Path(path).read_text(encoding="utf-8"), source=str(path))


def spec_to_document(spec: SpecFile) -> dict:
    test = spec.test
    doc = {
        "format": SPEC_FORMAT,
        "version": SPEC_VERSION,
        "name": test.name,
        "targets": {
            side: [
                {"text": t.text_id, "images": list(t.image_ids)}
                for t in elements
            ]
            for side, elements in (("x", test.x_targets), ("y", test.y_targets))
        },
        "attributes": {
            name: [{"text": k.text_id, "image": k.image_id} for k in keys]
            for name, keys in test.attribute_groups().items()
        },
        "images": {
            image_id: (
                {"category": label.category.value, "attribute": label.attribute.value}
                if label.attribute is not None
                else {"category": label.category.value}
            )
            for image_id, label in sorted(spec.images.items())
        },
    }
    if test.a_text:
        doc["attributes"]["a_text"] = list(test.a_text)
    if test.b_text:
        doc["attributes"]["b_text"] = list(test.b_text)
    if test.granularity is not None:
        doc["granularity"] = test.granularity.value
    return doc


def serialize_spec(spec: SpecFile) -> str:
    """Canonical JSON text for a spec; parse_spec_text inverts this."""
    return json.dumps(spec_to_document(spec), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_spec(spec: SpecFile, path) -> None:
    Path(path).write_text(serialize_spec(spec), encoding="utf-8")
