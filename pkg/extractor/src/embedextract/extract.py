"""Batch extraction: spec + image directory -> one store per granularity.

Every required (text, image) pair is encoded at each requested
granularity; a pair that fails (missing image, undecodable file, encoder
error) is recorded and omitted from every output store, so the key sets
of the emitted stores stay identical. Failures never abort the run.
"""

from __future__ import annotations

import glob as globmod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .encoders import GRANULARITIES, get_encoder
from .errors import EncodeFailure, ExtractError
from .specio import UNGROUNDED_IMAGE_ID, read_spec, required_pairs, serialize_pair
from .storefile import write_store_file


@dataclass(frozen=True)
class ExtractionJob:
    """Configuration for one extraction run.

    outputs maps granularity ("W", "S", "C") to a store path; only the
    listed granularities are computed. deterministic is honored by the
    bundled model unconditionally and is the contract real backends must
    meet (fixed seeds, no nondeterministic kernels) when set.
    """

    spec_path: Path
    image_dir: Path
    outputs: Mapping[str, Path]
    model: str = "hashed-projection"
    dimension: int = 32
    layer: int = -1
    include_ungrounded: bool = False
    device: str = "cpu"
    batch_size: int = 16
    deterministic: bool = True

    def __post_init__(self):
        if not self.outputs:
            raise ExtractError("at least one output granularity is required")
        unknown = sorted(set(self.outputs) - set(GRANULARITIES))
        if unknown:
            raise ExtractError(f"unknown granularities: {', '.join(unknown)}")
        if self.dimension < 1:
            raise ExtractError(f"dimension must be >= 1, got {self.dimension}")
        if self.batch_size < 1:
            raise ExtractError(f"batch size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class FailureRecord:
    text_id: str
    image_id: str
    reason: str


@dataclass(frozen=True)
class ExtractionReport:
    spec_name: str
    model: str
    dimension: int
    pairs_requested: int
    pairs_written: int
    failures: tuple = field(default_factory=tuple)
    outputs: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def find_image_file(directory: Path, image_id: str):
    """Resolve an image id to a file: exact name first, then id.*"""
    exact = directory / image_id
    if exact.is_file():
        return exact
    matches = sorted(directory.glob(globmod.escape(image_id) + ".*"))
    for candidate in matches:
        if candidate.is_file():
            return candidate
    return None


def extract(job: ExtractionJob) -> ExtractionReport:
    spec = read_spec(job.spec_path)
    pairs = required_pairs(spec, include_ungrounded=job.include_ungrounded)
    encoder = get_encoder(job.model)(
        dimension=job.dimension, layer=job.layer, device=job.device
    )

    image_dir = Path(job.image_dir)
    image_vecs = {}
    image_errors = {}
    for image_id in sorted({img for _, img in pairs if img != UNGROUNDED_IMAGE_ID}):
        path = find_image_file(image_dir, image_id)
        if path is None:
            image_errors[image_id] = f"no file for image id {image_id!r} in {image_dir}"
            continue
        try:
            image_vecs[image_id] = encoder.image_vector(path)
        except EncodeFailure as exc:
            image_errors[image_id] = str(exc)

    entries = {g: {} for g in job.outputs}
    failures = []
    for start in range(0, len(pairs), job.batch_size):
        for text, image_id in pairs[start : start + job.batch_size]:
            if image_id in image_errors:
                failures.append(FailureRecord(text, image_id, image_errors[image_id]))
                continue
            image_vec = None if image_id == UNGROUNDED_IMAGE_ID else image_vecs[image_id]
            try:
                vectors = encoder.encode(text, image_vec)
            except EncodeFailure as exc:
                failures.append(FailureRecord(text, image_id, str(exc)))
                continue
            key = serialize_pair(text, image_id)
            for granularity in entries:
                entries[granularity][key] = vectors[granularity]

    written = 0
    outputs = {}
    for granularity, path in sorted(job.outputs.items()):
        provenance = (
            f"embedextract model={job.model} layer={job.layer} "
            f"dim={job.dimension} spec={spec.name} granularity={granularity}"
        )
        write_store_file(path, job.dimension, entries[granularity], provenance)
        written = len(entries[granularity])
        outputs[granularity] = Path(path)

    return ExtractionReport(
        spec_name=spec.name,
        model=job.model,
        dimension=job.dimension,
        pairs_requested=len(pairs),
        pairs_written=written,
        failures=tuple(failures),
        outputs=outputs,
    )
