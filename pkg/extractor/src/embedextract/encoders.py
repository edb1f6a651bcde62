"""Encoders turning (text, image) pairs into W/S/C vectors.

Granularity semantics, pinned here because they are the only
model-dependent step:

- W: embedding of the bare target/attribute token(s), conditioned on the
  image when one is present. Multi-token texts use subword aggregation
  by mean.
- S: whole-sequence embedding. The image participates as one more
  sequence element, so S pools the token vectors together with the image
  vector.
- C: the token's encoding in its sentence context, realized as an equal
  blend of the bare-token pooling and the sequence pooling.

Ungrounded pairs (image id "-") drop the image term from every formula.
All outputs are L2-normalized.

The bundled "hashed-projection" model is a deterministic stand-in for a
real grounded encoder: token vectors are seeded Gaussian draws keyed by
a hash of the token (and the configured layer), image vectors by a hash
of the decoded 8x8 grayscale thumbnail. It exercises the full pipeline
(decoding, pooling, batching, failure paths) without a checkpoint
download.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import EncodeFailure, UnknownModel

GRANULARITIES = ("W", "S", "C")

_IMAGE_MIX = 0.5  # weight of the image term in the W pooling


class Encoder:
    """Interface shared by all registered models."""

    name = "abstract"

    def __init__(self, dimension: int, layer: int = -1, device: str = "cpu"):
        if dimension < 1:
            raise EncodeFailure(f"dimension must be >= 1, got {dimension}")
        self.dimension = dimension
        self.layer = layer
        self.device = device

    def image_vector(self, path) -> np.ndarray:
        raise NotImplementedError

    def encode(self, text: str, image_vec: np.ndarray | None) -> dict:
        """Return {"W": ..., "S": ..., "C": ...} for one pair."""
        raise NotImplementedError


class HashedProjectionEncoder(Encoder):
    name = "hashed-projection"

    def _token_vector(self, token: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.layer}:token:{token}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.standard_normal(self.dimension)

    def image_vector(self, path) -> np.ndarray:
        try:
            with Image.open(path) as img:
                payload = img.convert("L").resize((8, 8)).tobytes()
        except (OSError, UnidentifiedImageError, ValueError) as exc:
            raise EncodeFailure(f"cannot decode {path}: {exc}") from exc
        digest = hashlib.sha256(b"image:" + payload).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.standard_normal(self.dimension)

    def encode(self, text: str, image_vec: np.ndarray | None) -> dict:
        tokens = text.lower().split()
        if not tokens:
            raise EncodeFailure("empty text stimulus")
        token_vecs = [self._token_vector(t) for t in tokens]
        word = np.mean(token_vecs, axis=0)
        if image_vec is None:
            sequence = word
            w_raw = word
        else:
            sequence = np.mean(token_vecs + [image_vec], axis=0)
            w_raw = word + _IMAGE_MIX * image_vec
        out = {
            "W": w_raw,
            "S": sequence,
            "C": 0.5 * word + 0.5 * sequence,
        }
        return {g: _unit(vec, text) for g, vec in out.items()}


def _unit(vec: np.ndarray, label: str) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if not np.isfinite(norm) or norm == 0.0:
        raise EncodeFailure(f"degenerate pooled vector for {label!r}")
    return vec / norm


ENCODERS = {HashedProjectionEncoder.name: HashedProjectionEncoder}


def get_encoder(name: str):
    try:
        return ENCODERS[name]
    except KeyError:
        raise UnknownModel(
            f"unknown model {name!r}; available: {', '.join(list_encoders())}"
        ) from None


def list_encoders():
    return sorted(ENCODERS)
