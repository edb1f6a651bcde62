"""Ungrounded association-test core: cosine similarity, the per-word
association, the differential association over two target sets, and its
standardized effect size.

All arithmetic runs in double precision regardless of how vectors are
stored. Reduction order is fixed by the caller (vectors arrive sorted by
serialized key), so identical inputs produce bit-identical statistics.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import (
    DegenerateVariance,
    DimensionMismatch,
    EmptyAttributeSet,
    EmptyTargetSet,
    InternalConsistencyError,
    ZeroVector,
)

# Cosines may exceed [-1, 1] by at most this much before we call it a bug.
COSINE_CLAMP_TOLERANCE = 1e-12

# Below this, per-target associations are considered identical.
VARIANCE_FLOOR = 1e-15


def as_matrix(vectors: Sequence, what: str) -> np.ndarray:
    """Stack vectors into an (n, d) float64 matrix, checking dimensions."""
    if len(vectors) == 0:
        raise EmptyAttributeSet(f"{what} is empty")
    rows = [np.asarray(v, dtype=np.float64) for v in vectors]
    dim = rows[0].shape
    if len(dim) != 1 or dim[0] < 1:
        raise DimensionMismatch(f"{what} entries must be 1-d vectors")
    for r in rows[1:]:
        if r.shape != dim:
            raise DimensionMismatch(
                f"{what} mixes dimensions {dim[0]} and {r.shape[0] if r.ndim == 1 else r.shape}"
            )
    return np.vstack(rows)


def _unit_rows(matrix: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVector(f"{what} contains a zero-norm vector")
    return matrix / norms[:, None]


def _clamp(values: np.ndarray) -> np.ndarray:
    excess = np.max(np.abs(values), initial=0.0) - 1.0
    if excess > COSINE_CLAMP_TOLERANCE:
        raise InternalConsistencyError(
            f"cosine magnitude exceeds 1 by {excess:.3e}, beyond the "
            f"{COSINE_CLAMP_TOLERANCE:.0e} rounding allowance"
        )
    return np.clip(values, -1.0, 1.0)


def cosine(u, v) -> float:
    """Cosine similarity of two vectors, in double precision.

    Results are clamped to [-1, 1] only to absorb rounding of at most
    1e-12; anything larger raises InternalConsistencyError.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DimensionMismatch(f"cosine of shapes {u.shape} and {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine undefined for zero-norm vectors")
    return float(_clamp(np.array([float(np.dot(u, v)) / (nu * nv)]))[0])


def cosine_matrix(targets: np.ndarray, attributes: np.ndarray) -> np.ndarray:
    """All pairwise cosines between rows of two matrices, shape (n, m)."""
    if targets.shape[1] != attributes.shape[1]:
        raise DimensionMismatch(
            f"targets have dimension {targets.shape[1]}, attributes {attributes.shape[1]}"
        )
    return _clamp(_unit_rows(targets, "targets") @ _unit_rows(attributes, "attributes").T)


def association_values(
    targets: Sequence, attrs_a: Sequence, attrs_b: Sequence
) -> np.ndarray:
    """Per-target association: mean cosine to A minus mean cosine to B.

    Returns one value per target row; the order of the inputs is the
    reduction order.
    """
    t = as_matrix(targets, "target set")
    a = as_matrix(attrs_a, "attribute set A")
    b = as_matrix(attrs_b, "attribute set B")
    return cosine_matrix(t, a).mean(axis=1) - cosine_matrix(t, b).mean(axis=1)


def word_association(w, attrs_a: Sequence, attrs_b: Sequence) -> float:
    """Association of one embedding with attribute set A versus set B."""
    if len(attrs_a) == 0 or len(attrs_b) == 0:
        raise EmptyAttributeSet("attribute sets must be non-empty")
    return float(association_values([w], attrs_a, attrs_b)[0])


def differential_association(
    targets_x: Sequence, targets_y: Sequence, attrs_a: Sequence, attrs_b: Sequence
) -> float:
    """Summed association of the X targets minus that of the Y targets.

    This is a sum, not a mean, over each target set.
    """
    if len(targets_x) == 0 or len(targets_y) == 0:
        raise EmptyTargetSet("target sets must be non-empty")
    sx = association_values(targets_x, attrs_a, attrs_b)
    sy = association_values(targets_y, attrs_a, attrs_b)
    return float(np.sum(sx) - np.sum(sy))


def stddev(values: np.ndarray, sample: bool = True) -> float:
    """Standard deviation with the configured convention (sample default)."""
    values = np.asarray(values, dtype=np.float64)
    if sample and values.size < 2:
        raise DegenerateVariance("sample stddev needs at least two values")
    return float(np.std(values, ddof=1 if sample else 0))


def effect_size_from_values(
    sx: np.ndarray, sy: np.ndarray, sample: bool = True
) -> float:
    """Effect size from precomputed per-target association values."""
    sx = np.asarray(sx, dtype=np.float64)
    sy = np.asarray(sy, dtype=np.float64)
    if sx.size + sy.size < 2:
        raise EmptyTargetSet("effect size needs at least two targets overall")
    pooled = np.concatenate([sx, sy])
    sd = stddev(pooled, sample=sample)
    if sd < VARIANCE_FLOOR:
        raise DegenerateVariance(
            "all per-target associations are identical; effect size undefined"
        )
    return float((np.mean(sx) - np.mean(sy)) / sd)


def effect_size(
    targets_x: Sequence,
    targets_y: Sequence,
    attrs_a: Sequence,
    attrs_b: Sequence,
    sample: bool = True,
) -> float:
    """Standardized difference of mean target-attribute associations.

    The divisor is the standard deviation of the per-target associations
    pooled over both target sets; Bessel-corrected by default, population
    convention via ``sample=False``.
    """
    if len(targets_x) == 0 or len(targets_y) == 0:
        raise EmptyTargetSet("target sets must be non-empty")
    sx = association_values(targets_x, attrs_a, attrs_b)
    sy = association_values(targets_y, attrs_a, attrs_b)
    return effect_size_from_values(sx, sy, sample=sample)
