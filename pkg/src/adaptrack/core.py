"""Foundational value types and geometry/embedding primitives.

Boxes are axis-aligned, stored as top-left corner plus size in pixel units.
Embeddings are unit-norm float64 vectors. Everything here is an immutable
value: safe to share across tracker instances and threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "BBox",
    "ConfidenceTriple",
    "Embedding",
    "Detection",
    "EmbeddingDimensionError",
    "ZeroNormError",
    "iou",
    "iou_cost",
    "cosine_cost",
    "normalize",
]

# Norm tolerance the Embedding type guarantees after construction.
UNIT_NORM_ATOL = 1e-6
# Below this norm a vector carries no usable direction.
ZERO_NORM_EPS = 1e-12


class EmbeddingDimensionError(ValueError):
    """Two embeddings from incompatible spaces were combined."""


class ZeroNormError(ValueError):
    """A vector with (near-)zero norm cannot be normalized."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left (x, y), width w > 0, height h > 0."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"BBox.{name} must be finite, got {v!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"BBox requires positive size, got w={self.w}, h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def cx(self) -> float:
        return self.x + 0.5 * self.w

    @property
    def cy(self) -> float:
        return self.y + 0.5 * self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def to_cxcywh(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h], dtype=np.float64)

    @staticmethod
    def from_cxcywh(cx: float, cy: float, w: float, h: float) -> "BBox":
        return BBox(cx - 0.5 * w, cy - 0.5 * h, w, h)

    def as_tlwh(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)


@dataclass(frozen=True)
class ConfidenceTriple:
    """Detector quality scores: overall s_det, class s_cls, localization s_loc.

    All three live in [0, 1]. Detectors that factor confidence report
    s_det = s_cls * s_loc, but the triple does not enforce that coupling.
    """

    s_det: float
    s_cls: float
    s_loc: float

    def __post_init__(self) -> None:
        for name in ("s_det", "s_cls", "s_loc"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise ValueError(f"ConfidenceTriple.{name} must be in [0, 1], got {v!r}")


@dataclass(frozen=True)
class Embedding:
    """Unit-norm appearance vector (float64, read-only).

    Construct via ``normalize`` unless the values are already unit length
    within UNIT_NORM_ATOL.
    """

    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ValueError(f"Embedding must be a non-empty 1-D vector, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("Embedding values must be finite")
        n = float(np.linalg.norm(v))
        if abs(n - 1.0) > UNIT_NORM_ATOL:
            raise ValueError(f"Embedding norm must be 1 within {UNIT_NORM_ATOL}, got {n!r}")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class Detection:
    """One detector output: frame number, box, confidence triple, optional embedding."""

    frame: int
    box: BBox
    conf: ConfidenceTriple
    embedding: Optional[Embedding] = None

    def __post_init__(self) -> None:
        if self.frame < 0:
            raise ValueError(f"Detection.frame must be non-negative, got {self.frame}")


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes, in [0, 1]."""
    ix = min(a.x2, b.x2) - max(a.x, b.x)
    iy = min(a.y2, b.y2) - max(a.y, b.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    # rounded endpoints can push the ratio a few ulps past 1 for identical boxes
    return min(1.0, inter / (a.area + b.area - inter))


def iou_cost(a: BBox, b: BBox) -> float:
    """Overlap cost 1 - iou, in [0, 1]; 0 means identical boxes."""
    return 1.0 - iou(a, b)


def cosine_cost(a: Embedding, b: Embedding) -> float:
    """Appearance cost: 1 - cosine similarity, clamped to [0, 1].

    Embeddings are unit norm, so similarity is a plain dot product. Raises
    EmbeddingDimensionError when the vectors live in different spaces.
    """
    if a.dim != b.dim:
        raise EmbeddingDimensionError(
            f"embedding dimensions differ: {a.dim} vs {b.dim}"
        )
    c = 1.0 - float(np.dot(a.values, b.values))
    return min(1.0, max(0.0, c))


def normalize(values: np.ndarray) -> Embedding:
    """Scale a raw vector to unit length and wrap it as an Embedding.

    Raises ZeroNormError when the norm is below ZERO_NORM_EPS.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    n = float(np.linalg.norm(v))
    if n < ZERO_NORM_EPS:
        raise ZeroNormError(f"cannot normalize vector with norm {n!r}")
    return Embedding(v / n)
