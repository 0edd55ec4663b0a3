"""Small builders shared across the test modules."""

import numpy as np

from adaptrack import BBox, ConfidenceTriple, Detection, Embedding


def unit(*values: float) -> Embedding:
    """Embedding from raw components, normalized."""
    v = np.asarray(values, dtype=np.float64)
    return Embedding(v / np.linalg.norm(v))


def make_det(
    frame: int,
    x: float,
    y: float,
    w: float = 10.0,
    h: float = 10.0,
    s_det: float = 0.9,
    s_cls: float | None = None,
    s_loc: float | None = None,
    embedding: Embedding | None = None,
) -> Detection:
    conf = ConfidenceTriple(
        s_det=s_det,
        s_cls=s_det if s_cls is None else s_cls,
        s_loc=s_det if s_loc is None else s_loc,
    )
    return Detection(frame, BBox(x, y, w, h), conf, embedding)


def random_boxes(rng: np.random.Generator, n: int, span: float = 100.0) -> list[BBox]:
    out = []
    for _ in range(n):
        x, y = rng.uniform(0, span, size=2)
        w, h = rng.uniform(5, 40, size=2)
        out.append(BBox(float(x), float(y), float(w), float(h)))
    return out


def random_unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    v = rng.normal(size=(n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
