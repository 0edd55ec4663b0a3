"""Batch cost-matrix kernels: numba-jitted hot path with a pure-numpy fallback.

The association stage rebuilds an N x M cost matrix every frame (pairwise
box overlap plus embedding dot products), which is where tracking spends
its time. Both backends compute identical float64 math; the numba path
just runs the loops natively.

Backend selection:
    ADAPTRACK_BACKEND=numpy   force the numpy fallback
    ADAPTRACK_BACKEND=numba   force numba (raises if numba is unavailable)
    unset                     numba when importable, numpy otherwise

``set_backend`` overrides the environment choice at runtime (tests and the
benchmark harness use it); ``get_backend`` reports the active one.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba as nb

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    NUMBA_AVAILABLE = False

__all__ = [
    "NUMBA_AVAILABLE",
    "get_backend",
    "set_backend",
    "iou_cost_matrix",
    "cosine_cost_matrix",
    "fused_cost_matrix",
    "warmup",
]

_ENV_VAR = "ADAPTRACK_BACKEND"
_override: str | None = None


def _env_backend() -> str:
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError(f"{_ENV_VAR}=numba but numba is not importable")
        return "numba"
    if choice:
        raise ValueError(f"unknown {_ENV_VAR} value {choice!r}; use 'numba' or 'numpy'")
    return "numba" if NUMBA_AVAILABLE else "numpy"


def get_backend() -> str:
    """Active backend name: 'numba' or 'numpy'."""
    return _override if _override is not None else _env_backend()


def set_backend(name: str | None) -> None:
    """Force a backend ('numba'/'numpy'), or None to fall back to the env flag."""
    global _override
    if name is None:
        _override = None
        return
    name = name.lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba backend requested but numba is not importable")
    _override = name


# ---------------------------------------------------------------------------
# pure numpy implementations
# ---------------------------------------------------------------------------


def _iou_cost_matrix_numpy(dets: np.ndarray, trks: np.ndarray) -> np.ndarray:
    n, m = dets.shape[0], trks.shape[0]
    if n == 0 or m == 0:
        return np.ones((n, m), dtype=np.float64)
    dx1 = dets[:, 0:1]
    dy1 = dets[:, 1:2]
    dx2 = dx1 + dets[:, 2:3]
    dy2 = dy1 + dets[:, 3:4]
    tx1 = trks[None, :, 0]
    ty1 = trks[None, :, 1]
    tx2 = tx1 + trks[None, :, 2]
    ty2 = ty1 + trks[None, :, 3]
    iw = np.minimum(dx2, tx2) - np.maximum(dx1, tx1)
    ih = np.minimum(dy2, ty2) - np.maximum(dy1, ty1)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    areas = dets[:, 2:3] * dets[:, 3:4] + (trks[None, :, 2] * trks[None, :, 3])
    # identical boxes can overshoot IoU 1 by a few ulps; keep costs at 0
    return np.maximum(0.0, 1.0 - inter / (areas - inter))


def _cosine_cost_matrix_numpy(d_emb: np.ndarray, t_emb: np.ndarray) -> np.ndarray:
    return np.clip(1.0 - d_emb @ t_emb.T, 0.0, 1.0)


def _fused_cost_matrix_numpy(
    dets: np.ndarray,
    trks: np.ndarray,
    d_emb: np.ndarray,
    t_emb: np.ndarray,
    d_has: np.ndarray,
    t_has: np.ndarray,
    w_loc: np.ndarray,
    w_det: np.ndarray,
) -> np.ndarray:
    geo = _iou_cost_matrix_numpy(dets, trks)
    if d_emb.shape[1] == 0:
        app = np.ones_like(geo)
    else:
        app = _cosine_cost_matrix_numpy(d_emb, t_emb)
        # pairs lacking an embedding on either side pay the worst case
        app = np.where(d_has[:, None] & t_has[None, :], app, 1.0)
    return geo * w_loc[:, None] + app * w_det[:, None]


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if NUMBA_AVAILABLE:

    @nb.njit(cache=True)
    def _iou_cost_matrix_numba(dets, trks):  # pragma: no cover - numba path
        """Pairwise 1 - IoU.

        Args:
            dets: (N, 4) float64 boxes as (x, y, w, h)
            trks: (M, 4) float64 boxes as (x, y, w, h)

        Returns:
            (N, M) float64 cost matrix.
        """
        n = dets.shape[0]
        m = trks.shape[0]
        out = np.ones((n, m), dtype=np.float64)
        for i in range(n):
            dx1 = dets[i, 0]
            dy1 = dets[i, 1]
            dx2 = dx1 + dets[i, 2]
            dy2 = dy1 + dets[i, 3]
            da = dets[i, 2] * dets[i, 3]
            for j in range(m):
                iw = min(dx2, trks[j, 0] + trks[j, 2]) - max(dx1, trks[j, 0])
                if iw <= 0.0:
                    continue
                ih = min(dy2, trks[j, 1] + trks[j, 3]) - max(dy1, trks[j, 1])
                if ih <= 0.0:
                    continue
                inter = iw * ih
                union = da + trks[j, 2] * trks[j, 3] - inter
                c = 1.0 - inter / union
                out[i, j] = c if c > 0.0 else 0.0
        return out

    @nb.njit(cache=True)
    def _cosine_cost_matrix_numba(d_emb, t_emb):  # pragma: no cover - numba path
        """Pairwise clamp(1 - <a, b>, 0, 1) over unit-norm rows.

        The dot products go through BLAS, same as the numpy path; a scalar
        loop would be an order of magnitude slower here.

        Args:
            d_emb: (N, D) float64
            t_emb: (M, D) float64

        Returns:
            (N, M) float64 cost matrix.
        """
        n = d_emb.shape[0]
        m = t_emb.shape[0]
        if d_emb.shape[1] == 0:
            return np.ones((n, m), dtype=np.float64)
        sim = np.dot(d_emb, t_emb.T)
        out = np.empty((n, m), dtype=np.float64)
        for i in range(n):
            for j in range(m):
                c = 1.0 - sim[i, j]
                if c < 0.0:
                    c = 0.0
                elif c > 1.0:
                    c = 1.0
                out[i, j] = c
        return out

    @nb.njit(cache=True)
    def _fused_cost_matrix_numba(
        dets, trks, d_emb, t_emb, d_has, t_has, w_loc, w_det
    ):  # pragma: no cover - numba path
        """Confidence-weighted fusion: geo * w_loc[i] + app * w_det[i].

        The appearance term falls back to its worst case 1.0 whenever either
        side of a pair has no embedding (d_has/t_has False).
        """
        n = dets.shape[0]
        m = trks.shape[0]
        d = d_emb.shape[1]
        # one BLAS matmul beats n*m scalar dot loops by a wide margin
        if d > 0:
            sim = np.dot(d_emb, t_emb.T)
        else:
            sim = np.zeros((n, m), dtype=np.float64)
        out = np.empty((n, m), dtype=np.float64)
        for i in range(n):
            dx1 = dets[i, 0]
            dy1 = dets[i, 1]
            dx2 = dx1 + dets[i, 2]
            dy2 = dy1 + dets[i, 3]
            da = dets[i, 2] * dets[i, 3]
            for j in range(m):
                geo = 1.0
                iw = min(dx2, trks[j, 0] + trks[j, 2]) - max(dx1, trks[j, 0])
                if iw > 0.0:
                    ih = min(dy2, trks[j, 1] + trks[j, 3]) - max(dy1, trks[j, 1])
                    if ih > 0.0:
                        inter = iw * ih
                        geo = 1.0 - inter / (da + trks[j, 2] * trks[j, 3] - inter)
                        if geo < 0.0:
                            geo = 0.0
                app = 1.0
                if d > 0 and d_has[i] and t_has[j]:
                    app = 1.0 - sim[i, j]
                    if app < 0.0:
                        app = 0.0
                    elif app > 1.0:
                        app = 1.0
                out[i, j] = geo * w_loc[i] + app * w_det[i]
        return out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _as_f64(a: np.ndarray, cols: int) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2 or out.shape[1] != cols:
        raise ValueError(f"expected (n, {cols}) array, got shape {out.shape}")
    return out


def iou_cost_matrix(det_boxes: np.ndarray, trk_boxes: np.ndarray) -> np.ndarray:
    """(N, M) matrix of 1 - IoU between (x, y, w, h) box rows."""
    d = _as_f64(det_boxes, 4)
    t = _as_f64(trk_boxes, 4)
    if get_backend() == "numba":
        return _iou_cost_matrix_numba(d, t)
    return _iou_cost_matrix_numpy(d, t)


def cosine_cost_matrix(det_emb: np.ndarray, trk_emb: np.ndarray) -> np.ndarray:
    """(N, M) matrix of clamped cosine costs between unit-norm embedding rows."""
    d = np.ascontiguousarray(det_emb, dtype=np.float64)
    t = np.ascontiguousarray(trk_emb, dtype=np.float64)
    if d.ndim != 2 or t.ndim != 2 or d.shape[1] != t.shape[1]:
        raise ValueError(f"incompatible embedding shapes {d.shape} vs {t.shape}")
    if get_backend() == "numba":
        return _cosine_cost_matrix_numba(d, t)
    return _cosine_cost_matrix_numpy(d, t)


def fused_cost_matrix(
    det_boxes: np.ndarray,
    trk_boxes: np.ndarray,
    det_emb: np.ndarray,
    trk_emb: np.ndarray,
    det_has_emb: np.ndarray,
    trk_has_emb: np.ndarray,
    w_loc: np.ndarray,
    w_det: np.ndarray,
) -> np.ndarray:
    """Full per-frame cost matrix: overlap term weighted per-detection by w_loc,
    appearance term by w_det, worst-case appearance for embedding-less pairs.

    Embedding matrices must always be 2-D; pass (n, 0) and all-False flags when
    a side carries no embeddings at all.
    """
    d = _as_f64(det_boxes, 4)
    t = _as_f64(trk_boxes, 4)
    de = np.ascontiguousarray(det_emb, dtype=np.float64)
    te = np.ascontiguousarray(trk_emb, dtype=np.float64)
    if de.ndim != 2 or te.ndim != 2 or de.shape[1] != te.shape[1]:
        raise ValueError(f"incompatible embedding shapes {de.shape} vs {te.shape}")
    dh = np.ascontiguousarray(det_has_emb, dtype=np.bool_)
    th = np.ascontiguousarray(trk_has_emb, dtype=np.bool_)
    wl = np.ascontiguousarray(w_loc, dtype=np.float64)
    wd = np.ascontiguousarray(w_det, dtype=np.float64)
    if not (dh.shape[0] == wl.shape[0] == wd.shape[0] == d.shape[0]):
        raise ValueError("per-detection arrays disagree on N")
    if th.shape[0] != t.shape[0]:
        raise ValueError("per-track flag array disagrees on M")
    if get_backend() == "numba":
        return _fused_cost_matrix_numba(d, t, de, te, dh, th, wl, wd)
    return _fused_cost_matrix_numpy(d, t, de, te, dh, th, wl, wd)


def warmup() -> None:
    """Trigger JIT compilation of the numba kernels on tiny inputs."""
    if not NUMBA_AVAILABLE:
        return
    boxes = np.array([[0.0, 0.0, 5.0, 5.0]])
    emb = np.array([[1.0, 0.0]])
    flags = np.array([True])
    ones = np.array([1.0])
    _iou_cost_matrix_numba(boxes, boxes)
    _cosine_cost_matrix_numba(emb, emb)
    _fused_cost_matrix_numba(boxes, boxes, emb, emb, flags, flags, ones, ones)
