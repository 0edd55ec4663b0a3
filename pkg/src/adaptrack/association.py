"""Confidence-weighted cost fusion and the three-level matching cascade.

The pairing cost between a detection and a track prediction is

    cost = (1 - IoU) * s_loc + (1 - cos_sim) * s_det

with both confidence weights taken from the detection: a well-localized
detection makes the geometric term authoritative, a high-confidence one
makes the appearance term authoritative, and a weak detection shrinks both
terms so it only wins matches nothing better claims. Pairs lacking an
embedding on either side pay the worst-case appearance term 1.0.

Matching runs in three levels per frame, each an exact min-cost assignment
followed by cost and IoU gates:

    1. high-confidence detections vs confirmed tracks (Tracked + Lost)
    2. low-confidence band vs still-unmatched Tracked tracks
    3. leftover high-confidence detections vs New (unconfirmed) tracks

Detections scoring below the low band are discarded outright.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.optimize

from . import kernels
from .core import BBox, Detection, Embedding, iou
from .core import iou_cost as _scalar_iou_cost
from .core import cosine_cost as _scalar_cosine_cost
from .state import TrackState

__all__ = [
    "CascadeConfig",
    "CostMatrix",
    "AssignmentResult",
    "TrackSnapshot",
    "CascadeResult",
    "fused_cost",
    "build_cost_matrix",
    "solve_assignment",
    "gate_by_iou",
    "run_cascade",
]

# Upper bound on any fused cost entry given weights in [0, 1].
_COST_CEIL = 2.0


@dataclass(frozen=True)
class CascadeConfig:
    """Banding thresholds and gates for the matching cascade."""

    th_high: float = 0.6
    th_low: float = 0.1
    iou_min: float = 0.1
    max_cost: float = 1.4

    def __post_init__(self) -> None:
        if not 0.0 <= self.th_low < self.th_high <= 1.0:
            raise ValueError(
                f"need 0 <= th_low < th_high <= 1, got {self.th_low}, {self.th_high}"
            )
        if not 0.0 <= self.iou_min <= 1.0:
            raise ValueError(f"iou_min must be in [0, 1], got {self.iou_min}")
        if self.max_cost <= 0.0:
            raise ValueError(f"max_cost must be positive, got {self.max_cost}")


@dataclass(frozen=True)
class CostMatrix:
    """Validated fused-cost matrix: finite, entries in [0, 2]."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"cost matrix must be 2-D, got shape {v.shape}")
        if v.size and not np.all(np.isfinite(v)):
            raise ValueError("cost matrix entries must be finite")
        if v.size and (v.min() < -1e-9 or v.max() > _COST_CEIL + 1e-9):
            raise ValueError(
                f"cost entries out of [0, {_COST_CEIL}]: min={v.min()}, max={v.max()}"
            )
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class AssignmentResult:
    """One-to-one matches plus leftovers, in the caller's index space."""

    matches: tuple[tuple[int, int], ...]
    unmatched_detections: tuple[int, ...]
    unmatched_tracks: tuple[int, ...]


@dataclass(frozen=True)
class TrackSnapshot:
    """What association needs to know about one live track."""

    box: BBox
    feature: Optional[Embedding]
    state: TrackState


@dataclass(frozen=True)
class CascadeResult:
    """Union of the three level results, globally consistent.

    matches/unmatched sets use original detection and track indices.
    unmatched_high_detections are the high-confidence leftovers that a
    tracker may promote to new tracks; discarded_detections fell below
    the low band and took no part in matching.
    """

    matches: tuple[tuple[int, int], ...]
    unmatched_detections: tuple[int, ...]
    unmatched_high_detections: tuple[int, ...]
    discarded_detections: tuple[int, ...]
    unmatched_tracks: tuple[int, ...]
    level_results: tuple[AssignmentResult, AssignmentResult, AssignmentResult]


def fused_cost(
    det: Detection,
    track_box: BBox,
    track_feature: Optional[Embedding],
    confidence_weighted: bool = True,
) -> float:
    """Scalar reference for one detection-track pair (the batch kernels must agree)."""
    geo = _scalar_iou_cost(det.box, track_box)
    if det.embedding is not None and track_feature is not None:
        app = _scalar_cosine_cost(det.embedding, track_feature)
    else:
        app = 1.0
    if confidence_weighted:
        return geo * det.conf.s_loc + app * det.conf.s_det
    return geo + app


def build_cost_matrix(
    detections: Sequence[Detection],
    tracks: Sequence[TrackSnapshot],
    confidence_weighted: bool = True,
) -> CostMatrix:
    """Fused costs for every detection-track pair via the batch kernels."""
    n, m = len(detections), len(tracks)
    if n == 0 or m == 0:
        return CostMatrix(np.zeros((n, m)))
    d_boxes = np.stack([d.box.as_tlwh() for d in detections])
    t_boxes = np.stack([t.box.as_tlwh() for t in tracks])
    dim = 0
    for d in detections:
        if d.embedding is not None:
            dim = d.embedding.dim
            break
    if dim == 0:
        for t in tracks:
            if t.feature is not None:
                dim = t.feature.dim
                break
    d_emb = np.zeros((n, dim))
    t_emb = np.zeros((m, dim))
    d_has = np.zeros(n, dtype=bool)
    t_has = np.zeros(m, dtype=bool)
    for i, d in enumerate(detections):
        if d.embedding is not None:
            d_emb[i] = d.embedding.values
            d_has[i] = True
    for j, t in enumerate(tracks):
        if t.feature is not None:
            t_emb[j] = t.feature.values
            t_has[j] = True
    if confidence_weighted:
        w_loc = np.array([d.conf.s_loc for d in detections])
        w_det = np.array([d.conf.s_det for d in detections])
    else:
        w_loc = np.ones(n)
        w_det = np.ones(n)
    values = kernels.fused_cost_matrix(
        d_boxes, t_boxes, d_emb, t_emb, d_has, t_has, w_loc, w_det
    )
    return CostMatrix(values)


def solve_assignment(
    costs: Union[CostMatrix, np.ndarray], max_cost: float = np.inf
) -> AssignmentResult:
    """Exact minimum-total-cost one-to-one assignment on a rectangular matrix.

    All min(N, M) pairs are assigned at minimum total cost, then any pair
    costing more than max_cost is demoted to unmatched on both sides.
    """
    v = costs.values if isinstance(costs, CostMatrix) else np.asarray(costs, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {v.shape}")
    if v.size and not np.all(np.isfinite(v)):
        raise ValueError("cost matrix entries must be finite")
    n, m = v.shape
    if n == 0 or m == 0:
        return AssignmentResult((), tuple(range(n)), tuple(range(m)))
    rows, cols = scipy.optimize.linear_sum_assignment(v)
    matches = []
    for i, j in zip(rows, cols):
        if v[i, j] <= max_cost:
            matches.append((int(i), int(j)))
    matched_d = {i for i, _ in matches}
    matched_t = {j for _, j in matches}
    return AssignmentResult(
        tuple(matches),
        tuple(i for i in range(n) if i not in matched_d),
        tuple(j for j in range(m) if j not in matched_t),
    )


def gate_by_iou(
    result: AssignmentResult,
    detections: Sequence[Detection],
    tracks: Sequence[TrackSnapshot],
    iou_min: float,
) -> AssignmentResult:
    """Demote matches whose plain box IoU falls below iou_min.

    Appearance similarity alone must not glue together boxes that no longer
    overlap; this is the spatial sanity gate applied after assignment.
    """
    kept = []
    dropped_d = []
    dropped_t = []
    for i, j in result.matches:
        if iou(detections[i].box, tracks[j].box) < iou_min:
            dropped_d.append(i)
            dropped_t.append(j)
        else:
            kept.append((i, j))
    return AssignmentResult(
        tuple(kept),
        tuple(sorted((*result.unmatched_detections, *dropped_d))),
        tuple(sorted((*result.unmatched_tracks, *dropped_t))),
    )


def _match_level(
    det_idx: list[int],
    trk_idx: list[int],
    detections: Sequence[Detection],
    tracks: Sequence[TrackSnapshot],
    cfg: CascadeConfig,
    confidence_weighted: bool,
) -> AssignmentResult:
    """Solve one cascade level over candidate subsets, in original indices."""
    sub_d = [detections[i] for i in det_idx]
    sub_t = [tracks[j] for j in trk_idx]
    costs = build_cost_matrix(sub_d, sub_t, confidence_weighted)
    local = solve_assignment(costs, cfg.max_cost)
    local = gate_by_iou(local, sub_d, sub_t, cfg.iou_min)
    return AssignmentResult(
        tuple((det_idx[i], trk_idx[j]) for i, j in local.matches),
        tuple(det_idx[i] for i in local.unmatched_detections),
        tuple(trk_idx[j] for j in local.unmatched_tracks),
    )


def run_cascade(
    detections: Sequence[Detection],
    tracks: Sequence[TrackSnapshot],
    cfg: CascadeConfig,
    confidence_weighted: bool = True,
) -> CascadeResult:
    """Run the three matching levels and merge their results.

    No detection or track appears in more than one match; every index ends
    up in exactly one of matched / unmatched / discarded.
    """
    high = [i for i, d in enumerate(detections) if d.conf.s_det >= cfg.th_high]
    low = [
        i
        for i, d in enumerate(detections)
        if cfg.th_low <= d.conf.s_det < cfg.th_high
    ]
    discarded = tuple(
        i for i, d in enumerate(detections) if d.conf.s_det < cfg.th_low
    )

    confirmed = [
        j for j, t in enumerate(tracks) if t.state in (TrackState.Tracked, TrackState.Lost)
    ]
    fresh = [j for j, t in enumerate(tracks) if t.state == TrackState.New]

    lvl1 = _match_level(high, confirmed, detections, tracks, cfg, confidence_weighted)

    # the low band may only continue actively tracked tracks
    pool2 = [j for j in lvl1.unmatched_tracks if tracks[j].state == TrackState.Tracked]
    lvl2 = _match_level(low, pool2, detections, tracks, cfg, confidence_weighted)

    lvl3 = _match_level(
        list(lvl1.unmatched_detections), fresh, detections, tracks, cfg, confidence_weighted
    )

    matches = lvl1.matches + lvl2.matches + lvl3.matches
    matched_d = {i for i, _ in matches}
    matched_t = {j for _, j in matches}
    unmatched_high = tuple(i for i in high if i not in matched_d)
    unmatched = tuple(
        i for i in range(len(detections)) if i not in matched_d and i not in discarded
    )
    unmatched_tracks = tuple(j for j in range(len(tracks)) if j not in matched_t)
    return CascadeResult(
        matches=matches,
        unmatched_detections=unmatched,
        unmatched_high_detections=unmatched_high,
        discarded_detections=discarded,
        unmatched_tracks=unmatched_tracks,
        level_results=(lvl1, lvl2, lvl3),
    )
