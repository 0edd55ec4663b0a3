"""CLEAR tracking metrics (MOTA, FP, FN, identity switches) plus IDF1.

Per-frame matching between ground truth and hypotheses follows the CLEAR
continuity protocol: a ground-truth object first tries to keep its most
recent hypothesis id (if that hypothesis is present and still overlaps at
the threshold), carry-over claims resolved in ascending gt-id order; the
remainder is matched by an exact minimum-cost assignment on 1 - IoU over
pairs meeting the IoU threshold, maximum cardinality first. A switch is
counted whenever a ground-truth object is matched to a different id than
its most recent one.

IDF1 comes from a single global assignment between ground-truth ids and
hypothesis ids maximizing the number of per-frame overlaps credited to
matched id pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.optimize

from .core import BBox, iou
from .tracker import TrackRow

__all__ = [
    "MetricsReport",
    "FrameRangeError",
    "evaluate",
    "rows_by_frame",
]

# Dominates any achievable sum of valid 1-IoU costs, so the assignment
# maximizes the number of threshold-passing matches before minimizing cost.
_INVALID_COST = 1e9


class FrameRangeError(ValueError):
    """Result frames fall outside the ground-truth frame range."""


@dataclass(frozen=True)
class MetricsReport:
    """CLEAR + identity summary. mota is exactly 1 - (fn + fp + idsw) / gt_count."""

    mota: float
    idf1: float
    idsw: int
    fp: int
    fn: int
    gt_count: int


def rows_by_frame(rows: Sequence[TrackRow]) -> dict[int, list[tuple[int, BBox]]]:
    """Regroup tracker output rows into the frame-indexed evaluate() input."""
    out: dict[int, list[tuple[int, BBox]]] = {}
    for r in rows:
        out.setdefault(r.frame, []).append((r.track_id, r.box))
    return out


def _frame_items(
    mapping: Mapping[int, Sequence[tuple[int, BBox]]], frame: int, label: str
) -> list[tuple[int, BBox]]:
    items = sorted(mapping.get(frame, ()), key=lambda t: t[0])
    ids = [i for i, _ in items]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate {label} ids in frame {frame}: {ids}")
    return items


def evaluate(
    results: Mapping[int, Sequence[tuple[int, BBox]]],
    ground_truth: Mapping[int, Sequence[tuple[int, BBox]]],
    iou_match_threshold: float = 0.5,
) -> MetricsReport:
    """Score tracking results against ground truth.

    Both inputs map frame -> [(id, box)]. Result frames must lie within the
    ground-truth frame range; an empty ground truth is unusable.
    """
    if not 0.0 < iou_match_threshold <= 1.0:
        raise ValueError(f"iou_match_threshold must be in (0, 1], got {iou_match_threshold}")
    if not ground_truth:
        raise ValueError("ground truth is empty; nothing to evaluate against")
    gt_lo, gt_hi = min(ground_truth), max(ground_truth)
    if results:
        r_lo, r_hi = min(results), max(results)
        if r_lo < gt_lo or r_hi > gt_hi:
            raise FrameRangeError(
                f"result frames [{r_lo}, {r_hi}] outside ground-truth range [{gt_lo}, {gt_hi}]"
            )

    fp = fn = idsw = gt_count = 0
    res_count = 0
    last_match: dict[int, int] = {}
    # (gt id, hyp id) -> frames with overlap >= threshold, for IDF1
    overlap_frames: dict[tuple[int, int], int] = {}

    for frame in sorted(set(ground_truth) | set(results)):
        gt_items = _frame_items(ground_truth, frame, "ground-truth")
        hyp_items = _frame_items(results, frame, "result")
        gt_count += len(gt_items)
        res_count += len(hyp_items)

        ious = np.empty((len(gt_items), len(hyp_items)))
        for gi, (_, gbox) in enumerate(gt_items):
            for hi, (_, hbox) in enumerate(hyp_items):
                v = iou(gbox, hbox)
                ious[gi, hi] = v
                if v >= iou_match_threshold:
                    key = (gt_items[gi][0], hyp_items[hi][0])
                    overlap_frames[key] = overlap_frames.get(key, 0) + 1

        hyp_index = {hid: hi for hi, (hid, _) in enumerate(hyp_items)}
        matched_g: set[int] = set()
        matched_h: set[int] = set()
        n_matched = 0

        # continuity first: keep the most recent correspondence when it still holds
        for gi, (gid, _) in enumerate(gt_items):
            known = last_match.get(gid)
            if known is None or known not in hyp_index:
                continue
            hi = hyp_index[known]
            if hi in matched_h or ious[gi, hi] < iou_match_threshold:
                continue
            matched_g.add(gi)
            matched_h.add(hi)
            n_matched += 1

        free_g = [gi for gi in range(len(gt_items)) if gi not in matched_g]
        free_h = [hi for hi in range(len(hyp_items)) if hi not in matched_h]
        if free_g and free_h:
            costs = np.full((len(free_g), len(free_h)), _INVALID_COST)
            for a, gi in enumerate(free_g):
                for b, hi in enumerate(free_h):
                    if ious[gi, hi] >= iou_match_threshold:
                        costs[a, b] = 1.0 - ious[gi, hi]
            rows, cols = scipy.optimize.linear_sum_assignment(costs)
            for a, b in zip(rows, cols):
                gi, hi = free_g[a], free_h[b]
                if ious[gi, hi] < iou_match_threshold:
                    continue
                gid = gt_items[gi][0]
                hid = hyp_items[hi][0]
                prev = last_match.get(gid)
                if prev is not None and prev != hid:
                    idsw += 1
                last_match[gid] = hid
                n_matched += 1

        fp += len(hyp_items) - n_matched
        fn += len(gt_items) - n_matched

    if gt_count == 0:
        raise ValueError("ground truth holds no boxes; nothing to evaluate against")
    idtp = _best_id_assignment(overlap_frames)
    denom = gt_count + res_count
    idf1 = 2.0 * idtp / denom
    mota = 1.0 - (fn + fp + idsw) / gt_count
    return MetricsReport(mota=mota, idf1=idf1, idsw=idsw, fp=fp, fn=fn, gt_count=gt_count)


def _best_id_assignment(overlap_frames: Mapping[tuple[int, int], int]) -> int:
    """Maximum total overlap frames over a one-to-one gt-id/hyp-id matching."""
    if not overlap_frames:
        return 0
    gt_ids = sorted({g for g, _ in overlap_frames})
    hyp_ids = sorted({h for _, h in overlap_frames})
    gains = np.zeros((len(gt_ids), len(hyp_ids)))
    g_index = {g: i for i, g in enumerate(gt_ids)}
    h_index = {h: j for j, h in enumerate(hyp_ids)}
    for (g, h), count in overlap_frames.items():
        gains[g_index[g], h_index[h]] = count
    rows, cols = scipy.optimize.linear_sum_assignment(gains, maximize=True)
    return int(gains[rows, cols].sum())
