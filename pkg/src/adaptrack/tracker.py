"""Track lifecycle management: the per-frame engine tying all stages together.

Each step predicts every live track forward, matches detections via the
three-level cascade, conditions matched tracks on their detections with
confidence-adaptive measurement noise, refreshes appearance features through
the quality-gated EMA, and books unmatched tracks through the lifecycle:

    New      -> Tracked (after n_init post-birth matches) or Removed (missed)
    Tracked  -> Lost    (missed)
    Lost     -> Tracked (re-acquired) or Removed (missed > n_max frames)

Only Tracked tracks are emitted. New tracks are born from unmatched
high-confidence detections; births on the very first processed frame start
confirmed so reporting covers the sequence from frame one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Optional, Sequence

from .appearance import FeatureUpdatePolicy, select_alpha, update_feature
from .association import CascadeConfig, TrackSnapshot, run_cascade
from .core import BBox, Detection, Embedding
from .kalman import (
    KalmanState,
    NoiseConfig,
    adaptive_factor,
    initiate,
    predict,
    state_box,
    update,
)
from .state import TrackState

__all__ = [
    "TrackState",
    "TrackerConfig",
    "Track",
    "TrackRow",
    "Tracker",
    "FrameOrderError",
    "run_sequence",
]

# Optional replacement for the measurement-noise rule, used by the ablation
# harness; same signature as adaptive_factor.
AlphaFn = Callable[[float, int, int, float], float]


class FrameOrderError(ValueError):
    """Frames were fed out of order; the input stream is corrupted."""


@dataclass(frozen=True)
class TrackerConfig:
    """Complete tracker parameterization.

    acmn_enabled toggles the adaptive measurement-noise rule (off = plain
    Kalman updates), acm_enabled the confidence weighting of the fused cost
    (off = unweighted sum). n_init is how many post-birth matches confirm a
    mid-sequence track.
    """

    noise: NoiseConfig = field(default_factory=NoiseConfig)
    cascade: CascadeConfig = field(default_factory=CascadeConfig)
    feature: FeatureUpdatePolicy = field(default_factory=FeatureUpdatePolicy)
    n_init: int = 1
    acmn_enabled: bool = True
    acm_enabled: bool = True

    def __post_init__(self) -> None:
        if self.n_init < 1:
            raise ValueError(f"n_init must be >= 1, got {self.n_init}")


class Track:
    """One trajectory's mutable bookkeeping (internal to a Tracker)."""

    __slots__ = ("track_id", "state", "kf", "feature", "n_lost", "hits", "last_s_det")

    def __init__(
        self,
        track_id: int,
        state: TrackState,
        kf: KalmanState,
        feature: Optional[Embedding],
        last_s_det: float,
    ) -> None:
        self.track_id = track_id
        self.state = state
        self.kf = kf
        self.feature = feature
        self.n_lost = 0
        self.hits = 0
        self.last_s_det = last_s_det

    @property
    def box(self) -> BBox:
        return state_box(self.kf)


class TrackRow(NamedTuple):
    """One emitted output row."""

    frame: int
    track_id: int
    box: BBox
    score: float


class Tracker:
    """Stateful per-sequence engine; feed frames in strictly increasing order.

    Instances are independent: concurrent sequences each get their own
    Tracker. ``alpha_override`` swaps the measurement-noise rule (ablation
    use); when None, the configured rule applies.
    """

    def __init__(self, cfg: TrackerConfig, alpha_override: Optional[AlphaFn] = None) -> None:
        self.cfg = cfg
        self._alpha_override = alpha_override
        self._tracks: list[Track] = []
        self._next_id = 1
        self._last_frame: Optional[int] = None

    @property
    def tracks(self) -> tuple[Track, ...]:
        """Live tracks, read-only view (ascending id order)."""
        return tuple(self._tracks)

    def _measurement_alpha(self, s_det: float, n_lost: int) -> float:
        noise = self.cfg.noise
        if self._alpha_override is not None:
            return self._alpha_override(s_det, n_lost, noise.n_max, noise.th_det)
        if not self.cfg.acmn_enabled:
            return 1.0
        return adaptive_factor(s_det, n_lost, noise.n_max, noise.th_det)

    def step(self, frame: int, detections: Sequence[Detection]) -> list[TrackRow]:
        """Process one frame's detections; returns the confirmed track rows."""
        if self._last_frame is not None and frame <= self._last_frame:
            raise FrameOrderError(
                f"frame {frame} not after previous frame {self._last_frame}"
            )
        for d in detections:
            if d.frame != frame:
                raise ValueError(
                    f"detection carries frame {d.frame}, step is processing frame {frame}"
                )
        first_frame = self._last_frame is None
        self._last_frame = frame
        cfg = self.cfg

        for t in self._tracks:
            t.kf = predict(t.kf, cfg.noise)

        snaps = [TrackSnapshot(t.box, t.feature, t.state) for t in self._tracks]
        result = run_cascade(
            detections, snaps, cfg.cascade, confidence_weighted=cfg.acm_enabled
        )

        for di, tj in result.matches:
            det = detections[di]
            tr = self._tracks[tj]
            alpha = self._measurement_alpha(det.conf.s_det, tr.n_lost)
            tr.kf = update(tr.kf, det.box, alpha, cfg.noise)
            if det.embedding is not None:
                if tr.feature is None:
                    # first embedding seen by this track: adopt it verbatim
                    tr.feature = det.embedding
                else:
                    blend = select_alpha(det.conf, cfg.feature)
                    tr.feature = update_feature(tr.feature, det.embedding, blend)
            tr.last_s_det = det.conf.s_det
            tr.hits += 1
            if tr.state == TrackState.Lost:
                tr.state = TrackState.Tracked
                tr.n_lost = 0
            elif tr.state == TrackState.New and tr.hits >= cfg.n_init:
                tr.state = TrackState.Tracked

        for tj in result.unmatched_tracks:
            tr = self._tracks[tj]
            if tr.state == TrackState.New:
                tr.state = TrackState.Removed
            elif tr.state == TrackState.Tracked:
                tr.state = TrackState.Lost
                tr.n_lost = 1
            elif tr.state == TrackState.Lost:
                tr.n_lost += 1
            if tr.state == TrackState.Lost and tr.n_lost > cfg.noise.n_max:
                tr.state = TrackState.Removed

        for di in result.unmatched_high_detections:
            det = detections[di]
            self._tracks.append(
                Track(
                    track_id=self._next_id,
                    state=TrackState.Tracked if first_frame else TrackState.New,
                    kf=initiate(det.box, cfg.noise),
                    feature=det.embedding,
                    last_s_det=det.conf.s_det,
                )
            )
            self._next_id += 1

        self._tracks = [t for t in self._tracks if t.state != TrackState.Removed]

        return [
            TrackRow(frame, t.track_id, t.box, t.last_s_det)
            for t in self._tracks
            if t.state == TrackState.Tracked
        ]


def run_sequence(
    detections_by_frame: Mapping[int, Sequence[Detection]],
    cfg: TrackerConfig,
    frame_count: Optional[int] = None,
    alpha_override: Optional[AlphaFn] = None,
) -> list[TrackRow]:
    """Track one whole sequence and return every emitted row.

    Steps through every frame from 1 to the last (empty frames included, so
    loss counting sees real time), not just frames that carry detections.
    frame_count extends or pins the range end when the tail of the sequence
    has no detections.
    """
    keys = sorted(detections_by_frame)
    if keys and keys[0] < 0:
        raise ValueError(f"frame numbers must be non-negative, got {keys[0]}")
    end = max(keys) if keys else 0
    if frame_count is not None:
        if frame_count < 1:
            raise ValueError(f"frame_count must be >= 1, got {frame_count}")
        if end > frame_count:
            raise ValueError(
                f"stream contains frame {end} beyond frame_count {frame_count}"
            )
        end = frame_count
    start = min(1, keys[0]) if keys else 1
    tracker = Tracker(cfg, alpha_override)
    rows: list[TrackRow] = []
    for frame in range(start, end + 1):
        rows.extend(tracker.step(frame, list(detections_by_frame.get(frame, ()))))
    return rows
