"""Confidence-adaptive multi-object tracking.

Detections in, identity-stable trajectories out. Three ideas carry the
tracker: measurement noise that scales with detection confidence, matching
costs whose motion and appearance terms are weighted by localization and
detection confidence, and appearance features that refresh fastest on the
cleanest crops. A deterministic simulator, CLEAR/IDF1 metrics, and an
ablation harness round out the toolkit.
"""

from .appearance import FeatureUpdatePolicy, alpha_da, alpha_sda, select_alpha, update_feature
from .association import (
    AssignmentResult,
    CascadeConfig,
    CascadeResult,
    CostMatrix,
    TrackSnapshot,
    build_cost_matrix,
    fused_cost,
    gate_by_iou,
    run_cascade,
    solve_assignment,
)
from .core import (
    BBox,
    ConfidenceTriple,
    Detection,
    Embedding,
    EmbeddingDimensionError,
    ZeroNormError,
    cosine_cost,
    iou,
    iou_cost,
    normalize,
)
from .kalman import (
    DegenerateFilterError,
    KalmanState,
    NoiseConfig,
    adaptive_factor,
    initiate,
    predict,
    state_box,
    update,
)
from .metrics import FrameRangeError, MetricsReport, evaluate, rows_by_frame
from .simulate import ConfModel, MotionModel, OcclusionWindow, ScenarioSpec, simulate
from .state import TrackState
from .tracker import FrameOrderError, Track, Tracker, TrackerConfig, TrackRow, run_sequence

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # core
    "BBox", "ConfidenceTriple", "Detection", "Embedding",
    "EmbeddingDimensionError", "ZeroNormError",
    "iou", "iou_cost", "cosine_cost", "normalize",
    # kalman
    "NoiseConfig", "KalmanState", "DegenerateFilterError",
    "adaptive_factor", "initiate", "predict", "update", "state_box",
    # association
    "CascadeConfig", "CostMatrix", "AssignmentResult", "CascadeResult", "TrackSnapshot",
    "fused_cost", "build_cost_matrix", "solve_assignment", "gate_by_iou", "run_cascade",
    # appearance
    "FeatureUpdatePolicy", "alpha_da", "alpha_sda", "update_feature", "select_alpha",
    # tracker
    "TrackState", "TrackerConfig", "Track", "TrackRow", "Tracker",
    "FrameOrderError", "run_sequence",
    # metrics + simulation
    "MetricsReport", "FrameRangeError", "evaluate", "rows_by_frame",
    "ScenarioSpec", "MotionModel", "OcclusionWindow", "ConfModel", "simulate",
]
