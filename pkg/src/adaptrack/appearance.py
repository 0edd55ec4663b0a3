"""Quality-gated exponential moving average of track appearance features.

A track keeps one unit-norm feature vector, blended with each matched
detection's embedding: e <- alpha * e_prev + (1 - alpha) * f, renormalized.
The closer alpha is to 1, the less the new sample counts.

Three policies for choosing alpha per match:
    ema  fixed alpha (plain smoothing, no quality gate)
    da   alpha rises toward 1 as overall detection confidence falls
    sda  alpha rises toward 1 as class and localization quality fall,
         with the two deficits weighted 4:1

da/sda make noisy crops (occlusions, bad boxes) barely touch the stored
feature while clean crops refresh it fastest, keeping alpha in [c, 1].
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import ConfidenceTriple, Embedding, EmbeddingDimensionError

__all__ = [
    "FeatureUpdatePolicy",
    "alpha_da",
    "alpha_sda",
    "update_feature",
    "select_alpha",
]

# Blends with a norm below this carry no direction; keep the old feature.
_DEGENERATE_BLEND_EPS = 1e-12

_MODES = ("ema", "da", "sda")


def _check_unit(name: str, v: float) -> None:
    if not (math.isfinite(v) and 0.0 <= v <= 1.0):
        raise ValueError(f"{name} must be in [0, 1], got {v!r}")


def _check_threshold(name: str, v: float) -> None:
    if not (math.isfinite(v) and 0.0 < v < 1.0):
        raise ValueError(f"{name} must be in (0, 1), got {v!r}")


@dataclass(frozen=True)
class FeatureUpdatePolicy:
    """Which alpha rule to apply and its parameters.

    c is the floor shared by da/sda (the fastest allowed refresh);
    alpha_ema only matters in ema mode. The sda deficit weights are
    derived from c: class deficit gets 4(1-c)/5, localization (1-c)/5.
    """

    mode: str = "sda"
    alpha_ema: float = 0.9
    c: float = 0.95
    th_det: float = 0.6
    th_cls: float = 0.75
    th_loc: float = 0.55

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        _check_unit("alpha_ema", self.alpha_ema)
        if not (math.isfinite(self.c) and 0.0 < self.c <= 1.0):
            raise ValueError(f"c must be in (0, 1], got {self.c!r}")
        _check_threshold("th_det", self.th_det)
        _check_threshold("th_cls", self.th_cls)
        _check_threshold("th_loc", self.th_loc)

    @property
    def c_cls(self) -> float:
        return 4.0 * (1.0 - self.c) / 5.0

    @property
    def c_loc(self) -> float:
        return (1.0 - self.c) / 5.0


def _deficit(score: float, threshold: float) -> float:
    # 1 at/below the threshold, 0 at perfect score, clamped to [0, 1]
    return min(1.0, max(0.0, 1.0 - (score - threshold) / (1.0 - threshold)))


def alpha_da(s_det: float, c: float = 0.95, th_det: float = 0.6) -> float:
    """Blend weight gated by overall detection confidence: c at s_det = 1,
    1 (no update) at or below th_det."""
    _check_unit("s_det", s_det)
    if not (math.isfinite(c) and 0.0 < c <= 1.0):
        raise ValueError(f"c must be in (0, 1], got {c!r}")
    _check_threshold("th_det", th_det)
    return c + (1.0 - c) * _deficit(s_det, th_det)


def alpha_sda(
    s_cls: float,
    s_loc: float,
    c: float = 0.95,
    th_cls: float = 0.75,
    th_loc: float = 0.55,
) -> float:
    """Blend weight gated by class and localization quality separately.

    alpha = c + c_cls * cls_deficit + c_loc * loc_deficit with the deficit
    terms clamped to [0, 1], so alpha stays in [c, 1]: perfect scores give
    the fastest refresh c, scores at/below their thresholds freeze the
    feature entirely.
    """
    _check_unit("s_cls", s_cls)
    _check_unit("s_loc", s_loc)
    if not (math.isfinite(c) and 0.0 < c <= 1.0):
        raise ValueError(f"c must be in (0, 1], got {c!r}")
    _check_threshold("th_cls", th_cls)
    _check_threshold("th_loc", th_loc)
    c_cls = 4.0 * (1.0 - c) / 5.0
    c_loc = (1.0 - c) / 5.0
    return c + c_cls * _deficit(s_cls, th_cls) + c_loc * _deficit(s_loc, th_loc)


def update_feature(prev: Embedding, new: Embedding, alpha: float) -> Embedding:
    """EMA blend of two unit features, renormalized to unit length.

    alpha = 1 returns prev unchanged (the same object). A near-zero blend
    (opposite vectors at alpha = 0.5) cannot be normalized; the previous
    feature is kept and a RuntimeWarning is emitted.
    """
    if not (math.isfinite(alpha) and 0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must be in [0, 1], got {alpha!r}")
    if prev.dim != new.dim:
        raise EmbeddingDimensionError(
            f"embedding dimensions differ: {prev.dim} vs {new.dim}"
        )
    if alpha == 1.0:
        return prev
    blend = alpha * prev.values + (1.0 - alpha) * new.values
    norm = float(np.linalg.norm(blend))
    if norm < _DEGENERATE_BLEND_EPS:
        warnings.warn(
            "degenerate feature blend (norm ~ 0); keeping previous feature",
            RuntimeWarning,
            stacklevel=2,
        )
        return prev
    return Embedding(blend / norm)


def select_alpha(conf: ConfidenceTriple, policy: FeatureUpdatePolicy) -> float:
    """Blend weight for one matched detection under the configured policy."""
    if policy.mode == "ema":
        return policy.alpha_ema
    if policy.mode == "da":
        return alpha_da(conf.s_det, policy.c, policy.th_det)
    return alpha_sda(conf.s_cls, conf.s_loc, policy.c, policy.th_cls, policy.th_loc)
