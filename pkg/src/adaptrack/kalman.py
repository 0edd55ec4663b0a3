"""Constant-velocity Kalman filter with confidence-adaptive measurement noise.

State is 8-dimensional: box center, size, and their per-frame velocities,
(cx, cy, w, h, vcx, vcy, vw, vh). Process and measurement noise scale with
the current box height, the usual pedestrian-tracking preset.

The adaptive part: the measurement covariance for an update is R * alpha,
where alpha shrinks below 1 for confident detections (trust them more) and
grows above 1 for weak detections and long-lost tracks (trust them less).
``adaptive_factor`` implements that rule; ``update`` accepts any alpha > 0
so callers can disable or replace the rule.

All functions are pure state -> state; KalmanState is an immutable value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import BBox

__all__ = [
    "NoiseConfig",
    "KalmanState",
    "DegenerateFilterError",
    "adaptive_factor",
    "initiate",
    "predict",
    "update",
    "state_box",
]

STATE_DIM = 8
MEAS_DIM = 4

# Velocities get 10x the positional std at track birth: a fresh track knows
# where it is but not where it is going.
_INIT_VEL_FACTOR = 10.0

_F = np.eye(STATE_DIM)
for _i in range(MEAS_DIM):
    _F[_i, _i + MEAS_DIM] = 1.0
_H = np.eye(MEAS_DIM, STATE_DIM)


class DegenerateFilterError(RuntimeError):
    """Innovation covariance could not be factorized; the filter state is unusable."""


@dataclass(frozen=True)
class NoiseConfig:
    """Noise scales (relative to box height) and adaptive-rule parameters.

    sigma_pos/sigma_vel set the process noise of position-size/velocity
    components, sigma_meas the measurement noise. th_det is the confidence
    threshold splitting the two branches of the adaptive rule, n_max the
    lost-frame horizon that saturates its exponent.
    """

    sigma_pos: float = 1.0 / 20.0
    sigma_vel: float = 1.0 / 160.0
    sigma_meas: float = 1.0 / 20.0
    th_det: float = 0.6
    n_max: int = 30

    def __post_init__(self) -> None:
        for name in ("sigma_pos", "sigma_vel", "sigma_meas"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"NoiseConfig.{name} must be positive")
        if not 0.0 < self.th_det < 1.0:
            raise ValueError(f"NoiseConfig.th_det must be in (0, 1), got {self.th_det}")
        if self.n_max < 1:
            raise ValueError(f"NoiseConfig.n_max must be >= 1, got {self.n_max}")


@dataclass(frozen=True)
class KalmanState:
    """Gaussian belief over the 8-dim motion state (read-only arrays)."""

    mean: np.ndarray = field(repr=False)
    covariance: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        m = np.asarray(self.mean, dtype=np.float64)
        p = np.asarray(self.covariance, dtype=np.float64)
        if m.shape != (STATE_DIM,):
            raise ValueError(f"mean must have shape ({STATE_DIM},), got {m.shape}")
        if p.shape != (STATE_DIM, STATE_DIM):
            raise ValueError(
                f"covariance must have shape ({STATE_DIM}, {STATE_DIM}), got {p.shape}"
            )
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(p))):
            raise ValueError("KalmanState requires finite mean and covariance")
        m = m.copy()
        p = p.copy()
        m.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "covariance", p)


def adaptive_factor(s_det: float, n_lost: int, n_max: int, th_det: float) -> float:
    """Measurement-noise scale from detection confidence and loss streak.

    Confident detections (s_det > th_det) scale noise down by th_det/s_det.
    Weak ones scale it up by exp((1 - s_det) * (1.5 - N)) where
    N = max(0.5, n_lost/n_max), so the penalty softens the longer a track
    has coasted (its prediction deserves less authority, not more).
    """
    if not (math.isfinite(s_det) and 0.0 <= s_det <= 1.0):
        raise ValueError(f"s_det must be in [0, 1], got {s_det!r}")
    if n_lost < 0:
        raise ValueError(f"n_lost must be >= 0, got {n_lost}")
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    if not 0.0 < th_det < 1.0:
        raise ValueError(f"th_det must be in (0, 1), got {th_det!r}")
    if s_det > th_det:
        return th_det / s_det
    n = max(0.5, n_lost / n_max)
    return math.exp((1.0 - s_det) * (1.5 - n))


def initiate(box: BBox, cfg: NoiseConfig) -> KalmanState:
    """Fresh track state centered on a measured box, zero velocity."""
    mean = np.zeros(STATE_DIM)
    mean[:MEAS_DIM] = box.to_cxcywh()
    h = max(box.h, 1.0)
    pos_std = cfg.sigma_pos * h
    stds = np.array([pos_std] * MEAS_DIM + [_INIT_VEL_FACTOR * pos_std] * MEAS_DIM)
    return KalmanState(mean, np.diag(stds**2))


def predict(state: KalmanState, cfg: NoiseConfig) -> KalmanState:
    """Advance one frame under constant velocity, inflating uncertainty.

    Process noise is rebuilt from the current height each call so that the
    filter stays scale-aware as the box grows or shrinks.
    """
    h = max(state.mean[3], 1.0)
    q = np.zeros(STATE_DIM)
    q[:MEAS_DIM] = (cfg.sigma_pos * h) ** 2
    q[MEAS_DIM:] = (cfg.sigma_vel * h) ** 2
    mean = _F @ state.mean
    # size velocities can coast a box into degeneracy; keep it a valid box
    mean[2] = max(mean[2], 1.0)
    mean[3] = max(mean[3], 1.0)
    cov = _F @ state.covariance @ _F.T + np.diag(q)
    return KalmanState(mean, cov)


def update(state: KalmanState, box: BBox, alpha: float, cfg: NoiseConfig) -> KalmanState:
    """Condition the belief on a measured box with noise R * alpha.

    alpha = 1 is the textbook update; alpha >> 1 freezes the prior, alpha << 1
    snaps to the measurement. Uses the Joseph stabilized covariance form so the
    posterior stays symmetric positive-definite under extreme alpha.
    """
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise ValueError(f"alpha must be positive and finite, got {alpha!r}")
    h = max(state.mean[3], 1.0)
    r = np.full(MEAS_DIM, (cfg.sigma_meas * h) ** 2) * alpha
    p = state.covariance
    s = _H @ p @ _H.T + np.diag(r)
    try:
        chol = scipy.linalg.cho_factor(s, lower=True, check_finite=False)
        gain = scipy.linalg.cho_solve(chol, (p @ _H.T).T, check_finite=False).T
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise DegenerateFilterError(f"innovation covariance not factorizable: {exc}") from exc
    innovation = box.to_cxcywh() - _H @ state.mean
    mean = state.mean + gain @ innovation
    mean[2] = max(mean[2], 1.0)
    mean[3] = max(mean[3], 1.0)
    a = np.eye(STATE_DIM) - gain @ _H
    cov = a @ p @ a.T + gain @ np.diag(r) @ gain.T
    cov = 0.5 * (cov + cov.T)
    return KalmanState(mean, cov)


def state_box(state: KalmanState) -> BBox:
    """Current belief as a box (sizes clamped to at least one pixel)."""
    cx, cy, w, h = state.mean[:MEAS_DIM]
    return BBox.from_cxcywh(cx, cy, max(w, 1.0), max(h, 1.0))
