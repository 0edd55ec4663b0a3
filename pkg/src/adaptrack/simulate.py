"""Deterministic synthetic scenario generator for tracker evaluation.

Objects move through a rectangular arena under constant velocity (reflecting
off walls) with optional per-frame path jitter. Detections mirror the ground
truth except inside occlusion windows, where a detection is dropped with
probability equal to the occlusion depth and survivors come back degraded:
class score s_cls = visibility = 1 - depth, localization score
s_loc = exp(-|box offset| / sqrt(w*h)) from the jitter actually applied, and
s_det = s_cls * s_loc. Each object owns a fixed unit embedding; detections
emit it with Gaussian noise, renormalized.

Everything derives from one seeded generator, consumed in a fixed order, so
a ScenarioSpec maps to exactly one dataset, byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from .core import BBox, ConfidenceTriple, Detection, Embedding
from .io_files import ConfigError, parse_kv_text

__all__ = [
    "MotionModel",
    "OcclusionWindow",
    "ConfModel",
    "ScenarioSpec",
    "simulate",
    "scenario_from_mapping",
    "load_scenario",
    "SCENARIO_DEFAULTS",
]

# frames over which a ramped occlusion rises from open to fully hidden
_RAMP_FRAMES = 3


@dataclass(frozen=True)
class MotionModel:
    """Per-object speed range (px/frame) and per-frame path jitter std (px)."""

    speed_min: float = 1.0
    speed_max: float = 4.0
    jitter_std: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.speed_min <= self.speed_max:
            raise ValueError(f"need 0 <= speed_min <= speed_max, got {self.speed_min}, {self.speed_max}")
        if self.jitter_std < 0.0:
            raise ValueError(f"jitter_std must be >= 0, got {self.jitter_std}")


@dataclass(frozen=True)
class OcclusionWindow:
    """Frames [start, end] during which one object (1-based id) is occluded.

    profile 'ramp' fades depth in and out over a few frames; 'full' keeps
    depth at 1 for the whole window (every detection dropped).
    """

    obj: int
    start: int
    end: int
    profile: str = "ramp"

    def __post_init__(self) -> None:
        if self.obj < 1:
            raise ValueError(f"obj is a 1-based object id, got {self.obj}")
        if not 1 <= self.start <= self.end:
            raise ValueError(f"need 1 <= start <= end, got {self.start}, {self.end}")
        if self.profile not in ("ramp", "full"):
            raise ValueError(f"profile must be 'ramp' or 'full', got {self.profile!r}")

    def depth(self, frame: int) -> float:
        if frame < self.start or frame > self.end:
            return 0.0
        if self.profile == "full":
            return 1.0
        rise = (frame - self.start + 1) / _RAMP_FRAMES
        fall = (self.end - frame + 1) / _RAMP_FRAMES
        return float(min(1.0, rise, fall))


@dataclass(frozen=True)
class ConfModel:
    """Detector degradation: baseline box noise plus depth-scaled occlusion noise (px)."""

    box_noise_std: float = 0.0
    occl_box_noise_std: float = 4.0

    def __post_init__(self) -> None:
        if self.box_noise_std < 0.0 or self.occl_box_noise_std < 0.0:
            raise ValueError("noise stds must be >= 0")


@dataclass(frozen=True)
class ScenarioSpec:
    """Complete description of one synthetic sequence."""

    seed: int = 0
    n_objects: int = 3
    frame_count: int = 100
    arena: tuple[float, float] = (1000.0, 1000.0)
    motion: MotionModel = field(default_factory=MotionModel)
    occlusions: tuple[OcclusionWindow, ...] = ()
    conf_model: ConfModel = field(default_factory=ConfModel)
    embed_dim: int = 32
    embed_noise_std: float = 0.0
    box_size: tuple[float, float] = (30.0, 60.0)

    def __post_init__(self) -> None:
        if self.n_objects < 1:
            raise ValueError(f"n_objects must be >= 1, got {self.n_objects}")
        if self.frame_count < 1:
            raise ValueError(f"frame_count must be >= 1, got {self.frame_count}")
        if self.arena[0] <= 0 or self.arena[1] <= 0:
            raise ValueError(f"arena must be positive, got {self.arena}")
        if self.embed_dim < 0:
            raise ValueError(f"embed_dim must be >= 0, got {self.embed_dim}")
        if self.embed_noise_std < 0.0:
            raise ValueError(f"embed_noise_std must be >= 0, got {self.embed_noise_std}")
        if not 1.0 <= self.box_size[0] <= self.box_size[1]:
            raise ValueError(f"need 1 <= size_min <= size_max, got {self.box_size}")
        for w in self.occlusions:
            if w.obj > self.n_objects:
                raise ValueError(f"occlusion window references object {w.obj} of {self.n_objects}")
            if w.end > self.frame_count:
                raise ValueError(f"occlusion window ends at {w.end} beyond frame_count {self.frame_count}")


def _reflect(pos: float, vel: float, lo: float, hi: float) -> tuple[float, float]:
    # bounce a center coordinate off the arena walls
    if pos < lo:
        return 2.0 * lo - pos, -vel
    if pos > hi:
        return 2.0 * hi - pos, -vel
    return pos, vel


def simulate(
    spec: ScenarioSpec,
) -> tuple[dict[int, list[Detection]], dict[int, list[tuple[int, BBox]]]]:
    """Generate (detections by frame, ground truth by frame) for a scenario.

    Ground-truth object ids are 1-based. In the noiseless limit (all stds
    zero, no occlusions) detections equal the ground-truth boxes exactly,
    with every confidence 1.0.
    """
    rng = np.random.default_rng(spec.seed)
    aw, ah = spec.arena
    n = spec.n_objects
    m = spec.motion

    sizes = rng.uniform(spec.box_size[0], spec.box_size[1], size=(n, 2))
    # keep whole boxes inside the arena: centers live in the margin-shrunk rect
    margin_x = sizes[:, 0] / 2.0
    margin_y = sizes[:, 1] / 2.0
    cx = rng.uniform(margin_x, np.maximum(margin_x, aw - margin_x))
    cy = rng.uniform(margin_y, np.maximum(margin_y, ah - margin_y))
    speed = rng.uniform(m.speed_min, m.speed_max, size=n)
    angle = rng.uniform(0.0, 2.0 * math.pi, size=n)
    vx = speed * np.cos(angle)
    vy = speed * np.sin(angle)

    base_emb = []
    if spec.embed_dim > 0:
        for _ in range(n):
            v = rng.normal(size=spec.embed_dim)
            base_emb.append(v / np.linalg.norm(v))

    detections: dict[int, list[Detection]] = {}
    ground_truth: dict[int, list[tuple[int, BBox]]] = {}

    for frame in range(1, spec.frame_count + 1):
        det_rows: list[Detection] = []
        gt_rows: list[tuple[int, BBox]] = []
        for k in range(n):
            cx[k] += vx[k]
            cy[k] += vy[k]
            cx[k], vx[k] = _reflect(cx[k], vx[k], margin_x[k], aw - margin_x[k])
            cy[k], vy[k] = _reflect(cy[k], vy[k], margin_y[k], ah - margin_y[k])
            jitter = rng.normal(0.0, m.jitter_std, size=2) if m.jitter_std > 0 else (0.0, 0.0)
            w, h = sizes[k]
            gt_box = BBox.from_cxcywh(cx[k] + jitter[0], cy[k] + jitter[1], w, h)
            gt_rows.append((k + 1, gt_box))

            depth = 0.0
            for win in spec.occlusions:
                if win.obj == k + 1:
                    depth = max(depth, win.depth(frame))

            dropped = rng.uniform() < depth
            noise_std = spec.conf_model.box_noise_std + spec.conf_model.occl_box_noise_std * depth
            offsets = rng.normal(0.0, noise_std, size=4)
            if spec.embed_dim > 0:
                noise = rng.normal(0.0, spec.embed_noise_std, size=spec.embed_dim)
            if dropped:
                continue

            det_box = BBox(
                gt_box.x + offsets[0],
                gt_box.y + offsets[1],
                max(gt_box.w + offsets[2], 1.0),
                max(gt_box.h + offsets[3], 1.0),
            )
            s_cls = min(1.0, max(0.0, 1.0 - depth))
            s_loc = math.exp(-float(np.linalg.norm(offsets)) / math.sqrt(w * h))
            conf = ConfidenceTriple(s_det=s_cls * s_loc, s_cls=s_cls, s_loc=s_loc)
            emb: Optional[Embedding] = None
            if spec.embed_dim > 0:
                v = base_emb[k] + noise
                emb = Embedding(v / np.linalg.norm(v))
            det_rows.append(Detection(frame, det_box, conf, emb))
        detections[frame] = det_rows
        ground_truth[frame] = gt_rows
    return detections, ground_truth


# ---------------------------------------------------------------------------
# key=value scenario files
# ---------------------------------------------------------------------------

SCENARIO_DEFAULTS: dict[str, tuple[object, str, str]] = {
    "seed": (0, "int", "RNG seed; one seed = one dataset"),
    "n_objects": (3, "int", "number of simulated objects"),
    "frame_count": (100, "int", "sequence length in frames"),
    "arena_w": (1000.0, "float", "arena width in px"),
    "arena_h": (1000.0, "float", "arena height in px"),
    "speed_min": (1.0, "float", "minimum object speed, px/frame"),
    "speed_max": (4.0, "float", "maximum object speed, px/frame"),
    "jitter_std": (0.0, "float", "per-frame ground-truth path jitter std, px"),
    "box_size_min": (30.0, "float", "minimum box side, px"),
    "box_size_max": (60.0, "float", "maximum box side, px"),
    "box_noise_std": (0.0, "float", "baseline detector box noise std, px"),
    "occl_box_noise_std": (4.0, "float", "extra box noise std at full occlusion depth, px"),
    "embed_dim": (32, "int", "embedding dimension; 0 disables embeddings"),
    "embed_noise_std": (0.0, "float", "embedding noise std before renormalization"),
    "occlusions": ("", "str", "windows 'obj:start:end[:full]' joined by ';' (obj is 1-based)"),
}


def _parse_occlusions(raw: str) -> tuple[OcclusionWindow, ...]:
    windows = []
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        bits = part.split(":")
        if len(bits) not in (3, 4):
            raise ConfigError(f"occlusion window {part!r} must be obj:start:end[:full]")
        try:
            obj, start, end = int(bits[0]), int(bits[1]), int(bits[2])
        except ValueError as exc:
            raise ConfigError(f"occlusion window {part!r}: {exc}") from exc
        profile = bits[3] if len(bits) == 4 else "ramp"
        try:
            windows.append(OcclusionWindow(obj, start, end, profile))
        except ValueError as exc:
            raise ConfigError(f"occlusion window {part!r}: {exc}") from exc
    return tuple(windows)


def scenario_from_mapping(mapping: Mapping[str, str], source: str = "<scenario>") -> ScenarioSpec:
    """Build a ScenarioSpec from raw key=value strings; unknown keys rejected."""
    values = {k: default for k, (default, _, _) in SCENARIO_DEFAULTS.items()}
    for key, raw in mapping.items():
        if key not in SCENARIO_DEFAULTS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        _, kind, _ = SCENARIO_DEFAULTS[key]
        try:
            if kind == "int":
                values[key] = int(raw)
            elif kind == "float":
                values[key] = float(raw)
            else:
                values[key] = str(raw)
        except ValueError as exc:
            raise ConfigError(f"{source}: key {key!r}: {exc}") from exc
    try:
        return ScenarioSpec(
            seed=values["seed"],  # type: ignore[arg-type]
            n_objects=values["n_objects"],  # type: ignore[arg-type]
            frame_count=values["frame_count"],  # type: ignore[arg-type]
            arena=(values["arena_w"], values["arena_h"]),  # type: ignore[arg-type]
            motion=MotionModel(
                speed_min=values["speed_min"],  # type: ignore[arg-type]
                speed_max=values["speed_max"],  # type: ignore[arg-type]
                jitter_std=values["jitter_std"],  # type: ignore[arg-type]
            ),
            occlusions=_parse_occlusions(values["occlusions"]),  # type: ignore[arg-type]
            conf_model=ConfModel(
                box_noise_std=values["box_noise_std"],  # type: ignore[arg-type]
                occl_box_noise_std=values["occl_box_noise_std"],  # type: ignore[arg-type]
            ),
            embed_dim=values["embed_dim"],  # type: ignore[arg-type]
            embed_noise_std=values["embed_noise_std"],  # type: ignore[arg-type]
            box_size=(values["box_size_min"], values["box_size_max"]),  # type: ignore[arg-type]
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_scenario(path, overrides: Optional[Mapping[str, str]] = None) -> ScenarioSpec:
    """Load a scenario file and apply overrides on top."""
    from pathlib import Path

    mapping: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        mapping.update(parse_kv_text(p.read_text(), source=str(p)))
    if overrides:
        mapping.update(overrides)
    return scenario_from_mapping(mapping)


def with_seed(spec: ScenarioSpec, seed: int) -> ScenarioSpec:
    """Same scenario, different seed (ablation cells vary only the seed)."""
    return replace(spec, seed=seed)
