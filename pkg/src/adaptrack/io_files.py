"""File formats and run configuration.

Detection files are CSV with the mandatory header
``frame,x,y,w,h,s_det,s_cls,s_loc``; an optional binary sidecar next to the
CSV (same stem, ``.emb`` suffix) carries one embedding per CSV row:

    magic b"LGEB" | u32 LE version (=1) | u32 LE dim D | D float32 LE per row

Track results use the plain MOT line format
``frame,id,x,y,w,h,conf,-1,-1,-1`` (two-decimal floats, frame-major then
id-major), ground truth is CSV with header ``frame,id,x,y,w,h``, and run
configuration is a key=value text file where unknown keys are rejected.

All parse errors carry 1-based line (or record) numbers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .appearance import FeatureUpdatePolicy
from .association import CascadeConfig
from .core import (
    UNIT_NORM_ATOL,
    ZERO_NORM_EPS,
    BBox,
    ConfidenceTriple,
    Detection,
    Embedding,
)
from .kalman import NoiseConfig
from .tracker import TrackerConfig, TrackRow

__all__ = [
    "DetectionFileError",
    "ConfigError",
    "EMB_MAGIC",
    "EMB_VERSION",
    "DETECTION_HEADER",
    "GT_HEADER",
    "read_detections",
    "write_detections",
    "read_tracks",
    "write_tracks",
    "read_ground_truth",
    "write_ground_truth",
    "RunConfig",
    "CONFIG_DEFAULTS",
    "parse_kv_text",
    "load_run_config",
    "default_config_text",
]

EMB_MAGIC = b"LGEB"
EMB_VERSION = 1
DETECTION_HEADER = "frame,x,y,w,h,s_det,s_cls,s_loc"
GT_HEADER = "frame,id,x,y,w,h"


class DetectionFileError(ValueError):
    """A data file (detections, sidecar, results, ground truth) is malformed."""


class ConfigError(ValueError):
    """A configuration file or override is malformed."""


def _fmt(v: float) -> str:
    # repr gives the shortest string that parses back to the same float
    return repr(float(v))


# ---------------------------------------------------------------------------
# detections + embedding sidecar
# ---------------------------------------------------------------------------


def _sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".emb")


def _read_sidecar(path: Path, n_rows: int) -> list[Embedding]:
    raw = path.read_bytes()
    if len(raw) < 12:
        raise DetectionFileError(f"{path}: sidecar too short for its header")
    if raw[:4] != EMB_MAGIC:
        raise DetectionFileError(f"{path}: bad magic {raw[:4]!r}, expected {EMB_MAGIC!r}")
    version, dim = struct.unpack_from("<II", raw, 4)
    if version != EMB_VERSION:
        raise DetectionFileError(f"{path}: unsupported sidecar version {version}")
    if dim < 1:
        raise DetectionFileError(f"{path}: embedding dimension must be >= 1, got {dim}")
    payload = raw[12:]
    if len(payload) != n_rows * dim * 4:
        raise DetectionFileError(
            f"{path}: payload holds {len(payload) // (dim * 4)} records "
            f"of dim {dim}, CSV has {n_rows} rows"
        )
    flat = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    out = []
    for k in range(n_rows):
        v = flat[k * dim : (k + 1) * dim]
        norm = float(np.linalg.norm(v))
        if norm < ZERO_NORM_EPS:
            raise DetectionFileError(f"{path}: record {k + 1} has zero norm")
        # already-unit records are kept bit-exact so rewrites round-trip
        if abs(norm - 1.0) > UNIT_NORM_ATOL:
            v = v / norm
        out.append(Embedding(v))
    return out


def read_detections(path: Union[str, Path]) -> dict[int, list[Detection]]:
    """Load a detection CSV (and its embedding sidecar when present).

    Returns detections grouped by frame, file order preserved within a
    frame. Raises DetectionFileError with a 1-based line number on any
    malformed row, out-of-range confidence, frame-order violation, or
    sidecar mismatch.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != DETECTION_HEADER:
        got = lines[0].strip() if lines else "<empty file>"
        raise DetectionFileError(
            f"{path}: line 1: expected header {DETECTION_HEADER!r}, got {got!r}"
        )
    rows: list[tuple[int, BBox, ConfidenceTriple]] = []
    prev_frame = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise DetectionFileError(
                f"{path}: line {lineno}: expected 8 fields, got {len(parts)}"
            )
        try:
            frame = int(parts[0])
            if frame < 0:
                raise ValueError(f"frame must be non-negative, got {frame}")
            box = BBox(*(float(p) for p in parts[1:5]))
            conf = ConfidenceTriple(*(float(p) for p in parts[5:8]))
        except ValueError as exc:
            raise DetectionFileError(f"{path}: line {lineno}: {exc}") from exc
        if prev_frame is not None and frame < prev_frame:
            raise DetectionFileError(
                f"{path}: line {lineno}: frame {frame} after frame {prev_frame}; "
                "rows must be sorted by frame"
            )
        prev_frame = frame
        rows.append((frame, box, conf))

    sidecar = _sidecar_path(path)
    embeddings: Optional[list[Embedding]] = None
    if sidecar.exists():
        embeddings = _read_sidecar(sidecar, len(rows))

    out: dict[int, list[Detection]] = {}
    for k, (frame, box, conf) in enumerate(rows):
        emb = embeddings[k] if embeddings is not None else None
        out.setdefault(frame, []).append(Detection(frame, box, conf, emb))
    return out


def write_detections(
    path: Union[str, Path], detections_by_frame: Mapping[int, Sequence[Detection]]
) -> None:
    """Write a detection CSV; a sidecar is written when embeddings are present.

    Either every detection carries an embedding or none does (a partial
    sidecar could not be aligned with the CSV rows).
    """
    path = Path(path)
    flat: list[Detection] = []
    for frame in sorted(detections_by_frame):
        flat.extend(detections_by_frame[frame])
    n_with = sum(1 for d in flat if d.embedding is not None)
    if n_with not in (0, len(flat)):
        raise DetectionFileError(
            f"{n_with} of {len(flat)} detections carry embeddings; need all or none"
        )
    lines = [DETECTION_HEADER]
    for d in flat:
        c = d.conf
        lines.append(
            f"{d.frame},{_fmt(d.box.x)},{_fmt(d.box.y)},{_fmt(d.box.w)},{_fmt(d.box.h)},"
            f"{_fmt(c.s_det)},{_fmt(c.s_cls)},{_fmt(c.s_loc)}"
        )
    path.write_text("\n".join(lines) + "\n")

    sidecar = _sidecar_path(path)
    if n_with == 0:
        if sidecar.exists():
            sidecar.unlink()
        return
    dim = flat[0].embedding.dim  # type: ignore[union-attr]
    buf = bytearray(EMB_MAGIC)
    buf += struct.pack("<II", EMB_VERSION, dim)
    for d in flat:
        emb = d.embedding
        assert emb is not None
        if emb.dim != dim:
            raise DetectionFileError(
                f"embedding dimension mismatch: {emb.dim} vs {dim}"
            )
        buf += emb.values.astype("<f4").tobytes()
    sidecar.write_bytes(bytes(buf))


# ---------------------------------------------------------------------------
# track results (MOT lines) and ground truth
# ---------------------------------------------------------------------------


def write_tracks(path: Union[str, Path], rows: Sequence[TrackRow]) -> None:
    """Write result rows as MOT lines, frame-major then id-major."""
    ordered = sorted(rows, key=lambda r: (r.frame, r.track_id))
    lines = []
    for r in ordered:
        b = r.box
        lines.append(
            f"{r.frame},{r.track_id},{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},"
            f"{r.score:.2f},-1,-1,-1"
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_tracks(path: Union[str, Path]) -> dict[int, list[tuple[int, BBox, float]]]:
    """Parse MOT result lines into frame -> [(track id, box, conf)]."""
    path = Path(path)
    out: dict[int, list[tuple[int, BBox, float]]] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 10:
            raise DetectionFileError(
                f"{path}: line {lineno}: expected 10 fields, got {len(parts)}"
            )
        try:
            frame = int(parts[0])
            tid = int(parts[1])
            box = BBox(*(float(p) for p in parts[2:6]))
            conf = float(parts[6])
        except ValueError as exc:
            raise DetectionFileError(f"{path}: line {lineno}: {exc}") from exc
        out.setdefault(frame, []).append((tid, box, conf))
    return out


def write_ground_truth(
    path: Union[str, Path], boxes_by_frame: Mapping[int, Sequence[tuple[int, BBox]]]
) -> None:
    """Write ground-truth CSV: header then frame,id,x,y,w,h rows."""
    lines = [GT_HEADER]
    for frame in sorted(boxes_by_frame):
        for oid, b in sorted(boxes_by_frame[frame], key=lambda t: t[0]):
            lines.append(
                f"{frame},{oid},{_fmt(b.x)},{_fmt(b.y)},{_fmt(b.w)},{_fmt(b.h)}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def read_ground_truth(path: Union[str, Path]) -> dict[int, list[tuple[int, BBox]]]:
    """Parse a ground-truth CSV into frame -> [(object id, box)]."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != GT_HEADER:
        got = lines[0].strip() if lines else "<empty file>"
        raise DetectionFileError(
            f"{path}: line 1: expected header {GT_HEADER!r}, got {got!r}"
        )
    out: dict[int, list[tuple[int, BBox]]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise DetectionFileError(
                f"{path}: line {lineno}: expected 6 fields, got {len(parts)}"
            )
        try:
            frame = int(parts[0])
            oid = int(parts[1])
            box = BBox(*(float(p) for p in parts[2:6]))
        except ValueError as exc:
            raise DetectionFileError(f"{path}: line {lineno}: {exc}") from exc
        out.setdefault(frame, []).append((oid, box))
    return out


# ---------------------------------------------------------------------------
# run configuration (key=value)
# ---------------------------------------------------------------------------

# key -> (default, type tag, help); single source of truth for the format
CONFIG_DEFAULTS: dict[str, tuple[object, str, str]] = {
    "input": ("", "str", "detection CSV path (CLI --in overrides)"),
    "output": ("", "str", "result file path (CLI --out overrides)"),
    "sigma_pos": (1.0 / 20.0, "float", "process noise std of position/size, relative to box height"),
    "sigma_vel": (1.0 / 160.0, "float", "process noise std of velocities, relative to box height"),
    "sigma_meas": (1.0 / 20.0, "float", "measurement noise std, relative to box height"),
    "th_det": (0.6, "float", "confidence threshold splitting the noise-factor branches"),
    "n_max": (30, "int", "frames a lost track survives before removal"),
    "th_high": (0.6, "float", "high-confidence band threshold (also gates track births)"),
    "th_low": (0.1, "float", "low band floor; weaker detections are discarded"),
    "iou_min": (0.1, "float", "minimum plain IoU for any accepted match"),
    "max_cost": (1.4, "float", "fused-cost ceiling for any accepted match"),
    "feature_mode": ("sda", "str", "appearance update policy: ema, da, or sda"),
    "alpha_ema": (0.9, "float", "fixed blend weight in ema mode"),
    "c": (0.95, "float", "fastest allowed feature refresh in da/sda modes"),
    "th_cls": (0.75, "float", "class-quality threshold in sda mode"),
    "th_loc": (0.55, "float", "localization-quality threshold in sda mode"),
    "n_init": (1, "int", "post-birth matches needed to confirm a mid-sequence track"),
    "acmn_enabled": (True, "bool", "adaptive measurement-noise factor on/off"),
    "acm_enabled": (True, "bool", "confidence-weighted cost fusion on/off"),
}


def parse_kv_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse key=value lines; '#' lines and blanks are skipped.

    Returns raw string values; duplicate keys keep the last occurrence.
    """
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}: line {lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def _coerce(key: str, raw: str, source: str) -> object:
    default, kind, _ = CONFIG_DEFAULTS[key]
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw
    except ValueError as exc:
        raise ConfigError(f"{source}: key {key!r}: {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    """Tracker parameters plus run-level paths, assembled from file + overrides."""

    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    input: Optional[str] = None
    output: Optional[str] = None

    def as_mapping(self) -> dict[str, object]:
        """Flatten back to config keys (round-trips through load_run_config)."""
        t = self.tracker
        return {
            "input": self.input or "",
            "output": self.output or "",
            "sigma_pos": t.noise.sigma_pos,
            "sigma_vel": t.noise.sigma_vel,
            "sigma_meas": t.noise.sigma_meas,
            "th_det": t.noise.th_det,
            "n_max": t.noise.n_max,
            "th_high": t.cascade.th_high,
            "th_low": t.cascade.th_low,
            "iou_min": t.cascade.iou_min,
            "max_cost": t.cascade.max_cost,
            "feature_mode": t.feature.mode,
            "alpha_ema": t.feature.alpha_ema,
            "c": t.feature.c,
            "th_cls": t.feature.th_cls,
            "th_loc": t.feature.th_loc,
            "n_init": t.n_init,
            "acmn_enabled": t.acmn_enabled,
            "acm_enabled": t.acm_enabled,
        }


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Assemble a RunConfig from defaults, an optional file, and overrides.

    Unknown keys are rejected (typo protection); every known key falls back
    to its documented default.
    """
    values = {k: default for k, (default, _, _) in CONFIG_DEFAULTS.items()}
    sources: list[tuple[str, Mapping[str, str]]] = []
    if path is not None:
        p = Path(path)
        sources.append((str(p), parse_kv_text(p.read_text(), source=str(p))))
    if overrides:
        sources.append(("<override>", dict(overrides)))
    for source, mapping in sources:
        for key, raw in mapping.items():
            if key not in CONFIG_DEFAULTS:
                raise ConfigError(f"{source}: unknown key {key!r}")
            values[key] = _coerce(key, str(raw), source)
    try:
        tracker = TrackerConfig(
            noise=NoiseConfig(
                sigma_pos=values["sigma_pos"],  # type: ignore[arg-type]
                sigma_vel=values["sigma_vel"],  # type: ignore[arg-type]
                sigma_meas=values["sigma_meas"],  # type: ignore[arg-type]
                th_det=values["th_det"],  # type: ignore[arg-type]
                n_max=values["n_max"],  # type: ignore[arg-type]
            ),
            cascade=CascadeConfig(
                th_high=values["th_high"],  # type: ignore[arg-type]
                th_low=values["th_low"],  # type: ignore[arg-type]
                iou_min=values["iou_min"],  # type: ignore[arg-type]
                max_cost=values["max_cost"],  # type: ignore[arg-type]
            ),
            feature=FeatureUpdatePolicy(
                mode=values["feature_mode"],  # type: ignore[arg-type]
                alpha_ema=values["alpha_ema"],  # type: ignore[arg-type]
                c=values["c"],  # type: ignore[arg-type]
                th_det=values["th_det"],  # type: ignore[arg-type]
                th_cls=values["th_cls"],  # type: ignore[arg-type]
                th_loc=values["th_loc"],  # type: ignore[arg-type]
            ),
            n_init=values["n_init"],  # type: ignore[arg-type]
            acmn_enabled=values["acmn_enabled"],  # type: ignore[arg-type]
            acm_enabled=values["acm_enabled"],  # type: ignore[arg-type]
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        tracker=tracker,
        input=values["input"] or None,  # type: ignore[arg-type]
        output=values["output"] or None,  # type: ignore[arg-type]
    )


def default_config_text() -> str:
    """Documented key=value text of every default (parses back unchanged)."""
    lines = ["# adaptrack run configuration (key=value; '#' lines are comments)"]
    for key, (default, kind, help_text) in CONFIG_DEFAULTS.items():
        lines.append(f"# {help_text}")
        if kind == "bool":
            rendered = "true" if default else "false"
        elif kind == "float":
            rendered = _fmt(default)  # type: ignore[arg-type]
        else:
            rendered = str(default)
        lines.append(f"{key}={rendered}")
    return "\n".join(lines) + "\n"
