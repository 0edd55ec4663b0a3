"""Non-interactive rendering of track results to image files.

Draws result boxes (colored per track id, labeled) and optional ground
truth (gray outlines) either on blank canvases or on supplied background
frames named by frame number.
"""

from __future__ import annotations

import colorsys
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from PIL import Image, ImageDraw

from .core import BBox

__all__ = ["id_color", "render_tracks"]

_BACKGROUND = (24, 26, 30)
_GT_COLOR = (128, 128, 128)


def id_color(track_id: int) -> tuple[int, int, int]:
    """Stable, well-spread RGB color for a track id (golden-angle hues)."""
    hue = (track_id * 0.618033988749895) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.65, 0.95)
    return int(r * 255), int(g * 255), int(b * 255)


def _background(frames_dir: Optional[Path], frame: int, size: tuple[int, int]) -> Image.Image:
    if frames_dir is not None:
        for pattern in (f"{frame:06d}.png", f"{frame:06d}.jpg", f"{frame}.png", f"{frame}.jpg"):
            candidate = frames_dir / pattern
            if candidate.exists():
                return Image.open(candidate).convert("RGB")
    return Image.new("RGB", size, _BACKGROUND)


def render_tracks(
    results: Mapping[int, Sequence[tuple[int, BBox, float]]],
    out_dir: Union[str, Path],
    arena: tuple[int, int] = (1920, 1080),
    ground_truth: Optional[Mapping[int, Sequence[tuple[int, BBox]]]] = None,
    frames_dir: Optional[Union[str, Path]] = None,
    every: int = 1,
) -> list[Path]:
    """Write one PNG per rendered frame; returns the written paths.

    Frames are the union of result and ground-truth frames, thinned by
    ``every``. Canvas size is ``arena`` unless a background frame supplies
    its own.
    """
    if every < 1:
        raise ValueError(f"every must be >= 1, got {every}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fdir = Path(frames_dir) if frames_dir is not None else None

    frames = sorted(set(results) | set(ground_truth or {}))
    written: list[Path] = []
    for frame in frames[::every]:
        img = _background(fdir, frame, arena)
        draw = ImageDraw.Draw(img)
        if ground_truth:
            for _, box in ground_truth.get(frame, ()):
                draw.rectangle([box.x, box.y, box.x2, box.y2], outline=_GT_COLOR, width=1)
        for tid, box, _ in results.get(frame, ()):
            color = id_color(tid)
            draw.rectangle([box.x, box.y, box.x2, box.y2], outline=color, width=3)
            label = str(tid)
            tx, ty = box.x, max(box.y - 12, 0)
            tw = 7 * len(label) + 4
            draw.rectangle([tx, ty, tx + tw, ty + 12], fill=color)
            draw.text((tx + 2, ty), label, fill=(0, 0, 0))
        path = out / f"frame_{frame:06d}.png"
        img.save(path)
        written.append(path)
    return written
