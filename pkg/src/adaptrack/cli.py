"""Command-line interface: track, simulate, evaluate, ablate, render."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import click

from .ablation import ablate, format_table
from .io_files import (
    ConfigError,
    DetectionFileError,
    load_run_config,
    read_detections,
    read_ground_truth,
    read_tracks,
    write_detections,
    write_ground_truth,
    write_tracks,
)
from .metrics import evaluate as evaluate_metrics
from .metrics import rows_by_frame
from .render import render_tracks
from .simulate import load_scenario, simulate
from .tracker import run_sequence

_ERRORS = (DetectionFileError, ConfigError, ValueError, OSError)


def _opts_to_mapping(pairs: tuple[str, ...]) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} must be key=value")
        key, _, value = pair.partition("=")
        out[key.strip()] = value.strip()
    return out


@click.group()
def main() -> None:
    """Confidence-adaptive multi-object tracking toolkit."""


@main.command()
@click.option("--in", "input_path", type=click.Path(path_type=Path), default=None,
              help="Detection CSV (embedding sidecar picked up automatically).")
@click.option("--out", "output_path", type=click.Path(path_type=Path), default=None,
              help="Result file to write (MOT lines).")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="key=value run configuration file.")
@click.option("--opt", "opts", multiple=True, metavar="KEY=VALUE",
              help="Override any config key (repeatable).")
@click.option("--frame-count", type=int, default=None,
              help="Process exactly this many frames (default: last detection frame).")
def track(input_path: Optional[Path], output_path: Optional[Path],
          config_path: Optional[Path], opts: tuple[str, ...],
          frame_count: Optional[int]) -> None:
    """Track a detection file and write result rows."""
    try:
        cfg = load_run_config(config_path, _opts_to_mapping(opts))
        src = input_path or (Path(cfg.input) if cfg.input else None)
        dst = output_path or (Path(cfg.output) if cfg.output else None)
        if src is None:
            raise ConfigError("no input: pass --in or set input= in the config")
        if dst is None:
            raise ConfigError("no output: pass --out or set output= in the config")
        detections = read_detections(src)
        rows = run_sequence(detections, cfg.tracker, frame_count=frame_count)
        write_tracks(dst, rows)
    except _ERRORS as exc:
        raise click.ClickException(str(exc)) from exc
    ids = {r.track_id for r in rows}
    click.echo(f"wrote {len(rows)} rows covering {len(ids)} tracks to {dst}")


@main.command()
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="key=value scenario file.")
@click.option("--opt", "opts", multiple=True, metavar="KEY=VALUE",
              help="Override any scenario key (repeatable).")
@click.option("--out-dets", type=click.Path(path_type=Path), required=True,
              help="Detection CSV to write (sidecar written next to it).")
@click.option("--out-gt", type=click.Path(path_type=Path), required=True,
              help="Ground-truth CSV to write.")
def simulate_cmd(scenario_path: Optional[Path], opts: tuple[str, ...],
                 out_dets: Path, out_gt: Path) -> None:
    """Generate a synthetic detection file plus ground truth."""
    try:
        spec = load_scenario(scenario_path, _opts_to_mapping(opts))
        detections, gt = simulate(spec)
        write_detections(out_dets, detections)
        write_ground_truth(out_gt, gt)
    except _ERRORS as exc:
        raise click.ClickException(str(exc)) from exc
    n = sum(len(v) for v in detections.values())
    click.echo(f"wrote {n} detections over {spec.frame_count} frames to {out_dets}")


# ``simulate`` collides with the library function name inside this module
simulate_cmd.name = "simulate"
main.add_command(simulate_cmd, name="simulate")


@main.command()
@click.option("--res", "res_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="Result file (MOT lines).")
@click.option("--gt", "gt_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="Ground-truth CSV.")
@click.option("--iou-threshold", type=float, default=0.5, show_default=True,
              help="Minimum IoU for a hypothesis to cover a ground-truth box.")
def evaluate(res_path: Path, gt_path: Path, iou_threshold: float) -> None:
    """Score a result file against ground truth."""
    try:
        results = {
            frame: [(tid, box) for tid, box, _ in items]
            for frame, items in read_tracks(res_path).items()
        }
        gt = read_ground_truth(gt_path)
        report = evaluate_metrics(results, gt, iou_match_threshold=iou_threshold)
    except _ERRORS as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"mota={report.mota:.6f}")
    click.echo(f"idf1={report.idf1:.6f}")
    click.echo(f"idsw={report.idsw}")
    click.echo(f"fp={report.fp}")
    click.echo(f"fn={report.fn}")
    click.echo(f"gt_count={report.gt_count}")


@main.command()
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="key=value scenario file.")
@click.option("--opt", "opts", multiple=True, metavar="KEY=VALUE",
              help="Override any scenario key (repeatable).")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="Base tracker configuration file.")
@click.option("--tracker-opt", "tracker_opts", multiple=True, metavar="KEY=VALUE",
              help="Override any tracker config key (repeatable).")
@click.option("--seeds", type=int, default=10, show_default=True,
              help="Number of scenario seeds to average over.")
@click.option("--base-seed", type=int, default=0, show_default=True,
              help="First seed; cells use base-seed .. base-seed+seeds-1.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Concurrent cells (results are identical at any job count).")
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help="Also write the table to this TSV file.")
def ablate_cmd(scenario_path: Optional[Path], opts: tuple[str, ...],
               config_path: Optional[Path], tracker_opts: tuple[str, ...],
               seeds: int, base_seed: int, jobs: int, out_path: Optional[Path]) -> None:
    """Run the ablation grid on a scenario and print the table."""
    try:
        spec = load_scenario(scenario_path, _opts_to_mapping(opts))
        base = load_run_config(config_path, _opts_to_mapping(tracker_opts)).tracker
        rows = ablate(spec, base, seeds=range(base_seed, base_seed + seeds), jobs=jobs)
    except _ERRORS as exc:
        raise click.ClickException(str(exc)) from exc
    table = format_table(rows)
    click.echo(table, nl=False)
    if out_path is not None:
        out_path.write_text(table)


ablate_cmd.name = "ablate"
main.add_command(ablate_cmd, name="ablate")


@main.command()
@click.option("--res", "res_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="Result file (MOT lines).")
@click.option("--gt", "gt_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="Optional ground truth to overlay.")
@click.option("--out-dir", type=click.Path(path_type=Path), required=True,
              help="Directory for rendered PNGs.")
@click.option("--arena", default="1920x1080", show_default=True,
              help="Canvas size WxH when no background frames are given.")
@click.option("--frames-dir", type=click.Path(exists=True, path_type=Path), default=None,
              help="Directory of background frames named by frame number.")
@click.option("--every", type=int, default=1, show_default=True,
              help="Render every Nth frame.")
def render(res_path: Path, gt_path: Optional[Path], out_dir: Path,
           arena: str, frames_dir: Optional[Path], every: int) -> None:
    """Draw result boxes (and optional ground truth) to image files."""
    try:
        w, _, h = arena.partition("x")
        size = (int(w), int(h))
        results = read_tracks(res_path)
        gt = read_ground_truth(gt_path) if gt_path is not None else None
        written = render_tracks(results, out_dir, arena=size,
                                ground_truth=gt, frames_dir=frames_dir, every=every)
    except _ERRORS as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {len(written)} images to {out_dir}")


if __name__ == "__main__":
    main()
