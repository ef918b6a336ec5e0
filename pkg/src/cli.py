"""
Command-line entry point: ``fixcam track | evaluate | generate | benchmark``.

Exit codes: 0 success, 2 usage, 3 config error, 4 I/O error, 5 data error,
6 undefined score.
"""

import argparse
import math
import sys
from collections.abc import Callable, Sequence
from enum import IntEnum
from pathlib import Path

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from .benchmark import embedding_stage, run_benchmark, scaling_sweep
from .config import CLI_KEYS, ConfigAudit, TrackerConfig, load_config
from .errors import (
    ConfigError,
    DataError,
    FixcamError,
    FrameImageError,
    InputError,
    MalformedRecordError,
)
from .log import configure_logging
from .mot.metrics import DEFAULT_IOU_THRESHOLD, evaluate
from .mot.mot_io import (
    IMAGE_DIR,
    DetectionRecord,
    load_frame_image,
    read_detections,
    read_fingerprint_sidecar,
    read_ground_truth,
    read_sequence_info,
    records_to_detections,
    write_results,
)
from .mot.synth import PRESETS, ScenarioSpec, benchmark_scenario, generate, load_scenario, write_scene
from .tracking.base import FrameDetections
from .tracking.fingerprint import HistogramEmbedder
from .tracking.geometry import ImageGeometry
from .tracking.pipeline import (
    FingerprintStage,
    FrameSource,
    GeometryOnlyStage,
    PatchEmbeddingStage,
    SidecarStage,
    TrackingPipeline,
    contiguous_frames,
)
from .tracking.timing import StageTimer


class ExitCode(IntEnum):
    OK = 0
    USAGE = 2
    CONFIG = 3
    IO = 4
    DATA = 5
    UNDEFINED_SCORE = 6


def _tuning_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", type=Path, help="TOML config file")
    parent.add_argument("--alpha", type=float, help="Weight of normalized center distance")
    parent.add_argument("--beta", type=float, help="Weight of fingerprint cost")
    parent.add_argument("--gate", type=float, help="Max accepted assignment cost")
    parent.add_argument("--timeout", type=int, help="Frames without update before a track is deleted")
    parent.add_argument("--buffer", type=int, help="Frames per fingerprint batch")
    parent.add_argument("--min-conf", dest="min_conf", type=float, help="Minimum detection confidence")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fixcam", description="Online multi-object tracking for static cameras"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    tuning = _tuning_flags()

    track = sub.add_parser("track", parents=[tuning], help="Track a detection stream")
    source = track.add_mutually_exclusive_group(required=True)
    source.add_argument("--sequence", type=Path, help="MOT sequence directory")
    source.add_argument("--detections", type=Path, help="Detection file")
    track.add_argument("--images", type=Path, help="Frame image directory")
    track.add_argument("--fingerprints", type=Path, help="Precomputed fingerprint file")
    track.add_argument("--output", type=Path, required=True, help="Result file to write")
    track.add_argument(
        "--seed",
        type=int,
        default=0,
        help="Run seed, logged with the run; tracking itself is deterministic",
    )
    track.set_defaults(handler=cmd_track)

    ev = sub.add_parser("evaluate", help="Score a result file against ground truth")
    ev.add_argument("--gt", type=Path, required=True, help="Ground-truth file")
    ev.add_argument("--results", type=Path, required=True, help="Result file")
    ev.add_argument("--iou-threshold", type=float, default=DEFAULT_IOU_THRESHOLD)
    ev.set_defaults(handler=cmd_evaluate)

    gen = sub.add_parser("generate", help="Write a synthetic sequence")
    scenario = gen.add_mutually_exclusive_group(required=True)
    scenario.add_argument("--scenario", type=Path, help="TOML scenario file")
    scenario.add_argument("--preset", choices=sorted(PRESETS), help="Built-in scenario")
    gen.add_argument("--output", type=Path, required=True, help="Sequence directory to create")
    gen.add_argument("--seed", type=int, help="Override the scenario seed")
    gen.add_argument("--no-images", action="store_true", help="Skip frame images")
    gen.set_defaults(handler=cmd_generate)

    bench = sub.add_parser("benchmark", parents=[tuning], help="Measure throughput")
    bsource = bench.add_mutually_exclusive_group()
    bsource.add_argument("--scenario", type=Path, help="TOML scenario file")
    bsource.add_argument("--preset", choices=sorted(PRESETS), help="Built-in scenario")
    bsource.add_argument("--sequence", type=Path, help="MOT sequence directory with images")
    bench.add_argument("--frames", type=int, default=4479, help="Frames of the default scene")
    bench.add_argument(
        "--detections-per-frame", type=int, default=50, help="Detections of the default scene"
    )
    bench.add_argument("--seed", type=int, help="Scenario seed")
    bench.add_argument("--repetitions", type=int, default=3)
    bench.add_argument("--sweep", action="store_true", help="Also run the embedder scaling sweep")
    bench.add_argument("--sweep-frames", type=int, default=120)
    bench.set_defaults(handler=cmd_benchmark)
    return parser


def _load_config(args: argparse.Namespace) -> tuple[TrackerConfig, ConfigAudit]:
    overrides = {dotted: getattr(args, flag, None) for flag, dotted in CLI_KEYS.items()}
    return load_config(args.config, overrides)


def infer_geometry(per_frame: dict[int, list[DetectionRecord]]) -> ImageGeometry:
    """Smallest frame that contains every detection."""
    records = [r for recs in per_frame.values() for r in recs]
    width = max((r.x + r.w for r in records), default=1.0)
    height = max((r.y + r.h for r in records), default=1.0)
    geometry = ImageGeometry(width=max(math.ceil(width), 1), height=max(math.ceil(height), 1))
    logger.warning(
        "no sequence info; image size inferred from detections as {}x{}",
        geometry.width,
        geometry.height,
    )
    return geometry


def image_source(image_dir: Path) -> FrameSource:
    """Frame loader that degrades undecodable images to geometry-only frames."""

    def load(frame: int) -> NDArray[np.uint8] | None:
        try:
            return load_frame_image(image_dir, frame)
        except FrameImageError as exc:
            logger.warning("{}; frame {} tracked without fingerprints", exc, frame)
            return None

    return load


def _fingerprint_stage(
    args: argparse.Namespace, config: TrackerConfig, image_dir: Path | None
) -> FingerprintStage:
    if args.fingerprints is not None:
        sidecar = read_fingerprint_sidecar(args.fingerprints)
        if sidecar.dimension != config.fingerprint.dimension:
            raise MalformedRecordError(
                args.fingerprints,
                1,
                None,
                f"fingerprint dimension {sidecar.dimension} does not match configured "
                f"fingerprint.dimension={config.fingerprint.dimension}",
            )
        logger.info("fingerprints of dimension {} from {}", sidecar.dimension, args.fingerprints)
        return SidecarStage(sidecar.table)
    if image_dir is not None and image_dir.is_dir():
        fp = config.fingerprint
        logger.info("fingerprints embedded from images in {}", image_dir)
        return PatchEmbeddingStage(
            HistogramEmbedder.from_config(fp), image_source(image_dir), fp.patch_height, fp.patch_width
        )
    logger.info("no images or fingerprints; geometry-only association")
    return GeometryOnlyStage()


def _sequence_stream(
    sequence: Path | None, detections: Path | None
) -> tuple[list[FrameDetections], ImageGeometry, Path | None]:
    if detections is None:
        if sequence is None:
            raise InputError("give a sequence directory or a detection file")
        detections = sequence / "det" / "det.txt"
    info = read_sequence_info(sequence) if sequence is not None else None
    per_frame = read_detections(detections)
    geometry = info.geometry if info is not None else infer_geometry(per_frame)
    last = max(max(per_frame, default=0), info.seq_length if info is not None else 0)
    frames = list(contiguous_frames(records_to_detections(per_frame), last))
    image_dir = sequence / IMAGE_DIR if sequence is not None else None
    return frames, geometry, image_dir


def cmd_track(args: argparse.Namespace) -> ExitCode:
    config, audit = _load_config(args)
    logger.debug("track run seed {}", args.seed)
    frames, geometry, image_dir = _sequence_stream(args.sequence, args.detections)
    if args.images is not None:
        image_dir = args.images
    stage = _fingerprint_stage(args, config, image_dir)

    timer = StageTimer()
    pipeline = TrackingPipeline(config, geometry, stage, timer)
    results = pipeline.run_sync(frames)
    with timer.measure("write"):
        write_results(args.output, results)

    stats = pipeline.stats
    print(f"frames              {stats.frames}")
    print(f"detections          {stats.detections}")
    print(f"tracks created      {stats.tracks_created}")
    print(f"tracks deleted      {stats.tracks_deleted}")
    print(f"wall seconds        {stats.wall_seconds:.3f}")
    print(f"frames/second       {stats.frames_per_second:.1f}")
    print(f"embedder calls      {stats.embeddings}")
    print(f"similarity evals    {stats.similarity_evaluations}")
    print("stage seconds       " + ", ".join(f"{k}={v:.3f}" for k, v in timer.totals.items()))
    for source in ("env", "file", "cli"):
        keys = audit.keys_from(source)
        if keys:
            print(f"from {source:<14} {', '.join(keys)}")
    print(f"defaults used       {', '.join(audit.keys_from('default')) or 'none'}")
    return ExitCode.OK


def cmd_evaluate(args: argparse.Namespace) -> ExitCode:
    gt = read_ground_truth(args.gt)
    hypotheses = read_ground_truth(args.results)
    report = evaluate(gt, hypotheses, args.iou_threshold)
    print(report.to_table())
    print(report.to_summary_line())
    if not report.defined:
        logger.error("ground truth {} has no considered boxes; scores undefined", args.gt)
        return ExitCode.UNDEFINED_SCORE
    return ExitCode.OK


def _scenario(args: argparse.Namespace) -> ScenarioSpec | None:
    spec: ScenarioSpec | None = None
    if args.scenario is not None:
        spec = load_scenario(args.scenario)
    elif args.preset is not None:
        spec = PRESETS[args.preset]()
    if spec is not None and args.seed is not None:
        spec = spec.model_copy(update={"seed": args.seed})
    return spec


def cmd_generate(args: argparse.Namespace) -> ExitCode:
    spec = _scenario(args)
    assert spec is not None
    scene = generate(spec)
    write_scene(scene, args.output, images=not args.no_images)
    print(f"scene               {spec.name}")
    print(f"frames              {spec.frame_count}")
    print(f"ground-truth boxes  {len(scene.ground_truth)}")
    print(f"detections          {len(scene.detections)}")
    return ExitCode.OK


def cmd_benchmark(args: argparse.Namespace) -> ExitCode:
    config, _ = _load_config(args)
    source: FrameSource
    if args.sequence is not None:
        frames, geometry, image_dir = _sequence_stream(args.sequence, None)
        assert image_dir is not None
        source = image_source(image_dir)
    else:
        spec = _scenario(args) or benchmark_scenario(
            args.detections_per_frame, args.frames, args.seed or 0
        )
        scene = generate(spec)
        frames, geometry, source = list(scene.frames()), scene.geometry, scene.render

    report = run_benchmark(
        frames, geometry, config, embedding_stage(config, source), args.repetitions
    )
    if args.sweep:
        report.scaling = scaling_sweep(config, frame_count=args.sweep_frames, seed=args.seed or 0)
    print(report.to_text())
    return ExitCode.OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging("DEBUG" if args.verbose else None)
    handler: Callable[[argparse.Namespace], ExitCode] = args.handler
    try:
        return int(handler(args))
    except ConfigError as exc:
        logger.error("configuration error: {}", exc)
        return int(ExitCode.CONFIG)
    except InputError as exc:
        logger.error("I/O error: {}", exc)
        return int(ExitCode.IO)
    except DataError as exc:
        logger.error("data error: {}", exc)
        return int(ExitCode.DATA)
    except FixcamError as exc:
        logger.error("{}: {}", type(exc).__name__, exc)
        return int(ExitCode.DATA)


if __name__ == "__main__":
    sys.exit(main())
