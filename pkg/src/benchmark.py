"""Throughput benchmark: end-to-end rounds, stage breakdown and embedder scaling."""

import statistics
import time
from collections.abc import Callable, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from .config import TrackerConfig
from .mot.mot_io import result_lines
from .mot.synth import benchmark_scenario, generate
from .tracking.base import FrameDetections
from .tracking.fingerprint import HistogramEmbedder
from .tracking.geometry import ImageGeometry
from .tracking.pipeline import FingerprintStage, FrameSource, PatchEmbeddingStage, TrackingPipeline
from .tracking.timing import STAGES, StageTimer

REAL_TIME_FPS = 30.0
SWEEP_DETECTIONS = (25, 50, 100, 200)
LINEARITY_TOLERANCE = 1.3

StageFactory = Callable[[], FingerprintStage]


class RunTiming(BaseModel):
    """One timed pass over a sequence."""

    frames: int
    detections: int
    embeddings: int
    wall_seconds: float
    stage_seconds: dict[str, float] = Field(default_factory=dict)

    @property
    def frames_per_second(self) -> float:
        return self.frames / self.wall_seconds if self.wall_seconds > 0 else 0.0

    @property
    def detections_per_second(self) -> float:
        return self.detections / self.wall_seconds if self.wall_seconds > 0 else 0.0


class ScalingPoint(BaseModel):
    detections_per_frame: int
    frames: int
    embeddings: int
    embed_seconds: float


class ScalingReport(BaseModel):
    """Embed-stage time against detections per frame, with a linear fit."""

    points: list[ScalingPoint]
    slope: float
    intercept: float
    max_slope_ratio: float

    @property
    def linear(self) -> bool:
        return self.max_slope_ratio <= LINEARITY_TOLERANCE


class BenchmarkReport(BaseModel):
    runs: list[RunTiming]
    scaling: ScalingReport | None = None
    target_fps: float = REAL_TIME_FPS

    @property
    def min_fps(self) -> float:
        return min(r.frames_per_second for r in self.runs)

    @property
    def median_fps(self) -> float:
        return statistics.median(r.frames_per_second for r in self.runs)

    @property
    def real_time(self) -> bool:
        return self.median_fps >= self.target_fps

    def median_stage_seconds(self) -> dict[str, float]:
        return {
            stage: statistics.median(r.stage_seconds.get(stage, 0.0) for r in self.runs)
            for stage in STAGES
        }

    def to_text(self) -> str:
        first = self.runs[0]
        wall = [r.wall_seconds for r in self.runs]
        lines = [
            f"frames            {first.frames}",
            f"detections        {first.detections}",
            f"embedder calls    {first.embeddings}",
            f"repetitions       {len(self.runs)}",
            f"wall s (min/med)  {min(wall):.3f} / {statistics.median(wall):.3f}",
            f"fps (min/med)     {self.min_fps:.1f} / {self.median_fps:.1f}",
            f"det/s (median)    {statistics.median(r.detections_per_second for r in self.runs):.1f}",
            "stage seconds (median):",
        ]
        lines += [f"  {stage:<10} {sec:.3f}" for stage, sec in self.median_stage_seconds().items()]
        verdict = "yes" if self.real_time else "no"
        lines.append(f"real time at {self.target_fps:g} fps: {verdict}")
        if self.scaling is not None:
            lines.append("embed scaling (det/frame -> embed s, calls):")
            lines += [
                f"  {p.detections_per_frame:>5} -> {p.embed_seconds:.3f} s, {p.embeddings}"
                for p in self.scaling.points
            ]
            lines.append(
                f"  fitted slope {self.scaling.slope:.3e} s/det-per-frame, "
                f"max local/fitted {self.scaling.max_slope_ratio:.2f} "
                f"({'linear' if self.scaling.linear else 'super-linear'})"
            )
        return "\n".join(lines)


def time_run(
    frames: Sequence[FrameDetections],
    geometry: ImageGeometry,
    config: TrackerConfig,
    stage_factory: StageFactory,
) -> RunTiming:
    """Track ``frames`` once and format the results, timing every stage."""
    timer = StageTimer()
    pipeline = TrackingPipeline(config, geometry, stage_factory(), timer)
    started = time.perf_counter()
    results = pipeline.run_sync(frames)
    with timer.measure("write"):
        sum(len(line) for line in result_lines(results))
    wall = time.perf_counter() - started
    return RunTiming(
        frames=pipeline.stats.frames,
        detections=pipeline.stats.detections,
        embeddings=pipeline.stats.embeddings,
        wall_seconds=wall,
        stage_seconds=dict(timer.totals),
    )


def embedding_stage(config: TrackerConfig, source: FrameSource) -> StageFactory:
    fp = config.fingerprint

    def factory() -> FingerprintStage:
        return PatchEmbeddingStage(
            HistogramEmbedder.from_config(fp), source, fp.patch_height, fp.patch_width
        )

    return factory


def run_benchmark(
    frames: Sequence[FrameDetections],
    geometry: ImageGeometry,
    config: TrackerConfig,
    stage_factory: StageFactory,
    repetitions: int = 3,
) -> BenchmarkReport:
    runs = []
    for rep in range(1, repetitions + 1):
        run = time_run(frames, geometry, config, stage_factory)
        logger.info("repetition {}/{}: {:.1f} fps", rep, repetitions, run.frames_per_second)
        runs.append(run)
    return BenchmarkReport(runs=runs)


def scaling_sweep(
    config: TrackerConfig,
    detection_counts: Sequence[int] = SWEEP_DETECTIONS,
    frame_count: int = 120,
    seed: int = 0,
) -> ScalingReport:
    """
    Embed-stage time for scenes with each detection count.

    ``max_slope_ratio`` is the steepest slope between consecutive points over
    the fitted slope; linear growth keeps it near 1.
    """
    points = []
    for count in detection_counts:
        scene = generate(benchmark_scenario(count, frame_count, seed))
        run = time_run(list(scene.frames()), scene.geometry, config, embedding_stage(config, scene.render))
        points.append(
            ScalingPoint(
                detections_per_frame=count,
                frames=run.frames,
                embeddings=run.embeddings,
                embed_seconds=run.stage_seconds.get("embed", 0.0),
            )
        )
        logger.debug("sweep {} det/frame: embed {:.3f}s", count, points[-1].embed_seconds)

    x = np.array([p.detections_per_frame for p in points], dtype=np.float64)
    t = np.array([p.embed_seconds for p in points], dtype=np.float64)
    if len(points) < 2:
        return ScalingReport(points=points, slope=0.0, intercept=float(t.sum()), max_slope_ratio=1.0)
    slope, intercept = np.polyfit(x, t, 1)
    local = np.diff(t) / np.diff(x)
    ratio = float(local.max() / slope) if slope > 0 else float("inf")
    return ScalingReport(
        points=points, slope=float(slope), intercept=float(intercept), max_slope_ratio=ratio
    )
