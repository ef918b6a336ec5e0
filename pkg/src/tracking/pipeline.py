"""
Two-stage streaming pipeline.

The fingerprint stage embeds whole buffers of ``B`` frames in a worker thread
and hands them to the tracking stage through a bounded queue. Buffering only
adds latency: the tracker sees the same fingerprints in the same frame order
for every ``B``.
"""

import asyncio
import time
from abc import ABC, abstractmethod
from collections.abc import AsyncIterator, Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from pydantic import BaseModel, Field

from ..config import TrackerConfig
from ..errors import PatchOutOfBoundsError
from .base import Detection, FrameDetections, FrameResult
from .fingerprint import (
    BufferedFrame,
    Fingerprint,
    FingerprintProvider,
    Patch,
    buffered_inference,
    extract_patch,
)
from .geometry import ImageGeometry
from .timing import StageTimer
from .tracker import Tracker

FrameSource = Callable[[int], NDArray[np.generic] | None]

FingerprintTable = Mapping[tuple[int, int], Fingerprint | None]


class FingerprintStage(ABC):
    """Produces one fingerprint (or ``None``) per buffered detection."""

    @abstractmethod
    def fingerprints(self, buffer: Sequence[FrameDetections]) -> dict[tuple[int, int], Fingerprint | None]:
        """
        Fingerprints for a buffer of frames.

        Returns:
            Mapping ``(frame_id, detection index) -> Fingerprint | None``
        """
        ...

    @property
    def evaluations(self) -> int:
        return 0


class GeometryOnlyStage(FingerprintStage):
    """No appearance information; every fingerprint is null."""

    def fingerprints(self, buffer: Sequence[FrameDetections]) -> dict[tuple[int, int], Fingerprint | None]:
        return {
            (frame.frame_id, i): None for frame in buffer for i in range(len(frame.detections))
        }


class SidecarStage(FingerprintStage):
    """
    Precomputed fingerprints keyed by ``(frame, detection index)``.

    Table indices refer to the unfiltered detection file, so lookups go through
    ``FrameDetections.source_index``.
    """

    def __init__(self, table: FingerprintTable) -> None:
        self.table = table

    def fingerprints(self, buffer: Sequence[FrameDetections]) -> dict[tuple[int, int], Fingerprint | None]:
        return {
            (frame.frame_id, i): self.table.get((frame.frame_id, frame.source_index(i)))
            for frame in buffer
            for i in range(len(frame.detections))
        }


class PatchEmbeddingStage(FingerprintStage):
    """Crops patches from frame images and embeds them in one batch per buffer."""

    def __init__(
        self,
        provider: FingerprintProvider,
        frames: FrameSource,
        patch_height: int = 60,
        patch_width: int = 35,
    ) -> None:
        self.provider = provider
        self.frames = frames
        self.patch_height = patch_height
        self.patch_width = patch_width

    @property
    def evaluations(self) -> int:
        return self.provider.evaluations

    def fingerprints(self, buffer: Sequence[FrameDetections]) -> dict[tuple[int, int], Fingerprint | None]:
        staged = [
            BufferedFrame(frame.frame_id, list(frame.detections), self._patches(frame))
            for frame in buffer
        ]
        return buffered_inference(staged, self.provider)

    def _patches(self, frame: FrameDetections) -> list[Patch | None]:
        if not frame.detections:
            return []
        image = self.frames(frame.frame_id)
        if image is None:
            return [None] * len(frame.detections)
        patches: list[Patch | None] = []
        for det in frame.detections:
            try:
                patches.append(extract_patch(image, det.box, self.patch_height, self.patch_width))
            except PatchOutOfBoundsError:
                patches.append(None)
        return patches


class RunStats(BaseModel):
    """Counters and timings of one pipeline run."""

    frames: int = 0
    detections: int = 0
    embeddings: int = 0
    similarity_evaluations: int = 0
    tracks_created: int = 0
    tracks_deleted: int = 0
    wall_seconds: float = 0.0
    stage_seconds: dict[str, float] = Field(default_factory=dict)

    @property
    def frames_per_second(self) -> float:
        return self.frames / self.wall_seconds if self.wall_seconds > 0 else 0.0


@dataclass(slots=True)
class _Failure:
    error: BaseException


class TrackingPipeline:
    """Runs a ``FingerprintStage`` ahead of a ``Tracker`` over a frame stream."""

    def __init__(
        self,
        config: TrackerConfig,
        geometry: ImageGeometry,
        stage: FingerprintStage | None = None,
        timer: StageTimer | None = None,
    ) -> None:
        self.config = config
        self.stage = stage or GeometryOnlyStage()
        self.timer = timer or StageTimer()
        self.tracker = Tracker(config, geometry, self.timer)
        self.stats = RunStats()

    def _filter(self, frame: FrameDetections) -> FrameDetections:
        floor = self.config.tracker.min_confidence
        kept = [i for i, d in enumerate(frame.detections) if d.confidence >= floor]
        if len(kept) == len(frame.detections):
            return frame
        return FrameDetections(
            frame_id=frame.frame_id,
            detections=[frame.detections[i] for i in kept],
            source_indices=[frame.source_index(i) for i in kept],
        )

    def _embed(self, buffer: list[FrameDetections]) -> list[tuple[FrameDetections, list[Fingerprint | None]]]:
        with self.timer.measure("embed"):
            table = self.stage.fingerprints(buffer)
        return [
            (frame, [table.get((frame.frame_id, i)) for i in range(len(frame.detections))])
            for frame in buffer
        ]

    async def run(self, frames: Iterable[FrameDetections]) -> AsyncIterator[FrameResult]:
        """
        Track a stream, yielding results in frame order.

        Results lag the input by at most ``fingerprint.buffer_frames`` frames.
        """
        buffer_frames = self.config.fingerprint.buffer_frames
        queue: asyncio.Queue[
            list[tuple[FrameDetections, list[Fingerprint | None]]] | _Failure | None
        ] = asyncio.Queue(maxsize=2)

        async def produce() -> None:
            try:
                buffer: list[FrameDetections] = []
                iterator = iter(frames)
                while True:
                    start = time.perf_counter()
                    frame = next(iterator, None)
                    self.timer.add("ingest", time.perf_counter() - start)
                    if frame is None:
                        break
                    buffer.append(self._filter(frame))
                    if len(buffer) >= buffer_frames:
                        await queue.put(await asyncio.to_thread(self._embed, buffer))
                        buffer = []
                if buffer:
                    await queue.put(await asyncio.to_thread(self._embed, buffer))
                await queue.put(None)
            except Exception as exc:
                await queue.put(_Failure(exc))

        started = time.perf_counter()
        producer = asyncio.create_task(produce())
        try:
            while True:
                item = await queue.get()
                if item is None:
                    break
                if isinstance(item, _Failure):
                    raise item.error
                for frame, fps in item:
                    result = self.tracker.step(frame.frame_id, frame.detections, fps)
                    self.stats.frames += 1
                    self.stats.detections += len(frame.detections)
                    yield result
        finally:
            producer.cancel()
            self._finish(time.perf_counter() - started)

    def _finish(self, wall: float) -> None:
        self.stats.wall_seconds += wall
        self.stats.embeddings = self.stage.evaluations
        self.stats.similarity_evaluations = self.tracker.similarity_evaluations
        self.stats.tracks_created = self.tracker.tracks_created
        self.stats.tracks_deleted = self.tracker.tracks_deleted
        self.stats.stage_seconds = dict(self.timer.totals)
        logger.info(
            "tracked {} frames, {} detections in {:.2f}s ({:.1f} fps)",
            self.stats.frames,
            self.stats.detections,
            self.stats.wall_seconds,
            self.stats.frames_per_second,
        )

    def run_sync(self, frames: Iterable[FrameDetections]) -> list[FrameResult]:
        """Blocking wrapper around ``run`` for callers without an event loop."""

        async def collect() -> list[FrameResult]:
            return [result async for result in self.run(frames)]

        return asyncio.run(collect())


async def run_stream(
    frames: Iterable[FrameDetections],
    config: TrackerConfig,
    geometry: ImageGeometry,
    stage: FingerprintStage | None = None,
) -> AsyncIterator[FrameResult]:
    """Convenience generator over a fresh ``TrackingPipeline``."""
    pipeline = TrackingPipeline(config, geometry, stage)
    async for result in pipeline.run(frames):
        yield result


def contiguous_frames(
    per_frame: Mapping[int, Sequence[Detection]], last_frame: int | None = None
) -> Iterable[FrameDetections]:
    """Yield frames 1..last, filling frames without detections with empty lists."""
    last = last_frame if last_frame is not None else max(per_frame, default=0)
    for frame_id in range(1, last + 1):
        yield FrameDetections(frame_id=frame_id, detections=list(per_frame.get(frame_id, ())))
