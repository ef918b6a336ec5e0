"""Pytest configuration and shared fixtures."""

import os
from collections.abc import Callable, Iterator
from typing import Any

import pytest
from loguru import logger

from src.config import TrackerConfig, load_config
from src.mot.mot_io import GroundTruthRecord
from src.mot.synth import SyntheticScene, crossing_scenario, generate, grid_scenario
from src.tracking.base import FrameResult
from src.tracking.fingerprint import HistogramEmbedder
from src.tracking.geometry import ImageGeometry
from src.tracking.pipeline import (
    FingerprintStage,
    GeometryOnlyStage,
    PatchEmbeddingStage,
    TrackingPipeline,
)


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    """Keep FIXCAM_* variables of the developer shell out of the tests."""
    for key in list(os.environ):
        if key.upper().startswith("FIXCAM_"):
            monkeypatch.delenv(key, raising=False)


@pytest.fixture
def log_messages() -> Iterator[list[str]]:
    """Loguru records emitted during the test, as ``LEVEL message`` strings."""
    messages: list[str] = []
    sink_id = logger.add(
        lambda m: messages.append(f"{m.record['level'].name} {m.record['message']}"),
        level="DEBUG",
    )
    yield messages
    logger.remove(sink_id)


@pytest.fixture
def geometry() -> ImageGeometry:
    return ImageGeometry(width=640, height=480)


@pytest.fixture
def default_config() -> TrackerConfig:
    return TrackerConfig()


@pytest.fixture
def make_config() -> Callable[..., TrackerConfig]:
    """Config with dotted-key overrides: ``make_config(**{"association.beta": 0.0})``."""

    def build(**overrides: Any) -> TrackerConfig:
        config, _ = load_config(overrides=overrides)
        return config

    return build


@pytest.fixture(scope="session")
def grid_scene() -> SyntheticScene:
    return generate(grid_scenario(targets=10, frame_count=300))


@pytest.fixture(scope="session")
def crossing_scene() -> SyntheticScene:
    return generate(crossing_scenario())


@pytest.fixture
def track_scene() -> Callable[..., list[FrameResult]]:
    """Run a synthetic scene through the pipeline, with or without its images."""

    def run(
        scene: SyntheticScene, config: TrackerConfig, with_images: bool = True
    ) -> list[FrameResult]:
        if with_images:
            fp = config.fingerprint
            stage: FingerprintStage = PatchEmbeddingStage(
                HistogramEmbedder.from_config(fp), scene.render, fp.patch_height, fp.patch_width
            )
        else:
            stage = GeometryOnlyStage()
        pipeline = TrackingPipeline(config, scene.geometry, stage)
        return pipeline.run_sync(scene.frames())

    return run


def results_as_records(results: list[FrameResult]) -> list[GroundTruthRecord]:
    return [
        GroundTruthRecord(frame=r.frame_id, identity=t.track_id, box=t.box)
        for r in results
        for t in r.tracks
    ]


@pytest.fixture
def as_records() -> Callable[[list[FrameResult]], list[GroundTruthRecord]]:
    return results_as_records
