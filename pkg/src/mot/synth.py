"""
Deterministic synthetic scenes.

A scenario declares targets with piecewise-constant velocities; the generator
produces exact ground truth, a noisy detection stream and on-demand frame
images where every identity wears a stable texture (flat color plus stripes).
Frames are 1-based; a target is present on ``entry <= frame < exit``.
"""

import colorsys
import math
import tomllib
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.stats import truncnorm

from ..errors import ScenarioError
from ..tracking.base import Detection, FrameDetections
from ..tracking.geometry import BoundingBox, ImageGeometry
from .mot_io import (
    IMAGE_DIR,
    DetectionRecord,
    GroundTruthRecord,
    SequenceInfo,
    records_to_detections,
    save_frame_image,
    write_detections,
    write_ground_truth,
    write_sequence_info,
)

BACKGROUND = 128
GOLDEN_RATIO_CONJUGATE = 0.6180339887498949
JITTER_TRUNCATION = 3.0


class Turn(BaseModel):
    """New velocity applied from ``frame`` on."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    frame: int = Field(ge=1)
    vx: float
    vy: float


class TargetSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    entry: int = Field(ge=1)
    exit: int = Field(ge=2)
    box: BoundingBox
    velocity: tuple[float, float] = (0.0, 0.0)
    turns: list[Turn] = Field(default_factory=list)
    appearance_key: int = Field(default=0, ge=0)
    hidden: list[tuple[int, int]] = Field(
        default_factory=list, description="Half-open frame windows without detections"
    )

    @model_validator(mode="after")
    def _check(self) -> "TargetSpec":
        if self.exit <= self.entry:
            raise ValueError(f"exit {self.exit} must be after entry {self.entry}")
        if self.box.is_degenerate():
            raise ValueError("target box must have positive size")
        for turn in self.turns:
            if not self.entry < turn.frame < self.exit:
                raise ValueError(f"turn at frame {turn.frame} outside ({self.entry}, {self.exit})")
        for start, stop in self.hidden:
            if stop <= start:
                raise ValueError(f"empty hidden window ({start}, {stop})")
        return self

    def present(self, frame: int) -> bool:
        return self.entry <= frame < self.exit

    def is_hidden(self, frame: int) -> bool:
        return any(start <= frame < stop for start, stop in self.hidden)

    def trajectory(self) -> NDArray[np.float64]:
        """Top-left corner per present frame, shape ``(exit - entry, 2)``."""
        turns = {t.frame: (t.vx, t.vy) for t in self.turns}
        vx, vy = self.velocity
        out = np.empty((self.exit - self.entry, 2))
        x, y = self.box.x, self.box.y
        for k, frame in enumerate(range(self.entry, self.exit)):
            if k:
                vx, vy = turns.get(frame, (vx, vy))
                x, y = x + vx, y + vy
            out[k] = (x, y)
        return out


class NoiseSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    jitter_std: float = Field(default=0.0, ge=0.0, description="Box jitter std in pixels")
    dropout: float = Field(default=0.0, ge=0.0, le=1.0)
    clutter_rate: float = Field(default=0.0, ge=0.0, description="Mean false positives per frame")
    clutter_width: tuple[float, float] = (20.0, 60.0)
    clutter_height: tuple[float, float] = (40.0, 120.0)


class ScenarioSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    name: str = "synthetic"
    seed: int = 0
    geometry: ImageGeometry
    frame_count: int = Field(ge=1)
    frame_rate: float = Field(default=30.0, gt=0.0)
    targets: list[TargetSpec] = Field(default_factory=list)
    noise: NoiseSpec = Field(default_factory=NoiseSpec)

    @model_validator(mode="after")
    def _check(self) -> "ScenarioSpec":
        for i, t in enumerate(self.targets, start=1):
            if t.exit > self.frame_count + 1:
                raise ValueError(f"target {i} exits at {t.exit}, past frame {self.frame_count}")
        return self


def texture_colors(appearance_key: int) -> tuple[NDArray[np.uint8], NDArray[np.uint8], int]:
    """Base color, stripe color and stripe period of an appearance key."""
    hue = (appearance_key * GOLDEN_RATIO_CONJUGATE) % 1.0
    rgb = np.array(colorsys.hsv_to_rgb(hue, 0.8, 0.9))
    base = np.round(rgb * 255).astype(np.uint8)
    stripe = np.round(rgb * 0.5 * 255).astype(np.uint8)
    return base, stripe, 2 + appearance_key % 4


def _pixel_span(start: float, length: float, size: int) -> tuple[int, int]:
    lo = max(math.ceil(start - 0.5), 0)
    hi = min(math.ceil(start + length - 0.5), size)
    return lo, hi


@dataclass
class SyntheticScene:
    """Generated ground truth and detections; frames render on demand."""

    spec: ScenarioSpec
    ground_truth: list[GroundTruthRecord]
    detections: list[DetectionRecord]
    _boxes: dict[int, list[tuple[int, BoundingBox]]] = field(default_factory=dict, repr=False)

    @property
    def geometry(self) -> ImageGeometry:
        return self.spec.geometry

    def detections_by_frame(self) -> dict[int, list[Detection]]:
        grouped: dict[int, list[DetectionRecord]] = {}
        for r in self.detections:
            grouped.setdefault(r.frame, []).append(r)
        return records_to_detections(grouped)

    def frames(self) -> Iterator[FrameDetections]:
        per_frame = self.detections_by_frame()
        for frame_id in range(1, self.spec.frame_count + 1):
            yield FrameDetections(frame_id=frame_id, detections=per_frame.get(frame_id, []))

    def render(self, frame: int) -> NDArray[np.uint8]:
        """RGB image of ``frame``; hidden targets are not drawn."""
        height, width = int(self.geometry.height), int(self.geometry.width)
        image = np.full((height, width, 3), BACKGROUND, dtype=np.uint8)
        for index, box in self._boxes.get(frame, []):
            target = self.spec.targets[index]
            if target.is_hidden(frame):
                continue
            x0, x1 = _pixel_span(box.x, box.w, width)
            y0, y1 = _pixel_span(box.y, box.h, height)
            if x0 >= x1 or y0 >= y1:
                continue
            base, stripe, period = texture_colors(target.appearance_key)
            rows = np.arange(y0, y1) - math.ceil(box.y - 0.5)
            dark = (rows // period) % 2 == 1
            region = image[y0:y1, x0:x1]
            region[:] = base
            region[dark] = stripe
        return image


def generate(spec: ScenarioSpec) -> SyntheticScene:
    """
    Build the scene for ``spec``; the same seed gives the same records.

    Detections are ground-truth boxes with truncated-Gaussian jitter, minus
    dropouts, plus Poisson clutter with uniform confidence in [0.1, 0.6].
    """
    rng = np.random.default_rng(spec.seed)
    noise = spec.noise
    boxes: dict[int, list[tuple[int, BoundingBox]]] = {}
    for index, target in enumerate(spec.targets):
        for k, (x, y) in enumerate(target.trajectory()):
            box = BoundingBox(x=float(x), y=float(y), w=target.box.w, h=target.box.h)
            boxes.setdefault(target.entry + k, []).append((index, box))

    ground_truth: list[GroundTruthRecord] = []
    detections: list[DetectionRecord] = []
    for frame in range(1, spec.frame_count + 1):
        for index, box in boxes.get(frame, []):
            target = spec.targets[index]
            hidden = target.is_hidden(frame)
            ground_truth.append(
                GroundTruthRecord(
                    frame=frame,
                    identity=index + 1,
                    box=box,
                    consider=True,
                    class_id=1,
                    visibility=0.0 if hidden else 1.0,
                )
            )
            if hidden or rng.random() < noise.dropout:
                continue
            detections.append(_observe(frame, box, noise.jitter_std, rng))
        detections.extend(_clutter(frame, spec.geometry, noise, rng))

    logger.debug(
        "scene {}: {} frames, {} gt boxes, {} detections",
        spec.name,
        spec.frame_count,
        len(ground_truth),
        len(detections),
    )
    return SyntheticScene(spec, ground_truth, detections, boxes)


def _observe(
    frame: int, box: BoundingBox, jitter_std: float, rng: np.random.Generator
) -> DetectionRecord:
    x, y, w, h = box.x, box.y, box.w, box.h
    if jitter_std > 0.0:
        dx, dy, dw, dh = truncnorm.rvs(
            -JITTER_TRUNCATION, JITTER_TRUNCATION, scale=jitter_std, size=4, random_state=rng
        )
        x, y = x + dx, y + dy
        w, h = max(w + dw, 1.0), max(h + dh, 1.0)
    return DetectionRecord(frame=frame, x=x, y=y, w=w, h=h, confidence=1.0)


def _clutter(
    frame: int, geometry: ImageGeometry, noise: NoiseSpec, rng: np.random.Generator
) -> list[DetectionRecord]:
    if noise.clutter_rate <= 0.0:
        return []
    out = []
    for _ in range(int(rng.poisson(noise.clutter_rate))):
        w = float(rng.uniform(*noise.clutter_width))
        h = float(rng.uniform(*noise.clutter_height))
        x = float(rng.uniform(0.0, max(geometry.width - w, 0.0)))
        y = float(rng.uniform(0.0, max(geometry.height - h, 0.0)))
        out.append(
            DetectionRecord(frame=frame, x=x, y=y, w=w, h=h, confidence=float(rng.uniform(0.1, 0.6)))
        )
    return out


def sequence_info(spec: ScenarioSpec) -> SequenceInfo:
    return SequenceInfo(
        name=spec.name,
        im_width=int(spec.geometry.width),
        im_height=int(spec.geometry.height),
        frame_rate=spec.frame_rate,
        seq_length=spec.frame_count,
        im_ext=".png",
    )


def write_scene(scene: SyntheticScene, out_dir: Path, images: bool = True) -> None:
    """Lay the scene out as a MOT sequence directory."""
    write_sequence_info(out_dir, sequence_info(scene.spec))
    write_ground_truth(out_dir / "gt" / "gt.txt", scene.ground_truth)
    write_detections(out_dir / "det" / "det.txt", scene.detections)
    if images:
        for frame in range(1, scene.spec.frame_count + 1):
            save_frame_image(out_dir / IMAGE_DIR, frame, scene.render(frame))
    logger.info("wrote scene {} ({} frames) to {}", scene.spec.name, scene.spec.frame_count, out_dir)


def load_scenario(path: Path) -> ScenarioSpec:
    """
    Read a TOML scenario file.

    Raises:
        ScenarioError: unreadable file or invalid scenario
    """
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    try:
        return ScenarioSpec.model_validate(raw)
    except ValidationError as exc:
        raise ScenarioError(f"invalid scenario {path}: {exc}") from exc


def grid_scenario(
    targets: int = 10,
    frame_count: int = 300,
    seed: int = 0,
    noise: NoiseSpec | None = None,
) -> ScenarioSpec:
    """Well-separated slow targets on a 5-column grid, present on every frame."""
    cols = 5
    rows = max(math.ceil(targets / cols), 1)
    width, height = 960.0, max(540.0, 240.0 * rows)
    drift_x, drift_y = 75.0 / frame_count, 30.0 / frame_count
    specs = []
    for i in range(targets):
        row, col = divmod(i, cols)
        sign = 1.0 if row % 2 == 0 else -1.0
        specs.append(
            TargetSpec(
                entry=1,
                exit=frame_count + 1,
                box=BoundingBox(x=120.0 + 180.0 * col, y=120.0 + 240.0 * row, w=30.0, h=60.0),
                velocity=(sign * drift_x, sign * drift_y),
                appearance_key=i,
            )
        )
    return ScenarioSpec(
        name="grid",
        seed=seed,
        geometry=ImageGeometry(width=width, height=height),
        frame_count=frame_count,
        targets=specs,
        noise=noise or NoiseSpec(),
    )


def crossing_scenario(seed: int = 0) -> ScenarioSpec:
    """
    Two targets approach head-on and bounce back at frame 14.

    On the bounce frame every predicted box is disjoint from both detections,
    so IoU cannot tell the identities apart and the center distance favors
    the swap. Only the textures separate them.
    """
    frames = 24
    return ScenarioSpec(
        name="crossing",
        seed=seed,
        geometry=ImageGeometry(width=512, height=240),
        frame_count=frames,
        targets=[
            TargetSpec(
                entry=1,
                exit=frames + 1,
                box=BoundingBox(x=40.0, y=100.0, w=20.0, h=40.0),
                velocity=(16.0, 0.0),
                turns=[Turn(frame=14, vx=-16.0, vy=0.0)],
                appearance_key=0,
            ),
            TargetSpec(
                entry=1,
                exit=frames + 1,
                box=BoundingBox(x=446.0, y=100.0, w=20.0, h=40.0),
                velocity=(-16.0, 0.0),
                turns=[Turn(frame=14, vx=16.0, vy=0.0)],
                appearance_key=1,
            ),
        ],
    )


def occlusion_scenario(hidden_frames: int, seed: int = 0) -> ScenarioSpec:
    """One slow target seen for 10 frames, hidden for ``hidden_frames``, then seen for 20."""
    visible_before, visible_after = 10, 20
    frames = visible_before + hidden_frames + visible_after
    start = visible_before + 1
    return ScenarioSpec(
        name=f"occlusion-{hidden_frames}",
        seed=seed,
        geometry=ImageGeometry(width=320, height=240),
        frame_count=frames,
        targets=[
            TargetSpec(
                entry=1,
                exit=frames + 1,
                box=BoundingBox(x=40.0, y=80.0, w=30.0, h=60.0),
                velocity=(0.5, 0.0),
                hidden=[(start, start + hidden_frames)] if hidden_frames else [],
                appearance_key=3,
            )
        ],
    )


def benchmark_scenario(
    detections_per_frame: int = 50,
    frame_count: int = 4479,
    seed: int = 0,
) -> ScenarioSpec:
    """Dense full-HD scene with exactly ``detections_per_frame`` detections per frame."""
    width, height = 1920.0, 1080.0
    cols = math.ceil(math.sqrt(detections_per_frame * width / height))
    rows = math.ceil(detections_per_frame / cols)
    cell_w, cell_h = width / cols, height / rows
    box_w, box_h = min(30.0, cell_w / 2), min(60.0, cell_h / 2)
    rng = np.random.default_rng(seed)
    targets = []
    for i in range(detections_per_frame):
        row, col = divmod(i, cols)
        # drift at most a quarter cell over the whole run
        vx, vy = rng.uniform(-1.0, 1.0, size=2) * np.array([cell_w, cell_h]) / (4 * frame_count)
        targets.append(
            TargetSpec(
                entry=1,
                exit=frame_count + 1,
                box=BoundingBox(
                    x=col * cell_w + (cell_w - box_w) / 2,
                    y=row * cell_h + (cell_h - box_h) / 2,
                    w=box_w,
                    h=box_h,
                ),
                velocity=(float(vx), float(vy)),
                appearance_key=i,
            )
        )
    return ScenarioSpec(
        name=f"benchmark-{detections_per_frame}",
        seed=seed,
        geometry=ImageGeometry(width=width, height=height),
        frame_count=frame_count,
        targets=targets,
    )


PRESETS: dict[str, Callable[[], ScenarioSpec]] = {
    "grid": grid_scenario,
    "crossing": crossing_scenario,
    "occlusion": partial(occlusion_scenario, 20),
    "benchmark": benchmark_scenario,
}
