"""MOT-challenge data: file formats, scoring and synthetic scenes."""

from .metrics import ScoreReport, evaluate
from .mot_io import DetectionRecord, GroundTruthRecord, read_detections, read_ground_truth
from .synth import ScenarioSpec, SyntheticScene, generate

__all__ = [
    "DetectionRecord",
    "GroundTruthRecord",
    "ScenarioSpec",
    "ScoreReport",
    "SyntheticScene",
    "evaluate",
    "generate",
    "read_detections",
    "read_ground_truth",
]
