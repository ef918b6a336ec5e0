"""Tracking core: geometry, motion model, fingerprints and association.

``tracker`` and ``pipeline`` depend on ``src.config`` and are imported from
their modules directly.
"""

from .association import AssociationResult, AssociationWeights, CostMatrix
from .base import Detection, FrameDetections, FrameResult, TrackReport, TrackStatus
from .fingerprint import Fingerprint, FingerprintProvider, HistogramEmbedder
from .geometry import BoundingBox, ImageGeometry, iou
from .kalman import MotionState, NoiseConfig

__all__ = [
    "AssociationResult",
    "AssociationWeights",
    "BoundingBox",
    "CostMatrix",
    "Detection",
    "Fingerprint",
    "FingerprintProvider",
    "FrameDetections",
    "FrameResult",
    "HistogramEmbedder",
    "ImageGeometry",
    "MotionState",
    "NoiseConfig",
    "TrackReport",
    "TrackStatus",
    "iou",
]
