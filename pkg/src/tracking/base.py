"""Shared value types passed between the tracking stages."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .geometry import BoundingBox


class TrackStatus(str, Enum):
    """How a reported track got its box this frame."""

    UPDATED = "updated"  # Kalman-corrected by an assigned detection
    COASTING = "coasting"  # Predicted only


class Detection(BaseModel):
    """One observation of one frame from the external detector."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    box: BoundingBox
    confidence: float = 1.0


class FrameDetections(BaseModel):
    """All detections of one frame, in file order."""

    model_config = ConfigDict(frozen=True)

    frame_id: int = Field(ge=1)
    detections: list[Detection] = Field(default_factory=list)
    # positions in the unfiltered frame; None when nothing was dropped
    source_indices: list[int] | None = None

    @model_validator(mode="after")
    def _indices_match(self) -> "FrameDetections":
        if self.source_indices is not None and len(self.source_indices) != len(self.detections):
            raise ValueError(
                f"{len(self.source_indices)} source indices for {len(self.detections)} detections"
            )
        return self

    def source_index(self, i: int) -> int:
        """Position of detection ``i`` in the frame as read from the detection file."""
        return i if self.source_indices is None else self.source_indices[i]


class TrackReport(BaseModel):
    """One live track in a frame's output."""

    model_config = ConfigDict(frozen=True)

    track_id: int = Field(ge=1)
    box: BoundingBox
    status: TrackStatus

    @property
    def coasting(self) -> bool:
        return self.status is TrackStatus.COASTING


class FrameResult(BaseModel):
    """Tracker output for one frame."""

    model_config = ConfigDict(frozen=True)

    frame_id: int = Field(ge=1)
    tracks: list[TrackReport] = Field(default_factory=list)
