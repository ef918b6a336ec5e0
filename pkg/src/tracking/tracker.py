"""Per-frame tracking loop: predict, associate, update, spawn, age out."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from loguru import logger

from ..config import TrackerConfig
from ..errors import CovarianceError, StreamOrderError
from .association import AssociationResult, associate, build_cost_matrix
from .base import Detection, FrameResult, TrackReport, TrackStatus
from .fingerprint import Fingerprint, fingerprint_cost_matrix
from .geometry import BoundingBox, ImageGeometry, boxes_to_array
from .kalman import MotionState, init_state, predict, state_to_box, update
from .timing import StageTimer


@dataclass(slots=True)
class Track:
    """One hypothesized identity."""

    track_id: int
    motion: MotionState
    fingerprint: Fingerprint | None
    frames_since_update: int = 0
    age: int = 0
    hit_count: int = 1

    @property
    def box(self) -> BoundingBox:
        return state_to_box(self.motion)


class Tracker:
    """
    Online multi-object tracker.

    One instance consumes one stream strictly in frame order. Track ids start
    at 1 and are never reused.
    """

    def __init__(
        self,
        config: TrackerConfig,
        geometry: ImageGeometry,
        timer: StageTimer | None = None,
    ) -> None:
        self.config = config
        self.geometry = geometry
        self.timer = timer or StageTimer()
        self.tracks: list[Track] = []
        self.last_frame_id: int | None = None
        self.tracks_created = 0
        self.tracks_deleted = 0
        self.similarity_evaluations = 0
        self._next_id = 1

    def step(
        self,
        frame_id: int,
        detections: Sequence[Detection],
        fingerprints: Sequence[Fingerprint | None] | None = None,
    ) -> FrameResult:
        """
        Advance the tracker by one frame.

        Args:
            frame_id: Must be exactly one more than the previous frame id
            detections: Detections of this frame (already confidence-filtered)
            fingerprints: One per detection, ``None`` where unavailable

        Returns:
            FrameResult with every surviving track

        Raises:
            StreamOrderError: frame ids are not contiguous and increasing
        """
        if self.last_frame_id is not None and frame_id != self.last_frame_id + 1:
            raise StreamOrderError(
                f"frame {frame_id} follows frame {self.last_frame_id}; expected {self.last_frame_id + 1}"
            )
        self.last_frame_id = frame_id

        if fingerprints is None:
            fingerprints = [None] * len(detections)
        dets, fps = self._usable(frame_id, detections, fingerprints)

        with self.timer.measure("associate"):
            for track in self.tracks:
                track.motion = predict(track.motion, self.config.noise)
                track.age += 1
                track.frames_since_update += 1
            result = self._associate(dets, fps)

        with self.timer.measure("update"):
            for t, d in result.pairs:
                self._update_track(self.tracks[t], dets[d], fps[d])
            for d in result.unassigned_detections:
                self._spawn(dets[d], fps[d])
            self._age_out()
            return self._report(frame_id)

    def _usable(
        self,
        frame_id: int,
        detections: Sequence[Detection],
        fingerprints: Sequence[Fingerprint | None],
    ) -> tuple[list[Detection], list[Fingerprint | None]]:
        dets: list[Detection] = []
        fps: list[Fingerprint | None] = []
        for det, fp in zip(detections, fingerprints, strict=True):
            if det.box.is_degenerate():
                logger.debug("frame {}: dropping degenerate detection {}", frame_id, det.box)
                continue
            dets.append(det)
            fps.append(fp)
        return dets, fps

    def _associate(
        self, dets: list[Detection], fps: list[Fingerprint | None]
    ) -> AssociationResult:
        track_boxes = np.array([_box_row(t.box) for t in self.tracks]).reshape(-1, 4)
        det_boxes = boxes_to_array([d.box for d in dets])
        fp_costs, evaluations = fingerprint_cost_matrix([t.fingerprint for t in self.tracks], fps)
        self.similarity_evaluations += evaluations
        cost = build_cost_matrix(
            track_boxes, det_boxes, self.config.association, self.geometry, fp_costs
        )
        return associate(cost)

    def _update_track(self, track: Track, det: Detection, fp: Fingerprint | None) -> None:
        try:
            track.motion = update(track.motion, det, self.config.noise)
        except CovarianceError as exc:
            logger.warning("track {} reset from detection: {}", track.track_id, exc)
            track.motion = init_state(det, self.config.noise)
        track.fingerprint = fp
        track.frames_since_update = 0
        track.hit_count += 1

    def _spawn(self, det: Detection, fp: Fingerprint | None) -> None:
        track = Track(
            track_id=self._next_id,
            motion=init_state(det, self.config.noise),
            fingerprint=fp,
        )
        self._next_id += 1
        self.tracks_created += 1
        self.tracks.append(track)
        logger.debug("track {} spawned at {}", track.track_id, det.box)

    def _age_out(self) -> None:
        timeout = self.config.tracker.timeout
        alive = []
        for track in self.tracks:
            if track.frames_since_update > timeout:
                self.tracks_deleted += 1
                logger.debug(
                    "track {} deleted after {} frames without update",
                    track.track_id,
                    track.frames_since_update,
                )
            else:
                alive.append(track)
        self.tracks = alive

    def _report(self, frame_id: int) -> FrameResult:
        reports = []
        for track in self.tracks:
            updated = track.frames_since_update == 0
            if not updated and not self.config.tracker.report_coasting:
                continue
            reports.append(
                TrackReport(
                    track_id=track.track_id,
                    box=track.box,
                    status=TrackStatus.UPDATED if updated else TrackStatus.COASTING,
                )
            )
        return FrameResult(frame_id=frame_id, tracks=reports)


def _box_row(box: BoundingBox) -> list[float]:
    return [box.x, box.y, box.w, box.h]
