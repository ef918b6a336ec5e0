"""
MOT-challenge file formats.

Detections: ``frame,-1,x,y,w,h,conf,-1,-1,-1``
Ground truth: ``frame,id,x,y,w,h,consider,class,visibility``
Results: ``frame,id,x,y,w,h,1,-1,-1,-1``
Frames are 1-based everywhere.
"""

import configparser
import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel, ConfigDict, Field

from ..errors import FrameImageError, InputError, MalformedRecordError
from ..tracking.base import Detection, FrameResult
from ..tracking.fingerprint import Fingerprint, as_fingerprint
from ..tracking.geometry import BoundingBox, ImageGeometry

DETECTION_FIELDS = 10
GT_FIELDS = (9, 10)
IMAGE_DIR = "img1"
IMAGE_SUFFIXES = (".jpg", ".png")
CONSIDERED_CLASSES = frozenset({-1, 1})


class DetectionRecord(BaseModel):
    """One line of a detection file."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    frame: int = Field(ge=1)
    id: int = -1
    x: float
    y: float
    w: float
    h: float
    confidence: float
    extra: tuple[float, float, float] = (-1.0, -1.0, -1.0)

    @property
    def usable(self) -> bool:
        return self.w > 0 and self.h > 0

    def to_detection(self) -> Detection:
        return Detection(
            box=BoundingBox(x=self.x, y=self.y, w=max(self.w, 0.0), h=max(self.h, 0.0)),
            confidence=self.confidence,
        )


class GroundTruthRecord(BaseModel):
    """One line of a ground-truth (or result) file."""

    model_config = ConfigDict(frozen=True)

    frame: int = Field(ge=1)
    identity: int
    box: BoundingBox
    consider: bool = True
    class_id: int = -1
    visibility: float = -1.0

    @property
    def considered(self) -> bool:
        return self.consider and self.class_id in CONSIDERED_CLASSES and self.identity >= 1


class SequenceInfo(BaseModel):
    """Contents of a ``seqinfo.ini``."""

    name: str
    im_width: int = Field(gt=0)
    im_height: int = Field(gt=0)
    frame_rate: float = Field(default=30.0, gt=0)
    seq_length: int = Field(ge=0)
    im_ext: str = ".jpg"

    @property
    def geometry(self) -> ImageGeometry:
        return ImageGeometry(width=self.im_width, height=self.im_height)


def _split(path: Path, lineno: int, line: str, arity: Iterable[int]) -> list[str]:
    fields = [f.strip() for f in line.split(",")]
    allowed = tuple(arity)
    if len(fields) not in allowed:
        want = " or ".join(str(a) for a in allowed)
        raise MalformedRecordError(path, lineno, None, f"expected {want} fields, got {len(fields)}")
    return fields


def _number(path: Path, lineno: int, fields: list[str], column: int) -> float:
    try:
        value = float(fields[column])
    except ValueError:
        raise MalformedRecordError(
            path, lineno, column + 1, f"not a number: {fields[column]!r}"
        ) from None
    if not math.isfinite(value):
        raise MalformedRecordError(path, lineno, column + 1, f"not a finite number: {fields[column]!r}")
    return value


def _integer(path: Path, lineno: int, fields: list[str], column: int) -> int:
    value = _number(path, lineno, fields, column)
    if not value.is_integer():
        raise MalformedRecordError(path, lineno, column + 1, f"not an integer: {fields[column]!r}")
    return int(value)


def _lines(path: Path) -> Iterator[tuple[int, str]]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def read_detections(path: Path) -> dict[int, list[DetectionRecord]]:
    """
    Parse a detection file, grouped by frame in file order.

    Raises:
        InputError: the file cannot be read
        MalformedRecordError: wrong arity or non-numeric field
    """
    frames: dict[int, list[DetectionRecord]] = {}
    for lineno, line in _lines(path):
        f = _split(path, lineno, line, (DETECTION_FIELDS,))
        frame = _integer(path, lineno, f, 0)
        if frame < 1:
            raise MalformedRecordError(path, lineno, 1, f"frame must be >= 1, got {frame}")
        record = DetectionRecord(
            frame=frame,
            id=_integer(path, lineno, f, 1),
            x=_number(path, lineno, f, 2),
            y=_number(path, lineno, f, 3),
            w=_number(path, lineno, f, 4),
            h=_number(path, lineno, f, 5),
            confidence=_number(path, lineno, f, 6),
            extra=(_number(path, lineno, f, 7), _number(path, lineno, f, 8), _number(path, lineno, f, 9)),
        )
        frames.setdefault(frame, []).append(record)
    return frames


def read_ground_truth(path: Path, considered_only: bool = True) -> list[GroundTruthRecord]:
    """
    Parse a ground-truth file (9 fields) or a result file (10 fields).

    Args:
        path: File to read
        considered_only: Drop records with consider flag 0, non-pedestrian class or id < 1
    """
    records: list[GroundTruthRecord] = []
    for lineno, line in _lines(path):
        f = _split(path, lineno, line, GT_FIELDS)
        frame = _integer(path, lineno, f, 0)
        if frame < 1:
            raise MalformedRecordError(path, lineno, 1, f"frame must be >= 1, got {frame}")
        w = _number(path, lineno, f, 4)
        h = _number(path, lineno, f, 5)
        if w < 0 or h < 0:
            raise MalformedRecordError(path, lineno, 5 if w < 0 else 6, "negative box size")
        record = GroundTruthRecord(
            frame=frame,
            identity=_integer(path, lineno, f, 1),
            box=BoundingBox(x=_number(path, lineno, f, 2), y=_number(path, lineno, f, 3), w=w, h=h),
            consider=_number(path, lineno, f, 6) != 0,
            class_id=_integer(path, lineno, f, 7),
            visibility=_number(path, lineno, f, 8),
        )
        if considered_only and not record.considered:
            continue
        records.append(record)
    return records


def format_result_line(frame_id: int, track_id: int, box: BoundingBox) -> str:
    return f"{frame_id},{track_id},{box.x:.2f},{box.y:.2f},{box.w:.2f},{box.h:.2f},1,-1,-1,-1\n"


def result_lines(results: Iterable[FrameResult]) -> Iterator[str]:
    for result in results:
        for track in result.tracks:
            yield format_result_line(result.frame_id, track.track_id, track.box)


def write_results(path: Path, results: Iterable[FrameResult]) -> int:
    """
    Write tracker output; returns the number of lines.

    Raises:
        InputError: the path cannot be written
    """
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            count = 0
            for line in result_lines(results):
                fh.write(line)
                count += 1
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc
    logger.info("wrote {} result lines to {}", count, path)
    return count


def write_detections(path: Path, records: Iterable[DetectionRecord]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for r in records:
                fh.write(
                    f"{r.frame},{r.id},{r.x:.2f},{r.y:.2f},{r.w:.2f},{r.h:.2f},{r.confidence:.4f},-1,-1,-1\n"
                )
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def write_ground_truth(path: Path, records: Iterable[GroundTruthRecord]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for r in records:
                b = r.box
                fh.write(
                    f"{r.frame},{r.identity},{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},"
                    f"{int(r.consider)},{r.class_id},{r.visibility:g}\n"
                )
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def read_sequence_info(sequence_dir: Path) -> SequenceInfo | None:
    """Parse ``seqinfo.ini``; ``None`` when the file is absent."""
    path = sequence_dir / "seqinfo.ini"
    if not path.is_file():
        return None
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
        section = parser["Sequence"]
        return SequenceInfo(
            name=section.get("name", sequence_dir.name),
            im_width=section.getint("imWidth"),
            im_height=section.getint("imHeight"),
            frame_rate=section.getfloat("frameRate", 30.0),
            seq_length=section.getint("seqLength"),
            im_ext=section.get("imExt", ".jpg"),
        )
    except (configparser.Error, KeyError, ValueError, TypeError) as exc:
        raise MalformedRecordError(path, 0, None, f"invalid sequence info: {exc}") from exc


def write_sequence_info(sequence_dir: Path, info: SequenceInfo) -> None:
    sequence_dir.mkdir(parents=True, exist_ok=True)
    text = (
        "[Sequence]\n"
        f"name={info.name}\n"
        f"imDir={IMAGE_DIR}\n"
        f"frameRate={info.frame_rate:g}\n"
        f"seqLength={info.seq_length}\n"
        f"imWidth={info.im_width}\n"
        f"imHeight={info.im_height}\n"
        f"imExt={info.im_ext}\n"
    )
    (sequence_dir / "seqinfo.ini").write_text(text, encoding="utf-8")


def frame_image_path(image_dir: Path, frame: int) -> Path | None:
    for suffix in IMAGE_SUFFIXES:
        candidate = image_dir / f"{frame:06d}{suffix}"
        if candidate.is_file():
            return candidate
    return None


def load_frame_image(image_dir: Path, frame: int) -> NDArray[np.uint8] | None:
    """
    Decode frame ``frame`` from ``image_dir`` (``000001.jpg`` / ``.png``).

    Returns:
        ``(H, W, 3)`` RGB array, or ``None`` when the directory or frame is absent

    Raises:
        FrameImageError: the file exists but cannot be decoded
    """
    if not image_dir.is_dir():
        return None
    path = frame_image_path(image_dir, frame)
    if path is None:
        return None
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise FrameImageError(path, str(exc)) from exc


def save_frame_image(image_dir: Path, frame: int, pixels: NDArray[np.uint8]) -> Path:
    image_dir.mkdir(parents=True, exist_ok=True)
    path = image_dir / f"{frame:06d}.png"
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8)).save(path)
    return path


@dataclass(frozen=True, slots=True)
class FingerprintSidecar:
    """Declared dimension and vectors keyed by ``(frame, detection index)``."""

    dimension: int
    table: dict[tuple[int, int], Fingerprint | None] = field(default_factory=dict)


def read_fingerprint_sidecar(path: Path) -> FingerprintSidecar:
    """
    Parse precomputed fingerprints: header ``#dim=F`` then ``frame,det_index,v1..vF``.

    ``det_index`` is the 0-based position of the detection in its frame of the
    detection file, before any confidence filtering.

    Raises:
        MalformedRecordError: missing header, wrong arity or non-numeric value
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or not lines[0].strip().startswith("#dim="):
        raise MalformedRecordError(path, 1, None, "missing '#dim=F' header")
    try:
        dim = int(lines[0].strip()[len("#dim="):])
    except ValueError:
        raise MalformedRecordError(path, 1, None, f"bad header {lines[0]!r}") from None
    if dim < 1:
        raise MalformedRecordError(path, 1, None, f"dimension must be positive, got {dim}")

    table: dict[tuple[int, int], Fingerprint | None] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        f = _split(path, lineno, line, (dim + 2,))
        key = (_integer(path, lineno, f, 0), _integer(path, lineno, f, 1))
        values = np.array([_number(path, lineno, f, c) for c in range(2, dim + 2)])
        table[key] = as_fingerprint(values, dim)
    logger.debug("read {} fingerprints of dimension {} from {}", len(table), dim, path)
    return FingerprintSidecar(dimension=dim, table=table)


def records_to_detections(
    per_frame: dict[int, list[DetectionRecord]],
) -> dict[int, list[Detection]]:
    return {frame: [r.to_detection() for r in recs] for frame, recs in per_frame.items()}
