"""Bounding-box arithmetic: IoU, centers and normalized image distance."""

import math

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

Point = tuple[float, float]


class BoundingBox(BaseModel):
    """Axis-aligned pixel rectangle, top-left convention, real-valued."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    x: float
    y: float
    w: float = Field(ge=0.0)
    h: float = Field(ge=0.0)

    def area(self) -> float:
        return self.w * self.h

    def center(self) -> Point:
        return center(self)

    def is_degenerate(self) -> bool:
        return self.w <= 0.0 or self.h <= 0.0

    def shifted(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(x=self.x + dx, y=self.y + dy, w=self.w, h=self.h)

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return cls(x=cx - w / 2.0, y=cy - h / 2.0, w=w, h=h)


class ImageGeometry(BaseModel):
    """Frame size in pixels; the diagonal normalizes pixel distances."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    width: float = Field(gt=0.0)
    height: float = Field(gt=0.0)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 when the union is empty."""
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def center(b: BoundingBox) -> Point:
    return (b.x + b.w / 2.0, b.y + b.h / 2.0)


def normalized_distance(p: Point, q: Point, g: ImageGeometry) -> float:
    """Euclidean distance over the image diagonal, clamped to [0, 1]."""
    d = math.hypot(p[0] - q[0], p[1] - q[1]) / g.diagonal
    return min(d, 1.0)


def boxes_to_array(boxes: list[BoundingBox]) -> NDArray[np.float64]:
    """Stack boxes into an (N, 4) ``x, y, w, h`` array."""
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([[b.x, b.y, b.w, b.h] for b in boxes], dtype=np.float64)


def iou_matrix(a: NDArray[np.float64], b: NDArray[np.float64]) -> NDArray[np.float64]:
    """Pairwise IoU of (N, 4) and (M, 4) ``x, y, w, h`` arrays."""
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)), dtype=np.float64)
    ax1, ay1 = a[:, 0:1], a[:, 1:2]
    ax2, ay2 = ax1 + a[:, 2:3], ay1 + a[:, 3:4]
    bx1, by1 = b[:, 0], b[:, 1]
    bx2, by2 = bx1 + b[:, 2], by1 + b[:, 3]
    iw = np.clip(np.minimum(ax2, bx2) - np.maximum(ax1, bx1), 0.0, None)
    ih = np.clip(np.minimum(ay2, by2) - np.maximum(ay1, by1), 0.0, None)
    inter = iw * ih
    union = (a[:, 2:3] * a[:, 3:4]) + (b[:, 2] * b[:, 3]) - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def distance_matrix(
    a: NDArray[np.float64], b: NDArray[np.float64], g: ImageGeometry
) -> NDArray[np.float64]:
    """Pairwise normalized center distance of (N, 4) and (M, 4) box arrays."""
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)), dtype=np.float64)
    ac = a[:, :2] + a[:, 2:4] / 2.0
    bc = b[:, :2] + b[:, 2:4] / 2.0
    diff = ac[:, None, :] - bc[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1]) / g.diagonal
    return np.minimum(d, 1.0)
