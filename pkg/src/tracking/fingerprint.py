"""
Appearance fingerprints.

Embedding is split from comparison: every detection patch is embedded once
(linear in the number of detections) and only the cheap squared-cosine head
runs over all track/detection pairs. Providers implement ``embed``; the
histogram embedder is the deterministic default.
"""

from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from ..errors import FingerprintError, PatchOutOfBoundsError
from .base import Detection
from .geometry import BoundingBox

NULL_FINGERPRINT_COST = 0.5


class FingerprintConfig(BaseModel):
    """Embedding contract and buffering."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dimension: int = Field(default=100, ge=1, description="Fingerprint length F")
    patch_height: int = Field(default=60, ge=1)
    patch_width: int = Field(default=35, ge=1)
    buffer_frames: int = Field(default=45, ge=1, description="Frames per inference batch B")
    grid_rows: int = Field(default=2, ge=1)
    grid_cols: int = Field(default=2, ge=1)
    bins: int = Field(default=8, ge=2)


@dataclass(frozen=True, slots=True, eq=False)
class Fingerprint:
    """Fixed-length appearance vector with at least one nonzero component."""

    values: NDArray[np.float64]

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, slots=True, eq=False)
class Patch:
    """Resampled detection crop, ``(H, W, 3)`` in [0, 1]."""

    pixels: NDArray[np.float64]


def as_fingerprint(values: NDArray[np.float64], dimension: int | None = None) -> Fingerprint | None:
    """Wrap a raw vector; zero-norm or non-finite vectors become null (``None``)."""
    vec = np.asarray(values, dtype=np.float64).ravel()
    if dimension is not None and vec.shape[0] != dimension:
        raise FingerprintError(f"expected dimension {dimension}, got {vec.shape[0]}")
    if not np.all(np.isfinite(vec)) or not np.any(vec):
        return None
    return Fingerprint(values=vec)


def squared_cosine_similarity(a: Fingerprint, b: Fingerprint) -> float:
    """
    ``(a.b / (|a| |b|))**2`` in [0, 1].

    Parallel and antiparallel vectors are both similar (1.0).
    """
    if a.dimension != b.dimension:
        raise FingerprintError(f"dimension mismatch {a.dimension} != {b.dimension}")
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na == 0.0 or nb == 0.0:
        raise FingerprintError("zero-norm fingerprint")
    cos = float(np.dot(a.values, b.values)) / (na * nb)
    return min(cos * cos, 1.0)


def fingerprint_cost(a: Fingerprint | None, b: Fingerprint | None) -> float:
    if a is None or b is None:
        return NULL_FINGERPRINT_COST
    return 1.0 - squared_cosine_similarity(a, b)


def fingerprint_cost_matrix(
    tracks: Sequence[Fingerprint | None], detections: Sequence[Fingerprint | None]
) -> tuple[NDArray[np.float64], int]:
    """
    Vectorized ``fingerprint_cost`` over all pairs.

    Returns:
        ``(N, M)`` cost matrix and the number of squared-cosine evaluations.
    """
    costs = np.full((len(tracks), len(detections)), NULL_FINGERPRINT_COST)
    ti = [i for i, fp in enumerate(tracks) if fp is not None]
    di = [j for j, fp in enumerate(detections) if fp is not None]
    if not ti or not di:
        return costs, 0
    t = _unit_rows([fp for fp in tracks if fp is not None])
    d = _unit_rows([fp for fp in detections if fp is not None])
    if t.shape[1] != d.shape[1]:
        raise FingerprintError(f"dimension mismatch {t.shape[1]} != {d.shape[1]}")
    sim = np.minimum(np.square(t @ d.T), 1.0)
    costs[np.ix_(ti, di)] = 1.0 - sim
    return costs, len(ti) * len(di)


def _unit_rows(fps: Sequence[Fingerprint]) -> NDArray[np.float64]:
    m = np.stack([fp.values for fp in fps])
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def extract_patch(
    image: NDArray[np.generic], box: BoundingBox, height: int = 60, width: int = 35
) -> Patch:
    """
    Bilinearly resample the box region to ``(height, width, 3)``.

    Sample points are pixel centers. Points outside the image are zero.
    ``uint8`` images are scaled to [0, 1]; float images are taken as is.

    Raises:
        PatchOutOfBoundsError: the box does not overlap the image.
    """
    img_h, img_w = image.shape[:2]
    if (
        box.is_degenerate()
        or box.x + box.w <= 0.0
        or box.y + box.h <= 0.0
        or box.x >= img_w
        or box.y >= img_h
    ):
        raise PatchOutOfBoundsError(f"box {box} outside {img_w}x{img_h} image")

    pixels = image.astype(np.float64)
    if image.dtype == np.uint8:
        pixels /= 255.0

    xs = box.x + (np.arange(width) + 0.5) * (box.w / width) - 0.5
    ys = box.y + (np.arange(height) + 0.5) * (box.h / height) - 0.5
    x0, x1, fx, vx = _sample_axis(xs, img_w)
    y0, y1, fy, vy = _sample_axis(ys, img_h)

    fx = fx[None, :, None]
    fy = fy[:, None, None]
    top = pixels[y0][:, x0] * (1.0 - fx) + pixels[y0][:, x1] * fx
    bottom = pixels[y1][:, x0] * (1.0 - fx) + pixels[y1][:, x1] * fx
    out = top * (1.0 - fy) + bottom * fy
    out *= (vy[:, None] & vx[None, :])[:, :, None]
    return Patch(pixels=out)


def _sample_axis(
    coords: NDArray[np.float64], size: int
) -> tuple[NDArray[np.intp], NDArray[np.intp], NDArray[np.float64], NDArray[np.bool_]]:
    valid = (coords >= -0.5) & (coords <= size - 0.5)
    clamped = np.clip(coords, 0.0, size - 1)
    lo = np.floor(clamped).astype(np.intp)
    hi = np.minimum(lo + 1, size - 1)
    return lo, hi, clamped - lo, valid


class FingerprintProvider(ABC):
    """
    Backbone half of a siamese matcher: patch in, fingerprint out.

    Subclasses implement ``embed`` for one patch; ``embed_batch`` counts
    evaluations so callers can check the one-embedding-per-detection contract.
    """

    def __init__(self, dimension: int) -> None:
        self.dimension = dimension
        self.evaluations = 0
        self.invocations = 0

    @abstractmethod
    def embed(self, patch: Patch) -> NDArray[np.float64]:
        """
        Embed one patch.

        Returns:
            Vector of length ``dimension``; must be a pure function of the patch.
        """
        ...

    def embed_batch(self, patches: Sequence[Patch]) -> list[Fingerprint | None]:
        """Embed patches in order; any failure nulls the whole batch."""
        if not patches:
            return []
        self.invocations += 1
        try:
            vectors = []
            for patch in patches:
                vectors.append(self.embed(patch))
                self.evaluations += 1
            return [as_fingerprint(v, self.dimension) for v in vectors]
        except Exception as exc:
            logger.warning(
                "{} failed on a batch of {} patches, using null fingerprints: {}",
                type(self).__name__,
                len(patches),
                exc,
            )
            return [None] * len(patches)


def embed_batch(provider: FingerprintProvider, patches: Sequence[Patch]) -> list[Fingerprint | None]:
    return provider.embed_batch(patches)


class HistogramEmbedder(FingerprintProvider):
    """
    Spatial color histogram: ``grid_rows x grid_cols`` cells, 3 channels,
    ``bins`` intensity bins each, truncated or zero-padded to ``dimension``
    and L2-normalized.
    """

    def __init__(self, dimension: int = 100, grid: tuple[int, int] = (2, 2), bins: int = 8) -> None:
        super().__init__(dimension)
        self.grid = grid
        self.bins = bins
        self._raw_length = grid[0] * grid[1] * 3 * bins
        self._offsets: dict[tuple[int, int], NDArray[np.intp]] = {}

    @classmethod
    def from_config(cls, cfg: FingerprintConfig) -> "HistogramEmbedder":
        return cls(dimension=cfg.dimension, grid=(cfg.grid_rows, cfg.grid_cols), bins=cfg.bins)

    def _cell_offsets(self, h: int, w: int) -> NDArray[np.intp]:
        key = (h, w)
        if key not in self._offsets:
            rows, cols = self.grid
            r = np.minimum(np.arange(h) * rows // h, rows - 1)
            c = np.minimum(np.arange(w) * cols // w, cols - 1)
            cell = r[:, None] * cols + c[None, :]
            self._offsets[key] = (cell[:, :, None] * 3 + np.arange(3)) * self.bins
        return self._offsets[key]

    def embed(self, patch: Patch) -> NDArray[np.float64]:
        px = patch.pixels
        h, w = px.shape[:2]
        binned = np.clip((px * self.bins).astype(np.intp), 0, self.bins - 1)
        index = self._cell_offsets(h, w) + binned
        hist = np.bincount(index.ravel(), minlength=self._raw_length).astype(np.float64)
        vec = np.zeros(self.dimension)
        n = min(self.dimension, self._raw_length)
        vec[:n] = hist[:n]
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec


@dataclass(slots=True)
class BufferedFrame:
    """One frame waiting for its fingerprints."""

    frame_id: int
    detections: list[Detection]
    patches: list[Patch | None] = field(default_factory=list)


def buffered_inference(
    buffer: Sequence[BufferedFrame], provider: FingerprintProvider
) -> dict[tuple[int, int], Fingerprint | None]:
    """
    Embed every patch of every buffered frame in one batch.

    Returns:
        Fingerprint per ``(frame_id, detection index)``; missing patches map
        to ``None``.
    """
    keys: list[tuple[int, int]] = []
    patches: list[Patch] = []
    out: dict[tuple[int, int], Fingerprint | None] = {}
    for frame in buffer:
        for index in range(len(frame.detections)):
            patch = frame.patches[index] if index < len(frame.patches) else None
            if patch is None:
                out[(frame.frame_id, index)] = None
            else:
                keys.append((frame.frame_id, index))
                patches.append(patch)
    for key, fp in zip(keys, provider.embed_batch(patches), strict=True):
        out[key] = fp
    return out
