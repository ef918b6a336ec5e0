"""Track-to-detection association: multi-criteria cost, Hungarian solve, gating."""

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import linear_sum_assignment

from .geometry import ImageGeometry, distance_matrix, iou_matrix

Pair = tuple[int, int]


class AssociationWeights(BaseModel):
    """Weights of the distance and fingerprint terms, and the gate threshold."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False, extra="forbid")

    alpha: float = Field(default=1.0, ge=0.0, description="Weight of normalized distance")
    beta: float = Field(default=1.0, ge=0.0, description="Weight of fingerprint cost")
    gate: float = Field(default=1.5, gt=0.0, description="Max accepted combined cost")


@dataclass(frozen=True, slots=True, eq=False)
class CostMatrix:
    """
    ``entries = iou_cost + alpha * distance_cost + beta * fingerprint_cost``.

    The components are kept for diagnostics.
    """

    entries: NDArray[np.float64]
    iou_cost: NDArray[np.float64]
    distance_cost: NDArray[np.float64]
    fingerprint_cost: NDArray[np.float64]
    weights: AssociationWeights

    @property
    def shape(self) -> tuple[int, int]:
        n, m = self.entries.shape
        return int(n), int(m)


class AssociationResult(BaseModel):
    """Gated assignment; pairs plus the leftovers partition both index ranges."""

    model_config = ConfigDict(frozen=True)

    pairs: list[Pair] = Field(default_factory=list)
    unassigned_tracks: list[int] = Field(default_factory=list)
    unassigned_detections: list[int] = Field(default_factory=list)


def build_cost_matrix(
    track_boxes: NDArray[np.float64],
    detection_boxes: NDArray[np.float64],
    weights: AssociationWeights,
    geometry: ImageGeometry,
    fingerprint_costs: NDArray[np.float64] | None = None,
) -> CostMatrix:
    """
    Build the N x M cost matrix.

    Args:
        track_boxes: (N, 4) predicted track boxes, ``x, y, w, h``
        detection_boxes: (M, 4) detection boxes
        weights: alpha, beta and gate
        geometry: image size for distance normalization
        fingerprint_costs: (N, M) per-pair fingerprint costs; neutral 0.5 when omitted
    """
    n, m = len(track_boxes), len(detection_boxes)
    iou_cost = 1.0 - iou_matrix(track_boxes, detection_boxes)
    distance_cost = distance_matrix(track_boxes, detection_boxes, geometry)
    if fingerprint_costs is None:
        fingerprint_costs = np.full((n, m), 0.5)
    entries = iou_cost + weights.alpha * distance_cost + weights.beta * fingerprint_costs
    return CostMatrix(
        entries=entries,
        iou_cost=iou_cost,
        distance_cost=distance_cost,
        fingerprint_cost=fingerprint_costs,
        weights=weights,
    )


def solve_assignment(cost: CostMatrix | NDArray[np.float64]) -> list[Pair]:
    """
    Minimum-cost matching of size ``min(N, M)``.

    Rectangular matrices are padded to square with ``10 * (max + 1)`` so
    padded cells are never preferred; padded matches are dropped.
    """
    entries = cost.entries if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=np.float64)
    n, m = entries.shape
    if n == 0 or m == 0:
        return []
    size = max(n, m)
    if n == m:
        padded = entries
    else:
        padded = np.full((size, size), 10.0 * (float(entries.max()) + 1.0))
        padded[:n, :m] = entries
    rows, cols = linear_sum_assignment(padded)
    return [(int(r), int(c)) for r, c in zip(rows, cols, strict=True) if r < n and c < m]


def gate(matching: list[Pair], cost: CostMatrix, threshold: float) -> AssociationResult:
    """Drop pairs whose cost is strictly above ``threshold``."""
    n, m = cost.shape
    pairs = [(t, d) for t, d in matching if cost.entries[t, d] <= threshold]
    matched_tracks = {t for t, _ in pairs}
    matched_detections = {d for _, d in pairs}
    return AssociationResult(
        pairs=sorted(pairs),
        unassigned_tracks=[t for t in range(n) if t not in matched_tracks],
        unassigned_detections=[d for d in range(m) if d not in matched_detections],
    )


def associate(cost: CostMatrix) -> AssociationResult:
    """Solve then gate with the matrix's own threshold."""
    return gate(solve_assignment(cost), cost, cost.weights.gate)


def total_cost(cost: CostMatrix | NDArray[np.float64], pairs: list[Pair]) -> float:
    entries = cost.entries if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=np.float64)
    return float(sum(entries[t, d] for t, d in sorted(pairs)))
