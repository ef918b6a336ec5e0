"""
CLEAR-MOT and identity scores.

Ground truth and hypotheses are both ``GroundTruthRecord`` lists (a result
file reads as ground truth with class -1). Frames are matched at
``IoU >= threshold``; correspondences carry over from the last frame a ground
truth identity was matched while they stay above threshold.
"""

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel
from scipy.optimize import linear_sum_assignment

from ..tracking.geometry import iou_matrix
from .mot_io import GroundTruthRecord

DEFAULT_IOU_THRESHOLD = 0.5


@dataclass(slots=True)
class FrameBoxes:
    ids: NDArray[np.int64]
    boxes: NDArray[np.float64]

    @classmethod
    def empty(cls) -> "FrameBoxes":
        return cls(np.zeros(0, dtype=np.int64), np.zeros((0, 4)))

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(slots=True)
class FrameMatching:
    """Matches of one frame as ``(gt_id, hyp_id, iou)``."""

    pairs: list[tuple[int, int, float]] = field(default_factory=list)
    carried: int = 0
    switches: int = 0

    @property
    def hyp_for(self) -> dict[int, int]:
        return {g: h for g, h, _ in self.pairs}


class ClearMot(BaseModel):
    """Raw CLEAR-MOT counts plus the derived scores."""

    gt: int = 0
    hypotheses: int = 0
    matches: int = 0
    false_positives: int = 0
    misses: int = 0
    id_switches: int = 0
    iou_sum: float = 0.0

    @property
    def mota(self) -> float | None:
        if self.gt == 0:
            return None
        return 1.0 - (self.misses + self.false_positives + self.id_switches) / self.gt

    @property
    def motp(self) -> float | None:
        return self.iou_sum / self.matches if self.matches else None


class IdentityScore(BaseModel):
    idtp: int = 0
    idfp: int = 0
    idfn: int = 0

    @property
    def idf1(self) -> float | None:
        denom = 2 * self.idtp + self.idfp + self.idfn
        return 2 * self.idtp / denom if denom else None


class ScoreReport(BaseModel):
    """Everything ``evaluate`` reports; undefined scores are ``None``."""

    mota: float | None
    motp: float | None
    idf1: float | None
    id_switches: int
    false_positives: int
    misses: int
    gt: int
    matches: int
    idtp: int
    idfp: int
    idfn: int
    frames: int

    @property
    def defined(self) -> bool:
        return self.mota is not None and self.idf1 is not None

    def to_table(self) -> str:
        rows = [
            ("MOTA", _fmt(self.mota)),
            ("MOTP", _fmt(self.motp)),
            ("IDF1", _fmt(self.idf1)),
            ("IDSW", str(self.id_switches)),
            ("FP", str(self.false_positives)),
            ("FN", str(self.misses)),
            ("GT", str(self.gt)),
            ("IDTP", str(self.idtp)),
            ("IDFP", str(self.idfp)),
            ("IDFN", str(self.idfn)),
            ("frames", str(self.frames)),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v:>10}" for k, v in rows)

    def to_summary_line(self) -> str:
        return (
            f"mota={_fmt(self.mota)},motp={_fmt(self.motp)},idf1={_fmt(self.idf1)},"
            f"idsw={self.id_switches},fp={self.false_positives},fn={self.misses},gt={self.gt}"
        )


def _fmt(value: float | None) -> str:
    return "undefined" if value is None else f"{value:.4f}"


def group_by_frame(records: Iterable[GroundTruthRecord]) -> dict[int, FrameBoxes]:
    ids: dict[int, list[int]] = {}
    boxes: dict[int, list[list[float]]] = {}
    for r in records:
        ids.setdefault(r.frame, []).append(r.identity)
        boxes.setdefault(r.frame, []).append([r.box.x, r.box.y, r.box.w, r.box.h])
    return {
        f: FrameBoxes(np.asarray(ids[f], dtype=np.int64), np.asarray(boxes[f], dtype=np.float64))
        for f in ids
    }


def optimal_matching(
    overlaps: NDArray[np.float64], threshold: float = DEFAULT_IOU_THRESHOLD
) -> list[tuple[int, int]]:
    """
    Match rows to columns maximizing the number of pairs with overlap at or
    above ``threshold``, ties broken by the largest total overlap.
    """
    if overlaps.size == 0:
        return []
    valid = overlaps >= threshold
    if not valid.any():
        return []
    # any extra pair outweighs every possible overlap total
    bonus = float(min(overlaps.shape) + 1)
    cost = np.where(valid, -(bonus + overlaps), 0.0)
    rows, cols = linear_sum_assignment(cost)
    return [(int(r), int(c)) for r, c in zip(rows, cols, strict=True) if valid[r, c]]


def match_frame(
    gt: FrameBoxes,
    hyp: FrameBoxes,
    last_match: dict[int, int],
    threshold: float = DEFAULT_IOU_THRESHOLD,
) -> FrameMatching:
    """
    Match one frame. ``last_match`` maps gt id to the hypothesis id it was
    last matched to and is updated in place.
    """
    result = FrameMatching()
    if len(gt) == 0 or len(hyp) == 0:
        return result
    overlaps = iou_matrix(gt.boxes, hyp.boxes)
    hyp_index = {int(h): j for j, h in enumerate(hyp.ids)}

    used_gt: set[int] = set()
    used_hyp: set[int] = set()
    for i, g in enumerate(gt.ids):
        prev = last_match.get(int(g))
        j = hyp_index.get(prev) if prev is not None else None
        if j is not None and j not in used_hyp and overlaps[i, j] >= threshold:
            result.pairs.append((int(g), int(hyp.ids[j]), float(overlaps[i, j])))
            used_gt.add(i)
            used_hyp.add(j)
            result.carried += 1

    free_gt = [i for i in range(len(gt)) if i not in used_gt]
    free_hyp = [j for j in range(len(hyp)) if j not in used_hyp]
    sub = overlaps[np.ix_(free_gt, free_hyp)]
    for r, c in optimal_matching(sub, threshold):
        i, j = free_gt[r], free_hyp[c]
        g, h = int(gt.ids[i]), int(hyp.ids[j])
        if g in last_match and last_match[g] != h:
            result.switches += 1
        result.pairs.append((g, h, float(overlaps[i, j])))

    for g, h, _ in result.pairs:
        last_match[g] = h
    return result


def clear_mot(
    gt: Sequence[GroundTruthRecord],
    hypotheses: Sequence[GroundTruthRecord],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> ClearMot:
    """Count matches, misses, false positives and identity switches."""
    gt_frames = group_by_frame(gt)
    hyp_frames = group_by_frame(hypotheses)
    counts = ClearMot()
    last_match: dict[int, int] = {}
    for frame in sorted(gt_frames.keys() | hyp_frames.keys()):
        g = gt_frames.get(frame, FrameBoxes.empty())
        h = hyp_frames.get(frame, FrameBoxes.empty())
        m = match_frame(g, h, last_match, iou_threshold)
        counts.gt += len(g)
        counts.hypotheses += len(h)
        counts.matches += len(m.pairs)
        counts.misses += len(g) - len(m.pairs)
        counts.false_positives += len(h) - len(m.pairs)
        counts.id_switches += m.switches
        counts.iou_sum += sum(iou for _, _, iou in m.pairs)
    return counts


def idf1(
    gt: Sequence[GroundTruthRecord],
    hypotheses: Sequence[GroundTruthRecord],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> IdentityScore:
    """Identity precision/recall under the best global id-to-id matching."""
    gt_frames = group_by_frame(gt)
    hyp_frames = group_by_frame(hypotheses)
    gt_ids = sorted({r.identity for r in gt})
    hyp_ids = sorted({r.identity for r in hypotheses})
    total_gt = len(gt)
    total_hyp = len(hypotheses)
    if not gt_ids or not hyp_ids:
        return IdentityScore(idtp=0, idfp=total_hyp, idfn=total_gt)

    g_index = {g: i for i, g in enumerate(gt_ids)}
    h_index = {h: j for j, h in enumerate(hyp_ids)}
    overlap = np.zeros((len(gt_ids), len(hyp_ids)), dtype=np.int64)
    for frame, g in gt_frames.items():
        h = hyp_frames.get(frame)
        if h is None:
            continue
        rows, cols = np.nonzero(iou_matrix(g.boxes, h.boxes) >= iou_threshold)
        gi = np.array([g_index[int(x)] for x in g.ids[rows]], dtype=np.intp)
        hj = np.array([h_index[int(x)] for x in h.ids[cols]], dtype=np.intp)
        np.add.at(overlap, (gi, hj), 1)

    rows, cols = linear_sum_assignment(overlap, maximize=True)
    idtp = int(overlap[rows, cols].sum())
    return IdentityScore(idtp=idtp, idfp=total_hyp - idtp, idfn=total_gt - idtp)


def evaluate(
    gt: Sequence[GroundTruthRecord],
    hypotheses: Sequence[GroundTruthRecord],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> ScoreReport:
    counts = clear_mot(gt, hypotheses, iou_threshold)
    ident = idf1(gt, hypotheses, iou_threshold)
    frames = len({r.frame for r in gt} | {r.frame for r in hypotheses})
    return ScoreReport(
        mota=counts.mota,
        motp=counts.motp,
        idf1=ident.idf1 if counts.gt else None,
        id_switches=counts.id_switches,
        false_positives=counts.false_positives,
        misses=counts.misses,
        gt=counts.gt,
        matches=counts.matches,
        idtp=ident.idtp,
        idfp=ident.idfp,
        idfn=ident.idfn,
        frames=frames,
    )
