"""Class-wise average precision over 3D instances.

Instances are compared at the point level: both point sets are voxelized on
a shared grid and IoU is taken over the occupied-voxel sets. AP follows the
usual detection recipe: predictions sorted by descending score are greedily
matched to the highest-IoU unmatched ground-truth instance of the same class
at or above the IoU threshold, and AP is the area under the monotone
(non-increasing) precision envelope over recall.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .types import GroundTruthInstance, ObjectCloud, SceneInstances

MAP_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class EvalConfig:
    voxel_size: float = 0.02
    map_thresholds: tuple[float, ...] = MAP_THRESHOLDS

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise ValueError(f"voxel_size must be positive, got {self.voxel_size}")


@dataclass(frozen=True)
class ClassAP:
    ap: float
    ap50: float
    ap25: float


@dataclass(frozen=True)
class ClassCounts:
    num_gt: int
    num_pred: int
    tp50: int
    tp25: int


@dataclass
class EvalReport:
    per_class_ap: dict[str, ClassAP]
    map: float
    map50: float
    map25: float
    matched_counts: dict[str, ClassCounts] = field(default_factory=dict)
    num_scenes: int = 1


def _voxel_keys(points: np.ndarray, voxel_size: float) -> set[tuple[int, int, int]]:
    keys = np.floor(np.asarray(points, dtype=np.float64).reshape(-1, 3) / voxel_size).astype(np.int64)
    keys = np.unique(keys, axis=0)
    return set(map(tuple, keys))


def instance_iou(pred: ObjectCloud, gt: GroundTruthInstance, voxel_size: float = 0.02) -> float:
    """Point-level IoU: occupied-voxel overlap of the two point sets on one grid."""
    if voxel_size <= 0:
        raise ValueError(f"voxel_size must be positive, got {voxel_size}")
    a = _voxel_keys(pred.points, voxel_size)
    b = _voxel_keys(gt.points, voxel_size)
    if not a and not b:
        return 0.0
    inter = len(a & b)
    union = len(a) + len(b) - inter
    return inter / union


def _greedy_match(
    scored_ious: list[tuple[float, np.ndarray]], num_gt: int, iou_threshold: float
) -> np.ndarray:
    """True-positive flags in score order (stable sort, so ties keep input order)."""
    order = sorted(range(len(scored_ious)), key=lambda i: -scored_ious[i][0])
    taken = np.zeros(num_gt, dtype=bool)
    tp = np.zeros(len(scored_ious), dtype=bool)
    for rank, idx in enumerate(order):
        ious = np.asarray(scored_ious[idx][1], dtype=np.float64)
        best_gt = -1
        best_iou = -1.0
        for g in range(num_gt):
            if taken[g] or ious[g] < iou_threshold:
                continue
            if ious[g] > best_iou:
                best_iou = ious[g]
                best_gt = g
        if best_gt >= 0:
            taken[best_gt] = True
            tp[rank] = True
    return tp


def average_precision(
    scored_ious: list[tuple[float, np.ndarray]], num_gt: int, iou_threshold: float
) -> float:
    """AP for one class: area under the monotone precision envelope.

    ``scored_ious`` holds one (score, per-GT IoU row) pair per prediction.
    Each GT can absorb one prediction; unmatched predictions count as false
    positives at every recall they touch.
    """
    if num_gt <= 0:
        raise ValueError("average_precision needs at least one ground-truth instance")
    n = len(scored_ious)
    if n == 0:
        return 0.0
    tp = _greedy_match(scored_ious, num_gt, iou_threshold)
    cum_tp = np.cumsum(tp)
    recall = cum_tp / num_gt
    precision = cum_tp / np.arange(1, n + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    ap = 0.0
    prev_recall = 0.0
    for k in range(n):
        ap += (recall[k] - prev_recall) * envelope[k]
        prev_recall = recall[k]
    return float(ap)


def evaluate_scene(
    pred: SceneInstances, gt: list[GroundTruthInstance], config: EvalConfig = EvalConfig()
) -> EvalReport:
    """Score predictions against ground truth for one scene.

    AP is reported at IoU 0.25 and 0.50, and averaged over the 0.50:0.05:0.95
    threshold ladder for the headline number. The class mean runs over classes
    with at least one GT instance; predictions for classes absent from the GT
    do not contribute.
    """
    if not gt:
        raise ValueError("no ground-truth instances: nothing to evaluate")
    classes = sorted({g.label for g in gt})
    per_class: dict[str, ClassAP] = {}
    counts: dict[str, ClassCounts] = {}
    for cls in classes:
        gts = [g for g in gt if g.label == cls]
        preds = [(cloud, box) for cloud, box in pred.instances if cloud.label == cls]
        scored = [
            (cloud.score, np.array([instance_iou(cloud, g, config.voxel_size) for g in gts]))
            for cloud, _ in preds
        ]
        ap50 = average_precision(scored, len(gts), 0.50) if scored else 0.0
        ap25 = average_precision(scored, len(gts), 0.25) if scored else 0.0
        if scored:
            ap = float(np.mean([average_precision(scored, len(gts), t) for t in config.map_thresholds]))
        else:
            ap = 0.0
        per_class[cls] = ClassAP(ap, ap50, ap25)
        counts[cls] = ClassCounts(
            num_gt=len(gts),
            num_pred=len(preds),
            tp50=int(_greedy_match(scored, len(gts), 0.50).sum()) if scored else 0,
            tp25=int(_greedy_match(scored, len(gts), 0.25).sum()) if scored else 0,
        )
    map_ = float(np.mean([c.ap for c in per_class.values()]))
    map50 = float(np.mean([c.ap50 for c in per_class.values()]))
    map25 = float(np.mean([c.ap25 for c in per_class.values()]))
    # Sanity: a stricter threshold can only lose matches.
    if not (map25 >= map50 - 1e-12 and map50 >= map_ - 1e-12):
        raise AssertionError(f"threshold monotonicity violated: {map25} {map50} {map_}")
    return EvalReport(per_class, map_, map50, map25, counts)


def macro_average(reports: list[EvalReport]) -> EvalReport:
    """Macro-average scene reports: scalar means over scenes, per-class means over the scenes containing the class."""
    if not reports:
        raise ValueError("no reports to average")
    if len(reports) == 1:
        return reports[0]
    classes = sorted({c for r in reports for c in r.per_class_ap})
    per_class = {}
    counts: dict[str, ClassCounts] = {}
    for cls in classes:
        rows = [r.per_class_ap[cls] for r in reports if cls in r.per_class_ap]
        per_class[cls] = ClassAP(
            float(np.mean([x.ap for x in rows])),
            float(np.mean([x.ap50 for x in rows])),
            float(np.mean([x.ap25 for x in rows])),
        )
        crows = [r.matched_counts[cls] for r in reports if cls in r.matched_counts]
        counts[cls] = ClassCounts(
            sum(c.num_gt for c in crows),
            sum(c.num_pred for c in crows),
            sum(c.tp50 for c in crows),
            sum(c.tp25 for c in crows),
        )
    return EvalReport(
        per_class,
        float(np.mean([r.map for r in reports])),
        float(np.mean([r.map50 for r in reports])),
        float(np.mean([r.map25 for r in reports])),
        counts,
        num_scenes=len(reports),
    )


def format_report(report: EvalReport, voxel_size: float = 0.02) -> str:
    """Render the report as a plain-text table (values x100)."""
    lines = [
        f"# instance segmentation report (macro-averaged over {report.num_scenes} scene(s))",
        f"# point-level IoU on a {voxel_size:g} m voxel grid",
        f"{'class':<20} {'mAP':>7} {'mAP50':>7} {'mAP25':>7} {'gt':>5} {'pred':>5} {'tp50':>5} {'tp25':>5}",
    ]
    for cls in sorted(report.per_class_ap):
        c = report.per_class_ap[cls]
        m = report.matched_counts.get(cls, ClassCounts(0, 0, 0, 0))
        lines.append(
            f"{cls:<20} {100 * c.ap:>7.1f} {100 * c.ap50:>7.1f} {100 * c.ap25:>7.1f}"
            f" {m.num_gt:>5d} {m.num_pred:>5d} {m.tp50:>5d} {m.tp25:>5d}"
        )
    lines.append(
        f"{'all':<20} {100 * report.map:>7.1f} {100 * report.map50:>7.1f} {100 * report.map25:>7.1f}"
    )
    return "\n".join(lines) + "\n"
