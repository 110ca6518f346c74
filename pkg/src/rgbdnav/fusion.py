"""Cross-view instance fusion via class-aware box IoU merging."""
from __future__ import annotations

import numpy as np

from .projection import box_from_points
from .types import Box3D, ObjectCloud, SceneInstances


def iou_3d(a: Box3D, b: Box3D) -> float:
    """Intersection over union of two axis-aligned boxes.

    Disjoint boxes score 0. A zero-volume box scores 0 against everything
    except an identical box, which scores 1.
    """
    va = a.volume
    vb = b.volume
    if va == 0.0 or vb == 0.0:
        same = np.array_equal(a.min_corner, b.min_corner) and np.array_equal(a.max_corner, b.max_corner)
        return 1.0 if same else 0.0
    overlap = np.minimum(a.max_corner, b.max_corner) - np.maximum(a.min_corner, b.min_corner)
    inter = float(np.prod(np.maximum(overlap, 0.0)))
    return inter / (va + vb - inter)


def voxel_downsample(points: np.ndarray, voxel_size: float) -> np.ndarray:
    """Keep the first point falling in each voxel, preserving input order."""
    if voxel_size <= 0:
        raise ValueError(f"voxel_size must be positive, got {voxel_size}")
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if p.shape[0] == 0:
        return p
    keys = np.floor(p / voxel_size).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return p[np.sort(first)]


def _merge_pair(
    acc: tuple[ObjectCloud, Box3D], new: tuple[ObjectCloud, Box3D], voxel_size: float
) -> tuple[ObjectCloud, Box3D]:
    a, b = acc[0], new[0]
    points = voxel_downsample(np.vstack([a.points, b.points]), voxel_size)
    cloud = ObjectCloud(points, a.label, max(a.score, b.score), a.source_frames | b.source_frames)
    return cloud, box_from_points(points)


def _fold(
    instances: list[tuple[ObjectCloud, Box3D]], merge_threshold: float, voxel_size: float
) -> list[tuple[ObjectCloud, Box3D]]:
    acc: list[tuple[ObjectCloud, Box3D]] = []
    for inst in instances:
        cloud, box = inst
        for i, (other_cloud, other_box) in enumerate(acc):
            if other_cloud.label == cloud.label and iou_3d(other_box, box) > merge_threshold:
                acc[i] = _merge_pair(acc[i], inst, voxel_size)
                break
        else:
            acc.append(inst)
    return acc


def merge_instances(
    views: list[list[tuple[ObjectCloud, Box3D]]],
    merge_threshold: float = 0.8,
    voxel_size: float = 0.02,
) -> SceneInstances:
    """Greedy agglomeration of per-view instances into scene instances.

    Views are folded in input order; an incoming instance merges into the
    first existing same-class instance whose box IoU exceeds the threshold
    (clouds concatenated and voxel-deduplicated, box recomputed, score =
    max), otherwise it is appended. Folding repeats until a pass merges
    nothing, so transitive overlap chains collapse regardless of input
    order and no surviving same-class pair exceeds the threshold.
    """
    if not (0.0 < merge_threshold <= 1.0):
        raise ValueError(f"merge_threshold must be in (0, 1], got {merge_threshold}")
    current = [inst for view in views for inst in view]
    while True:
        folded = _fold(current, merge_threshold, voxel_size)
        if len(folded) == len(current):
            return SceneInstances(folded)
        current = folded
