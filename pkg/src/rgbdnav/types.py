"""Core domain types shared across the geometry pipeline.

World frame is right-handed with z up (ground plane = xy). Camera frame is
x right, y down, z forward; depth values are the camera-frame z coordinate
in meters, 0 marking invalid pixels. 2D boxes are half-open pixel rectangles
[x1, x2) x [y1, y2): an integer pixel (u, v) is inside iff x1 <= u < x2 and
y1 <= v < y2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROTATION_TOL = 1e-6


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole calibration: focal lengths and principal point, in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not (0 <= self.cx < self.width):
            raise ValueError(f"principal point cx={self.cx} outside [0, {self.width})")
        if not (0 <= self.cy < self.height):
            raise ValueError(f"principal point cy={self.cy} outside [0, {self.height})")


@dataclass(frozen=True)
class CameraPose:
    """Camera-to-world rigid transform: world_point = rotation @ cam_point + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if not np.allclose(r.T @ r, np.eye(3), atol=ROTATION_TOL):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > ROTATION_TOL:
            raise ValueError(f"rotation determinant {np.linalg.det(r):.9f} != +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "CameraPose":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError(f"pose matrix must be 4x4, got {m.shape}")
        if not np.allclose(m[3], [0.0, 0.0, 0.0, 1.0], atol=1e-9):
            raise ValueError(f"pose matrix last row must be [0 0 0 1], got {m[3]}")
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


@dataclass(frozen=True)
class DepthFrame:
    """One aligned depth view: H x W depths in meters plus calibration and pose."""

    frame_id: str
    depth: np.ndarray
    intrinsics: CameraIntrinsics
    pose: CameraPose


@dataclass(frozen=True)
class Detection2D:
    """A scored, labeled 2D box (x1, y1, x2, y2) in pixel coordinates."""

    box: tuple[float, float, float, float]
    score: float
    label: str

    def __post_init__(self):
        x1, y1, x2, y2 = self.box
        if not (x1 < x2 and y1 < y2):
            raise ValueError(f"degenerate box {self.box}")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class InstanceMask:
    """Binary pixel mask for one detection; bitmap has full image shape."""

    bitmap: np.ndarray
    detection: Detection2D

    def pixel_count(self) -> int:
        return int(np.count_nonzero(self.bitmap))


@dataclass(frozen=True)
class ObjectCloud:
    """World-frame points for one object instance."""

    points: np.ndarray
    label: str
    score: float
    source_frames: frozenset[str] = frozenset()

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if pts.size and not np.all(np.isfinite(pts)):
            raise ValueError(f"non-finite coordinates in cloud '{self.label}'")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "source_frames", frozenset(self.source_frames))


@dataclass(frozen=True)
class Box3D:
    """Axis-aligned world-frame box given by componentwise min/max corners."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=np.float64).reshape(3)
        hi = np.asarray(self.max_corner, dtype=np.float64).reshape(3)
        if np.any(lo > hi):
            raise ValueError(f"min corner {lo} exceeds max corner {hi}")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min_corner + self.max_corner)

    @property
    def volume(self) -> float:
        return float(np.prod(self.max_corner - self.min_corner))


@dataclass
class SceneInstances:
    """Scene-level fused instances: (cloud, box) pairs carrying label and score."""

    instances: list[tuple[ObjectCloud, Box3D]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.instances)


@dataclass(frozen=True)
class GroundTruthInstance:
    """Reference object instance: label plus world-frame points."""

    label: str
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if pts.shape[0] == 0:
            raise ValueError(f"ground-truth instance '{self.label}' has no points")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for per-view reconstruction and cross-view fusion."""

    tau: float = 2.0
    kernel_size: int = 3
    merge_threshold: float = 0.8
    voxel_size: float = 0.02

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and >= 1, got {self.kernel_size}")
        if not (0.0 < self.merge_threshold <= 1.0):
            raise ValueError(f"merge_threshold must be in (0, 1], got {self.merge_threshold}")
        if self.voxel_size <= 0:
            raise ValueError(f"voxel_size must be positive, got {self.voxel_size}")
