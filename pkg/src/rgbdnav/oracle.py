"""Ground-truth-driven stand-ins for the 2D detector and mask generator.

The synthetic-scene generator renders analytic depth images of labeled
axis-aligned boxes along a camera trajectory and records, per instance, the
world-frame points of every visible (depth-quantized) surface pixel. The
detection oracle projects those ground-truth points back into a frame,
z-buffers them against the frame's depth, and emits a mask plus the tight
box around it, with optional seeded perturbations for degradation studies.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import scene_io
from .masks import erode_bitmap
from .projection import back_project_pixels, project_to_pixels, to_camera, to_world
from .types import (
    Box3D,
    CameraIntrinsics,
    CameraPose,
    DepthFrame,
    Detection2D,
    GroundTruthInstance,
    InstanceMask,
)

_NEAR = 1e-6


@dataclass(frozen=True)
class LabeledBox:
    label: str
    box: Box3D


@dataclass(frozen=True)
class PerturbationConfig:
    """Seeded, declarative detection noise; all off by default.

    mask_erode_px shrinks masks by that many one-pixel erosions (negative
    values dilate instead); box_jitter_px shifts each box coordinate by a
    uniform integer in [-j, j]; drop_prob removes whole instances; score
    noise replaces the unit score with clip(1 - |N(0, score_sigma)|, 0, 1).
    """

    seed: int = 0
    box_jitter_px: int = 0
    mask_erode_px: int = 0
    drop_prob: float = 0.0
    score_sigma: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.drop_prob <= 1.0):
            raise ValueError(f"drop_prob must be in [0, 1], got {self.drop_prob}")
        if self.score_sigma < 0:
            raise ValueError(f"score_sigma must be non-negative, got {self.score_sigma}")

    @classmethod
    def from_file(cls, path: Path) -> "PerturbationConfig":
        kwargs = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.replace(":", "=").partition("=")
            key = key.strip()
            if key not in cls.__dataclass_fields__:
                raise ValueError(f"{path}:{lineno}: unknown perturbation field {key!r}")
            caster = int if key in ("seed", "box_jitter_px", "mask_erode_px") else float
            kwargs[key] = caster(value.strip())
        return cls(**kwargs)

    def to_file(self, path: Path) -> None:
        Path(path).write_text(
            f"seed = {self.seed}\n"
            f"box_jitter_px = {self.box_jitter_px}\n"
            f"mask_erode_px = {self.mask_erode_px}\n"
            f"drop_prob = {self.drop_prob:.9g}\n"
            f"score_sigma = {self.score_sigma:.9g}\n"
        )


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> CameraPose:
    """Camera-to-world pose for an eye point looking at a target (z forward, y down)."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("look_at eye and target coincide")
    z = forward / norm
    x = np.cross(z, np.asarray(up, dtype=np.float64))
    xn = np.linalg.norm(x)
    if xn < 1e-12:
        raise ValueError("viewing direction parallel to the up vector")
    x /= xn
    y = np.cross(z, x)
    return CameraPose(np.column_stack([x, y, z]), eye)


def orbit_trajectory(
    center, radius: float, height: float, n_views: int, start_deg: float = 200.0, span_deg: float = 80.0
) -> list[CameraPose]:
    """Poses on a horizontal arc around ``center``, all looking at it."""
    if n_views < 1:
        raise ValueError("n_views must be >= 1")
    center = np.asarray(center, dtype=np.float64)
    angles = np.deg2rad(start_deg + np.linspace(0.0, span_deg, n_views))
    poses = []
    for a in angles:
        eye = center + np.array([radius * np.cos(a), radius * np.sin(a), 0.0])
        eye[2] = height
        poses.append(look_at(eye, center))
    return poses


def render_depth(
    boxes: list[LabeledBox], pose: CameraPose, intrinsics: CameraIntrinsics
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-surface z-depth per pixel plus the index of the owning box (-1 = none)."""
    if not boxes:
        raise ValueError("render_depth needs at least one box")
    h, w = intrinsics.height, intrinsics.width
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    dirs_cam = np.stack(
        [
            (us - intrinsics.cx) / intrinsics.fx,
            (vs - intrinsics.cy) / intrinsics.fy,
            np.ones_like(us),
        ],
        axis=-1,
    ).reshape(-1, 3)
    dirs_w = dirs_cam @ pose.rotation.T
    origin = pose.translation
    hits = np.full((len(boxes), h * w), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs_w
        for i, lb in enumerate(boxes):
            t1 = (lb.box.min_corner - origin) * inv
            t2 = (lb.box.max_corner - origin) * inv
            tmin = np.nanmax(np.minimum(t1, t2), axis=1)
            tmax = np.nanmin(np.maximum(t1, t2), axis=1)
            hit = (tmax >= tmin) & (tmin > _NEAR)
            hits[i, hit] = tmin[hit]
    owner = np.argmin(hits, axis=0).astype(np.int64)
    depth = hits[owner, np.arange(h * w)]
    owner[~np.isfinite(depth)] = -1
    depth[~np.isfinite(depth)] = 0.0
    # The ray parameter equals the camera-frame z coordinate because the ray
    # direction has unit z in the camera frame.
    return depth.reshape(h, w), owner.reshape(h, w)


def make_synthetic_scene(
    boxes: list[LabeledBox],
    trajectory: list[CameraPose],
    intrinsics: CameraIntrinsics,
    scene_dir: Path,
    depth_scale: float = 0.001,
) -> Path:
    """Write the full scene layout: depth renders, poses, intrinsics, ground truth.

    Detections files are created empty; use :func:`populate_detections` to
    synthesize detector outputs from the ground truth.
    """
    if not boxes:
        raise ValueError("empty box list: nothing to render")
    if not trajectory:
        raise ValueError("zero-length camera trajectory")
    scene_dir = Path(scene_dir)
    frames_dir = scene_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    scene_io.write_intrinsics(scene_dir / "intrinsics.txt", intrinsics, depth_scale)
    gt_points: list[list[np.ndarray]] = [[] for _ in boxes]
    for i, pose in enumerate(trajectory):
        frame_id = f"{i:04d}"
        depth, owner = render_depth(boxes, pose, intrinsics)
        quantized = np.round(depth / depth_scale).astype(np.int64)
        if quantized.max() > 65535:
            raise ValueError(
                f"frame {frame_id}: depth {depth.max():.3f} m overflows 16 bits at scale {depth_scale}"
            )
        if np.any((quantized == 0) & (owner >= 0)):
            raise ValueError(f"frame {frame_id}: surface closer than one depth quantum to the camera")
        scene_io.write_pgm(frames_dir / f"{frame_id}.depth.pgm", quantized.astype(np.uint16))
        scene_io.write_pose(frames_dir / f"{frame_id}.pose.txt", pose)
        (frames_dir / f"{frame_id}.detections.txt").write_text("")
        for k in range(len(boxes)):
            vs, us = np.nonzero(owner == k)
            if vs.size == 0:
                continue
            cam = back_project_pixels(us, vs, quantized[vs, us] * depth_scale, intrinsics)
            gt_points[k].append(to_world(cam, pose))
    unseen = [lb.label for lb, pts in zip(boxes, gt_points) if not pts]
    if unseen:
        raise ValueError(f"boxes outside every camera frustum: {unseen}")
    gt = [
        GroundTruthInstance(lb.label, np.vstack(pts)) for lb, pts in zip(boxes, gt_points)
    ]
    scene_io.write_gt_instances(gt, scene_dir / "gt" / "instances")
    return scene_dir


def _dilate_bitmap(bitmap: np.ndarray, selem: np.ndarray) -> np.ndarray:
    h, w = bitmap.shape
    ph, pw = selem.shape[0] // 2, selem.shape[1] // 2
    padded = np.zeros((h + 2 * ph, w + 2 * pw), dtype=bool)
    padded[ph:ph + h, pw:pw + w] = bitmap
    out = np.zeros((h, w), dtype=bool)
    for di, dj in np.argwhere(selem):
        out |= padded[di:di + h, dj:dj + w]
    return out


def render_gt_detections(
    frame: DepthFrame,
    gt: list[GroundTruthInstance],
    noise: PerturbationConfig = PerturbationConfig(),
    depth_scale: float = 0.001,
) -> tuple[list[Detection2D], list[InstanceMask]]:
    """Synthesize detector/mask outputs for one frame from ground-truth points.

    A GT point lands in the mask when it projects inside the image and its
    depth agrees with the frame's depth within 2 depth quanta (so occluded
    points stay out). Instances with no visible pixels are omitted; seeded
    perturbations may then drop, shrink, or jitter the survivors.
    """
    rng = np.random.default_rng([noise.seed, zlib.crc32(frame.frame_id.encode())])
    intr = frame.intrinsics
    kernel = np.ones((3, 3), dtype=bool)
    detections: list[Detection2D] = []
    masks: list[InstanceMask] = []
    for inst in gt:
        cam = to_camera(inst.points, frame.pose)
        front = cam[:, 2] > _NEAR
        cam = cam[front]
        if cam.shape[0] == 0:
            continue
        u, v = project_to_pixels(cam, intr)
        ui = np.rint(u).astype(np.int64)
        vi = np.rint(v).astype(np.int64)
        inside = (ui >= 0) & (ui < intr.width) & (vi >= 0) & (vi < intr.height)
        ui, vi, z = ui[inside], vi[inside], cam[inside, 2]
        visible = np.abs(z - frame.depth[vi, ui]) <= 2.0 * depth_scale
        if not visible.any():
            continue
        bitmap = np.zeros((intr.height, intr.width), dtype=bool)
        bitmap[vi[visible], ui[visible]] = True
        if noise.drop_prob > 0 and rng.random() < noise.drop_prob:
            continue
        if noise.mask_erode_px > 0:
            for _ in range(noise.mask_erode_px):
                bitmap = erode_bitmap(bitmap, kernel)
        elif noise.mask_erode_px < 0:
            for _ in range(-noise.mask_erode_px):
                bitmap = _dilate_bitmap(bitmap, kernel)
        if not bitmap.any():
            continue
        ys, xs = np.nonzero(bitmap)
        x1, y1 = int(xs.min()), int(ys.min())
        x2, y2 = int(xs.max()) + 1, int(ys.max()) + 1
        if noise.box_jitter_px > 0:
            j = noise.box_jitter_px
            dx1, dy1, dx2, dy2 = rng.integers(-j, j + 1, size=4)
            x1 = max(0, x1 + int(dx1))
            y1 = max(0, y1 + int(dy1))
            x2 = min(intr.width, x2 + int(dx2))
            y2 = min(intr.height, y2 + int(dy2))
            if x1 >= x2 or y1 >= y2:
                continue
            clipped = np.zeros_like(bitmap)
            clipped[y1:y2, x1:x2] = bitmap[y1:y2, x1:x2]
            bitmap = clipped
            if not bitmap.any():
                continue
        score = 1.0
        if noise.score_sigma > 0:
            score = float(np.clip(1.0 - abs(rng.normal(0.0, noise.score_sigma)), 0.0, 1.0))
        det = Detection2D((float(x1), float(y1), float(x2), float(y2)), score, inst.label)
        detections.append(det)
        masks.append(InstanceMask(bitmap, det))
    return detections, masks


def populate_detections(scene_dir: Path, noise: PerturbationConfig = PerturbationConfig()) -> int:
    """(Re)write detections and masks for every frame from the scene's ground truth.

    Returns the total number of detections written.
    """
    scene = scene_io.load_scene(scene_dir)
    if not scene.gt:
        raise ValueError(f"scene {scene_dir} has no ground truth to synthesize detections from")
    frames_dir = Path(scene_dir) / "frames"
    total = 0
    for view in scene.views:
        frame_id = view.frame.frame_id
        for old in frames_dir.glob(f"{frame_id}.mask.*.pgm"):
            old.unlink()
        dets, det_masks = render_gt_detections(view.frame, scene.gt, noise, scene.depth_scale)
        scene_io.write_detections(frames_dir / f"{frame_id}.detections.txt", dets)
        for k, m in enumerate(det_masks):
            scene_io.write_pgm(
                frames_dir / f"{frame_id}.mask.{k}.pgm",
                m.bitmap.astype(np.uint16) * 255,
                maxval=255,
            )
        total += len(dets)
    return total


def default_intrinsics(width: int = 416, height: int = 312, focal: float = 420.0) -> CameraIntrinsics:
    return CameraIntrinsics(focal, focal, (width - 1) / 2.0, (height - 1) / 2.0, width, height)


def default_box_layout() -> list[LabeledBox]:
    """Three desk-scale objects on the ground plane near the origin.

    Sized so that, with the default orbit, every object stays fully inside
    every frame and each single-view reconstruction already boxes most of
    the object (same-class views then fuse instead of fragmenting).
    """
    return [
        LabeledBox("chair", Box3D(np.array([-0.86, -0.66, 0.0]), np.array([-0.28, -0.12, 0.46]))),
        LabeledBox("table", Box3D(np.array([0.22, -0.28, 0.0]), np.array([0.84, 0.30, 0.49]))),
        LabeledBox("plant", Box3D(np.array([-0.28, 0.50, 0.0]), np.array([0.26, 1.02, 0.44]))),
    ]


def default_trajectory(n_views: int = 20) -> list[CameraPose]:
    """Full orbit around the layout so every face is seen from some view."""
    span = 360.0 * (n_views - 1) / n_views if n_views > 1 else 0.0
    return orbit_trajectory((0.0, 0.0, 0.2), radius=2.4, height=2.5, n_views=n_views, start_deg=0.0, span_deg=span)
