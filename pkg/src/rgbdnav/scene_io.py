"""Scene loading and artifact export.

On-disk scene layout::

    scene_dir/
      intrinsics.txt              one line: fx fy cx cy width height depth_scale
      frames/<id>.depth.pgm       16-bit grayscale PGM; meters = value * depth_scale
      frames/<id>.pose.txt        4x4 row-major camera-to-world matrix
      frames/<id>.detections.txt  one detection per line: x1 y1 x2 y2 score label
      frames/<id>.mask.<k>.pgm    binary PGM (0/255) for detection k of that frame
      gt/instances/<k>.txt        optional ground truth: label line, then x y z rows

Frames are ordered by <id> (zero-padded ids sort naturally). RGB images may
sit next to the depth files but are never read here. Loading validates every
invariant and never repairs data silently; a Scene is immutable after
construction and may be shared across threads.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .types import (
    Box3D,
    CameraIntrinsics,
    CameraPose,
    DepthFrame,
    Detection2D,
    GroundTruthInstance,
    InstanceMask,
    ObjectCloud,
    SceneInstances,
)


class SceneError(Exception):
    """Base class for scene loading problems."""


class SceneLayoutError(SceneError):
    """A required file or directory is missing or unreadable."""


class SceneValidationError(SceneError):
    """Loaded data violates a documented invariant."""


@dataclass(frozen=True)
class SceneView:
    frame: DepthFrame
    detections: list[Detection2D]
    masks: list[InstanceMask]


@dataclass(frozen=True)
class Scene:
    root: Path
    intrinsics: CameraIntrinsics
    depth_scale: float
    views: list[SceneView]
    gt: list[GroundTruthInstance] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.views)


# ---------------------------------------------------------------------------
# PGM
# ---------------------------------------------------------------------------

def read_pgm(path: Path) -> np.ndarray:
    """Read a P2 (ASCII) or P5 (binary) grayscale PGM into a uint16 array."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise SceneLayoutError(f"cannot read PGM file {path}: {e}") from e
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(raw):
            raise SceneValidationError(f"{path}: truncated PGM header")
        chunk = raw[pos:pos + 1]
        if chunk == b"#":
            pos = raw.find(b"\n", pos)
            if pos < 0:
                raise SceneValidationError(f"{path}: unterminated PGM comment")
            pos += 1
        elif chunk.isspace():
            pos += 1
        else:
            end = pos
            while end < len(raw) and not raw[end:end + 1].isspace():
                end += 1
            tokens.append(raw[pos:end])
            pos = end
    magic = tokens[0].decode("ascii", "replace")
    if magic not in ("P2", "P5"):
        raise SceneValidationError(f"{path}: unsupported PGM magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as e:
        raise SceneValidationError(f"{path}: malformed PGM header") from e
    if not (0 < maxval <= 65535):
        raise SceneValidationError(f"{path}: PGM maxval {maxval} outside (0, 65535]")
    if magic == "P2":
        values = np.array(raw[pos:].split(), dtype=np.uint32)
        if values.size != width * height:
            raise SceneValidationError(
                f"{path}: expected {width * height} samples, found {values.size}"
            )
    else:
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        data = raw[pos:pos + width * height * dtype.itemsize]
        if len(data) != width * height * dtype.itemsize:
            raise SceneValidationError(f"{path}: truncated PGM raster")
        values = np.frombuffer(data, dtype=dtype).astype(np.uint32)
    if values.size and values.max() > maxval:
        raise SceneValidationError(f"{path}: sample exceeds declared maxval {maxval}")
    return values.reshape(height, width).astype(np.uint16)


def write_pgm(path: Path, image: np.ndarray, maxval: int = 65535) -> None:
    """Write a P5 (binary) grayscale PGM; 2 bytes big-endian when maxval > 255."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"PGM image must be 2D, got shape {image.shape}")
    if image.size and int(image.max()) > maxval:
        raise ValueError(f"image max {int(image.max())} exceeds maxval {maxval}")
    h, w = image.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    Path(path).write_bytes(header + image.astype(dtype).tobytes())


# ---------------------------------------------------------------------------
# Scene loading
# ---------------------------------------------------------------------------

def _load_intrinsics(path: Path) -> tuple[CameraIntrinsics, float]:
    if not path.is_file():
        raise SceneLayoutError(f"missing intrinsics file {path}")
    fields = path.read_text().split()
    if len(fields) != 7:
        raise SceneValidationError(
            f"{path}: expected 7 fields (fx fy cx cy width height depth_scale), got {len(fields)}"
        )
    try:
        fx, fy, cx, cy = (float(v) for v in fields[:4])
        width, height = int(fields[4]), int(fields[5])
        depth_scale = float(fields[6])
    except ValueError as e:
        raise SceneValidationError(f"{path}: non-numeric intrinsics field: {e}") from e
    if depth_scale <= 0:
        raise SceneValidationError(f"{path}: depth_scale must be positive, got {depth_scale}")
    try:
        intr = CameraIntrinsics(fx, fy, cx, cy, width, height)
    except ValueError as e:
        raise SceneValidationError(f"{path}: {e}") from e
    return intr, depth_scale


def _load_pose(path: Path, frame_id: str) -> CameraPose:
    if not path.is_file():
        raise SceneLayoutError(f"missing pose file {path}")
    values = path.read_text().split()
    if len(values) != 16:
        raise SceneValidationError(f"frame {frame_id}: pose file must hold 16 numbers, got {len(values)}")
    try:
        m = np.array(values, dtype=np.float64).reshape(4, 4)
        return CameraPose.from_matrix(m)
    except ValueError as e:
        raise SceneValidationError(f"frame {frame_id}: invalid pose: {e}") from e


def _clamp_box(box: tuple[float, float, float, float], intr: CameraIntrinsics):
    x1, y1, x2, y2 = box
    return (max(x1, 0.0), max(y1, 0.0), min(x2, float(intr.width)), min(y2, float(intr.height)))


def _load_detections(path: Path, frame_id: str, intr: CameraIntrinsics) -> list[Detection2D]:
    if not path.is_file():
        raise SceneLayoutError(f"missing detections file {path}")
    detections = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(maxsplit=5)
        if len(parts) != 6:
            raise SceneValidationError(
                f"frame {frame_id}: detections line {lineno} needs 'x1 y1 x2 y2 score label'"
            )
        try:
            box = tuple(float(v) for v in parts[:4])
            score = float(parts[4])
        except ValueError as e:
            raise SceneValidationError(f"frame {frame_id}: detections line {lineno}: {e}") from e
        try:
            detections.append(Detection2D(_clamp_box(box, intr), score, parts[5]))
        except ValueError as e:
            raise SceneValidationError(
                f"frame {frame_id}: detection {len(detections)}: {e}"
            ) from e
    return detections


def _load_mask(path: Path, frame_id: str, k: int, det: Detection2D, intr: CameraIntrinsics) -> InstanceMask:
    if not path.is_file():
        raise SceneLayoutError(f"missing mask file {path}")
    raw = read_pgm(path)
    if raw.shape != (intr.height, intr.width):
        raise SceneValidationError(
            f"frame {frame_id}: mask {k} shape {raw.shape} does not match image "
            f"({intr.height}, {intr.width})"
        )
    bad = ~np.isin(raw, (0, 255))
    if bad.any():
        raise SceneValidationError(f"frame {frame_id}: mask {k} has values other than 0/255")
    bitmap = raw == 255
    vs, us = np.nonzero(bitmap)
    x1, y1, x2, y2 = det.box
    if vs.size and not (
        (us >= x1).all() and (us < x2).all() and (vs >= y1).all() and (vs < y2).all()
    ):
        raise SceneValidationError(
            f"frame {frame_id}: mask {k} has pixels outside its detection box {det.box}"
        )
    return InstanceMask(bitmap, det)


def load_scene(scene_dir: Path) -> Scene:
    """Load and validate a scene directory; raises SceneError subclasses on problems."""
    root = Path(scene_dir)
    if not root.is_dir():
        raise SceneLayoutError(f"scene directory {root} does not exist")
    intr, depth_scale = _load_intrinsics(root / "intrinsics.txt")
    frames_dir = root / "frames"
    if not frames_dir.is_dir():
        raise SceneLayoutError(f"missing frames directory {frames_dir}")
    ids = sorted(p.name[: -len(".depth.pgm")] for p in frames_dir.glob("*.depth.pgm"))
    if not ids:
        raise SceneLayoutError(f"no '<id>.depth.pgm' files under {frames_dir}")
    views = []
    for frame_id in ids:
        raw_depth = read_pgm(frames_dir / f"{frame_id}.depth.pgm")
        if raw_depth.shape != (intr.height, intr.width):
            raise SceneValidationError(
                f"frame {frame_id}: depth shape {raw_depth.shape} does not match "
                f"intrinsics ({intr.height}, {intr.width})"
            )
        depth = raw_depth.astype(np.float64) * depth_scale
        pose = _load_pose(frames_dir / f"{frame_id}.pose.txt", frame_id)
        frame = DepthFrame(frame_id, depth, intr, pose)
        detections = _load_detections(frames_dir / f"{frame_id}.detections.txt", frame_id, intr)
        masks = [
            _load_mask(frames_dir / f"{frame_id}.mask.{k}.pgm", frame_id, k, det, intr)
            for k, det in enumerate(detections)
        ]
        stray = sorted(
            p.name for p in frames_dir.glob(f"{frame_id}.mask.*.pgm")
        )
        if len(stray) != len(detections):
            raise SceneValidationError(
                f"frame {frame_id}: {len(stray)} mask files for {len(detections)} detections"
            )
        views.append(SceneView(frame, detections, masks))
    gt_dir = root / "gt" / "instances"
    gt = load_gt_instances(gt_dir) if gt_dir.is_dir() else []
    return Scene(root, intr, depth_scale, views, gt)


# ---------------------------------------------------------------------------
# Ground-truth instance lists
# ---------------------------------------------------------------------------

def load_gt_instances(path: Path) -> list[GroundTruthInstance]:
    """Load ground-truth instances from a scene dir, a gt/ dir, or the instances dir itself."""
    path = Path(path)
    for candidate in (path / "gt" / "instances", path / "instances", path):
        if candidate.is_dir() and list(candidate.glob("*.txt")):
            inst_dir = candidate
            break
    else:
        raise SceneLayoutError(f"no ground-truth instance files under {path}")
    instances = []
    for f in sorted(inst_dir.glob("*.txt")):
        text = f.read_text()
        newline = text.find("\n")
        if newline < 0:
            raise SceneValidationError(f"{f}: expected a label line followed by points")
        label = text[:newline].strip()
        if not label:
            raise SceneValidationError(f"{f}: empty label line")
        coords = np.array(text[newline + 1:].split(), dtype=np.float64)
        if coords.size == 0 or coords.size % 3:
            raise SceneValidationError(f"{f}: point rows must hold 3 coordinates each")
        instances.append(GroundTruthInstance(label, coords.reshape(-1, 3)))
    return instances


def write_gt_instances(instances: list[GroundTruthInstance], out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, inst in enumerate(instances):
        rows = "\n".join("%.9g %.9g %.9g" % (p[0], p[1], p[2]) for p in inst.points)
        (out_dir / f"{k:04d}.txt").write_text(f"{inst.label}\n{rows}\n")


# ---------------------------------------------------------------------------
# Frame-file writers (used by the synthetic-scene generator)
# ---------------------------------------------------------------------------

def write_intrinsics(path: Path, intr: CameraIntrinsics, depth_scale: float) -> None:
    Path(path).write_text(
        f"{intr.fx:.9g} {intr.fy:.9g} {intr.cx:.9g} {intr.cy:.9g} "
        f"{intr.width} {intr.height} {depth_scale:.9g}\n"
    )


def write_pose(path: Path, pose: CameraPose) -> None:
    rows = "\n".join(" ".join(repr(float(v)) for v in row) for row in pose.matrix())
    Path(path).write_text(rows + "\n")


def write_detections(path: Path, detections: list[Detection2D]) -> None:
    lines = [
        f"{d.box[0]:.9g} {d.box[1]:.9g} {d.box[2]:.9g} {d.box[3]:.9g} {d.score:.9g} {d.label}"
        for d in detections
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


# ---------------------------------------------------------------------------
# Point-cloud PLY
# ---------------------------------------------------------------------------

def write_cloud_ply(cloud: ObjectCloud, path: Path) -> None:
    """Write an ASCII PLY with one x/y/z vertex per point. Refuses empty clouds."""
    n = cloud.points.shape[0]
    if n == 0:
        raise ValueError(f"refusing to write empty cloud '{cloud.label}' to {path}")
    header = (
        "ply\nformat ascii 1.0\n"
        f"comment label {cloud.label}\n"
        f"comment score {cloud.score:.9g}\n"
        f"element vertex {n}\n"
        "property float x\nproperty float y\nproperty float z\nend_header\n"
    )
    body = "\n".join("%.6f %.6f %.6f" % (p[0], p[1], p[2]) for p in cloud.points)
    Path(path).write_text(header + body + "\n")


def read_cloud_ply(path: Path) -> np.ndarray:
    """Read the vertices of an ASCII PLY written by :func:`write_cloud_ply`."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ValueError(f"{path}: not a PLY file")
    count = None
    props = []
    body_start = None
    for i, line in enumerate(lines[1:], start=1):
        tokens = line.split()
        if tokens[:2] == ["element", "vertex"]:
            count = int(tokens[2])
        elif tokens and tokens[0] == "property":
            props.append(tokens[-1])
        elif tokens == ["end_header"]:
            body_start = i + 1
            break
    if count is None or body_start is None:
        raise ValueError(f"{path}: malformed PLY header")
    if props != ["x", "y", "z"]:
        raise ValueError(f"{path}: expected x/y/z vertex properties, got {props}")
    values = np.array(" ".join(lines[body_start:]).split(), dtype=np.float64)
    if values.size != 3 * count:
        raise ValueError(f"{path}: header promises {count} vertices, body holds {values.size // 3}")
    return values.reshape(-1, 3)


# ---------------------------------------------------------------------------
# Instance-set documents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxRecord:
    label: str
    score: float
    min_corner: np.ndarray
    max_corner: np.ndarray
    num_points: int


def write_boxes(instances: SceneInstances, path: Path) -> None:
    """Write one machine-readable record per instance (JSON)."""
    records = [
        {
            "label": cloud.label,
            "score": cloud.score,
            "min_corner": list(box.min_corner),
            "max_corner": list(box.max_corner),
            "num_points": int(cloud.points.shape[0]),
        }
        for cloud, box in instances.instances
    ]
    Path(path).write_text(json.dumps({"instances": records}, indent=2) + "\n")


def load_boxes(path: Path) -> list[BoxRecord]:
    doc = json.loads(Path(path).read_text())
    return [
        BoxRecord(
            r["label"],
            float(r["score"]),
            np.array(r["min_corner"], dtype=np.float64),
            np.array(r["max_corner"], dtype=np.float64),
            int(r["num_points"]),
        )
        for r in doc["instances"]
    ]


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_") or "object"


def write_instances(instances: SceneInstances, out_dir: Path) -> None:
    """Export a fused instance set: boxes.json plus one PLY cloud per instance."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_boxes(instances, out_dir / "boxes.json")
    for k, (cloud, _) in enumerate(instances.instances):
        write_cloud_ply(cloud, out_dir / f"cloud_{k:04d}_{_slug(cloud.label)}.ply")


def load_instances(pred_dir: Path) -> SceneInstances:
    """Load an instance set written by :func:`write_instances`."""
    pred_dir = Path(pred_dir)
    boxes_path = pred_dir / "boxes.json"
    if not boxes_path.is_file():
        raise SceneLayoutError(f"missing instance document {boxes_path}")
    records = load_boxes(boxes_path)
    instances = []
    for k, rec in enumerate(records):
        matches = sorted(pred_dir.glob(f"cloud_{k:04d}_*.ply"))
        if len(matches) != 1:
            raise SceneLayoutError(
                f"expected exactly one cloud file for instance {k} in {pred_dir}, found {len(matches)}"
            )
        points = read_cloud_ply(matches[0])
        cloud = ObjectCloud(points, rec.label, rec.score)
        instances.append((cloud, Box3D(rec.min_corner, rec.max_corner)))
    return SceneInstances(instances)
