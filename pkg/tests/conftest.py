import shutil

import numpy as np
import pytest

from rgbdnav import oracle


def random_rotation(rng) -> np.ndarray:
    """Uniform-ish random rotation from a normalized quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def erosion_oracle(bitmap: np.ndarray, selem: np.ndarray) -> np.ndarray:
    """Per-pixel double loop applying the erosion definition directly."""
    h, w = bitmap.shape
    kh, kw = selem.shape
    ph, pw = kh // 2, kw // 2
    out = np.zeros((h, w), dtype=bool)
    for i in range(h):
        for j in range(w):
            ok = True
            for di in range(kh):
                for dj in range(kw):
                    if not selem[di, dj]:
                        continue
                    ii, jj = i + di - ph, j + dj - pw
                    if ii < 0 or ii >= h or jj < 0 or jj >= w or not bitmap[ii, jj]:
                        ok = False
                        break
                if not ok:
                    break
            out[i, j] = ok
    return out


def zscore_keep_oracle(values, tau: float) -> list[int]:
    """Indices kept by the z-score rule, computed with plain Python arithmetic."""
    n = len(values)
    if n < 3:
        return list(range(n))
    mu = sum(values) / n
    sigma = (sum((v - mu) ** 2 for v in values) / n) ** 0.5
    if sigma == 0:
        return list(range(n))
    return [i for i, v in enumerate(values) if abs(v - mu) / sigma < tau]


def monte_carlo_iou(box_a, box_b, n: int, rng) -> float:
    """Volume-sampling IoU estimate over the bounding box of the union."""
    lo = np.minimum(box_a.min_corner, box_b.min_corner)
    hi = np.maximum(box_a.max_corner, box_b.max_corner)
    pts = rng.uniform(lo, hi, size=(n, 3))
    in_a = np.all((pts >= box_a.min_corner) & (pts <= box_a.max_corner), axis=1)
    in_b = np.all((pts >= box_b.min_corner) & (pts <= box_b.max_corner), axis=1)
    union = int(np.count_nonzero(in_a | in_b))
    if union == 0:
        return 0.0
    return int(np.count_nonzero(in_a & in_b)) / union


def unicycle_arc(x: float, y: float, theta: float, v: float, omega: float, dt: float):
    """Closed-form constant-(v, omega) pose integration over one interval."""
    if omega == 0.0:
        return x + v * dt * np.cos(theta), y + v * dt * np.sin(theta), theta
    r = v / omega
    return (
        x + r * (np.sin(theta + omega * dt) - np.sin(theta)),
        y - r * (np.cos(theta + omega * dt) - np.cos(theta)),
        theta + omega * dt,
    )


@pytest.fixture(scope="session")
def oracle_scene_dir(tmp_path_factory):
    """The 3-object 20-view synthetic scene with noise-free oracle detections.

    Session-scoped and treated as read-only; tests that rewrite detections
    must copy it first (see mutable_scene_dir).
    """
    scene_dir = tmp_path_factory.mktemp("fixture") / "scene"
    oracle.make_synthetic_scene(
        oracle.default_box_layout(),
        oracle.default_trajectory(20),
        oracle.default_intrinsics(),
        scene_dir,
    )
    oracle.populate_detections(scene_dir)
    return scene_dir


@pytest.fixture
def mutable_scene_dir(oracle_scene_dir, tmp_path):
    dest = tmp_path / "scene"
    shutil.copytree(oracle_scene_dir, dest)
    return dest
