#!/usr/bin/env python3
"""Sweep oracle detection drop probability and print the resulting mAP curve."""
import argparse
import tempfile
from pathlib import Path

from rgbdnav import evaluation, fusion, oracle, scene_io
from rgbdnav.projection import reconstruct_object
from rgbdnav.types import PipelineConfig


def run_once(scene_dir: Path, drop: float, seed: int) -> evaluation.EvalReport:
    oracle.populate_detections(scene_dir, oracle.PerturbationConfig(seed=seed, drop_prob=drop))
    scene = scene_io.load_scene(scene_dir)
    config = PipelineConfig()
    per_view = []
    for view in scene.views:
        produced = []
        for det, mask in zip(view.detections, view.masks):
            result = reconstruct_object(view.frame, det, mask, config)
            if result is not None:
                produced.append(result)
        per_view.append(produced)
    instances = fusion.merge_instances(per_view, config.merge_threshold, config.voxel_size)
    return evaluation.evaluate_scene(instances, scene.gt)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scene", help="existing synthetic scene dir (default: generate a fresh one)")
    parser.add_argument("--views", type=int, default=20)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--drops", type=float, nargs="+", default=[0.0, 0.25, 0.5, 0.75, 0.9])
    args = parser.parse_args()

    if args.scene:
        scene_dir = Path(args.scene)
    else:
        scene_dir = Path(tempfile.mkdtemp(prefix="degradation_")) / "scene"
        print(f"generating fixture scene in {scene_dir}")
        oracle.make_synthetic_scene(
            oracle.default_box_layout(),
            oracle.default_trajectory(args.views),
            oracle.default_intrinsics(),
            scene_dir,
        )

    print(f"{'drop_prob':>10} {'mAP':>8} {'mAP50':>8} {'mAP25':>8}")
    for drop in args.drops:
        report = run_once(scene_dir, drop, args.seed)
        print(f"{drop:>10.2f} {100 * report.map:>8.1f} {100 * report.map50:>8.1f} {100 * report.map25:>8.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
