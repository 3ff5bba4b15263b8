"""Per-pixel sensitivity of a 30 x 20 cm object as range grows.

The object sits in the column at ``--column`` (fraction of the image width);
on the centre column a sideways shift leaves the width almost unchanged.

    python3 scripts/sensitivity_sweep.py --height 3 --pitch 30
"""
import argparse
import math
from dataclasses import dataclass

import numpy as np

from monometry.geometry import (CameraRig, GroundRect, GeometryError, pixel_ray_world,
                                pixel_sensitivity, project_to_box, ray_plane_intersection)


@dataclass(frozen=True)
class Config:
    height_m: float = 3.0
    pitch_deg: float = 30.0
    focal_mm: float = 4.0
    width_px: int = 1920
    height_px: int = 1080
    object_m: tuple[float, float] = (0.3, 0.2)
    rows: int = 12
    column: float = 0.8


def run(cfg: Config):
    rig = CameraRig(cfg.focal_mm, 6.4, 6.4 * cfg.height_px / cfg.width_px, cfg.width_px,
                    cfg.height_px, cfg.height_m, math.radians(cfg.pitch_deg))
    cx = cfg.column * (rig.image_w_px - 1)
    out = []
    for v in np.linspace(0.95, 0.3, cfg.rows):
        try:
            c = ray_plane_intersection(pixel_ray_world(rig, cx, v * (rig.image_h_px - 1)),
                                       rig.ground_plane)
            box = project_to_box(rig, GroundRect(float(c[0]), float(c[2]), *cfg.object_m))
            rep = pixel_sensitivity(rig, [box])
        except (GeometryError, ValueError):
            continue
        out.append((float(np.linalg.norm(c)), box.width, box.height, rep.s_width_cm,
                    rep.s_height_cm))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--height", type=float, default=Config.height_m)
    ap.add_argument("--pitch", type=float, default=Config.pitch_deg)
    ap.add_argument("--focal", type=float, default=Config.focal_mm)
    ap.add_argument("--column", type=float, default=Config.column)
    args = ap.parse_args()
    cfg = Config(height_m=args.height, pitch_deg=args.pitch, focal_mm=args.focal,
                 column=args.column)
    print(f"{'range_m':>8} {'box_w_px':>9} {'box_h_px':>9} {'S_w_cm':>8} {'S_h_cm':>8}")
    for r, bw, bh, sw, sh in run(cfg):
        print(f"{r:8.2f} {bw:9.1f} {bh:9.1f} {sw:8.4f} {sh:8.4f}")


if __name__ == "__main__":
    main()
