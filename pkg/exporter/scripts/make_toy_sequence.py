#!/usr/bin/env python3
"""Write the 2-frame toy sequence used for tests and golden fixtures.

Frame two is frame one translated by (3, 2) px. A seeded texture field is
attached to the scene (it shifts with the shapes), so every corner patch
is unique and descriptor matching is unambiguous; without it, same-shaped
rectangle corners would produce bit-identical normalized descriptors.
"""

import argparse
import sys
from pathlib import Path

import cv2
import numpy as np

MARGIN = 8


def _scene_texture(width, height):
    rng = np.random.default_rng(1234)
    field = rng.normal(0.0, 9.0, (height + 2 * MARGIN, width + 2 * MARGIN))
    return cv2.GaussianBlur(field, (0, 0), 1.0)


def toy_image(shift_x: int = 0, shift_y: int = 0, width: int = 160, height: int = 120):
    img = np.full((height, width), 40.0)
    rects = [(20, 15, 34, 31), (70, 25, 95, 52), (40, 70, 58, 96), (110, 60, 140, 102)]
    for x0, y0, x1, y1 in rects:
        img[y0 + shift_y:y1 + shift_y, x0 + shift_x:x1 + shift_x] = 210.0
    tri = np.array([[125 + shift_x, 18 + shift_y], [150 + shift_x, 18 + shift_y],
                    [150 + shift_x, 45 + shift_y]])
    cv2.fillConvexPoly(img, tri, 140.0)
    texture = _scene_texture(width, height)
    y0, x0 = MARGIN - shift_y, MARGIN - shift_x
    img += texture[y0:y0 + height, x0:x0 + width]
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", help="output directory")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cv2.imwrite(str(out / "frame_000001000000.png"), toy_image(0, 0))
    cv2.imwrite(str(out / "frame_000001033000.png"), toy_image(3, 2))
    print(f"wrote 2 frames to {out}")


if __name__ == "__main__":
    sys.exit(main())
