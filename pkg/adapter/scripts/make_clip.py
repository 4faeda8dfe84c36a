#!/usr/bin/env python3
"""Regenerate the bundled test clip: 10 seconds, 8 fps, 64x64, four visually
distinct scenes with a moving square for texture. Deterministic."""

import argparse

import cv2
import numpy as np

SCENE_COLORS = [(40, 40, 200), (40, 200, 40), (200, 40, 40), (200, 200, 40)]  # BGR


def make_clip(path: str, fps: int = 8, seconds: int = 10, size: int = 64) -> None:
    total = fps * seconds
    per_scene = total // len(SCENE_COLORS)
    writer = cv2.VideoWriter(path, cv2.VideoWriter_fourcc(*"MJPG"), float(fps), (size, size))
    if not writer.isOpened():
        raise SystemExit(f"could not open video writer for {path}")
    for i in range(total):
        scene = min(i // per_scene, len(SCENE_COLORS) - 1)
        frame = np.full((size, size, 3), SCENE_COLORS[scene], np.uint8)
        # moving square so frames within a scene are similar but not identical
        x = (i * 3) % (size - 16)
        y = (scene * 12) % (size - 16)
        frame[y : y + 16, x : x + 16] = 255 - np.asarray(SCENE_COLORS[scene], np.uint8)
        writer.write(frame)
    writer.release()
    print(f"wrote {total} frames at {fps} fps to {path}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", nargs="?", default="tests/assets/clip.avi")
    args = parser.parse_args()
    make_clip(args.out)
