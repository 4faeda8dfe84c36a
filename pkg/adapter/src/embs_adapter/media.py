"""Frame sampling from video files and still images via OpenCV."""

from __future__ import annotations

from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import MediaError

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp", ".tif", ".tiff"}


def sample_frames(path: str | Path, fps: float) -> Iterator[np.ndarray]:
    """Yield RGB frames sampled at ``fps`` in temporal order.

    A still image yields exactly one frame. For video the sample times are
    k/fps for k = 0 .. ceil(duration*fps)-1, mapped to the nearest source
    frame, so a 10s clip at 0.5 fps yields 5 frames.
    """
    import cv2  # noqa: PLC0415

    path = Path(path)
    if not path.exists():
        raise MediaError(f"media not found: {path}")

    if path.suffix.lower() in IMAGE_SUFFIXES:
        image = cv2.imread(str(path), cv2.IMREAD_COLOR)
        if image is None:
            raise MediaError(f"could not decode image: {path}")
        yield cv2.cvtColor(image, cv2.COLOR_BGR2RGB)
        return

    capture = cv2.VideoCapture(str(path))
    if not capture.isOpened():
        raise MediaError(f"could not open video: {path}")
    try:
        native_fps = capture.get(cv2.CAP_PROP_FPS)
        total = int(capture.get(cv2.CAP_PROP_FRAME_COUNT))
        if native_fps <= 0 or total <= 0:
            raise MediaError(f"video reports no frames or fps: {path}")
        duration = total / native_fps
        n_samples = int(np.ceil(duration * fps))
        targets = [min(int(round(k / fps * native_fps)), total - 1) for k in range(n_samples)]

        index = 0
        want = 0
        while want < len(targets):
            ok, frame = capture.read()
            if not ok:
                break
            while want < len(targets) and targets[want] == index:
                yield cv2.cvtColor(frame, cv2.COLOR_BGR2RGB)
                want += 1
            index += 1
        if want < len(targets):
            raise MediaError(
                f"video ended early: sampled {want} of {len(targets)} frames from {path}"
            )
    finally:
        capture.release()
