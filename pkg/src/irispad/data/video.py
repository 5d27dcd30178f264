"""Frame sampling from presentation videos."""

from dataclasses import replace
from pathlib import Path
from typing import NamedTuple, Optional

import cv2
import numpy as np

from ..errors import ConfigurationError, IngestionError
from .manifest import SampleRecord

DEFAULT_STRIDE = 5


class VideoFrame(NamedTuple):
    index: int
    image: np.ndarray
    record: Optional[SampleRecord]


def extract_video_frames(video, stride=DEFAULT_STRIDE):
    """Decode every ``stride``-th frame (0, stride, 2*stride, ...) as RGB uint8.

    ``video`` is a path or a SampleRecord; for a record, each frame carries a
    copy of it with ``frame`` set.
    """
    if stride < 1:
        raise ConfigurationError(f"stride must be >= 1 (got {stride})")
    record = video if isinstance(video, SampleRecord) else None
    path = record.resolve() if record is not None else Path(video)
    if not path.is_file():
        raise IngestionError(f"video not found: {path}")
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise IngestionError(f"cannot decode video {path}")
    frames = []
    index = 0
    try:
        while True:
            ok, bgr = cap.read()
            if not ok:
                break
            if index % stride == 0:
                rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
                rec = replace(record, frame=index) if record is not None else None
                frames.append(VideoFrame(index, rgb, rec))
            index += 1
    finally:
        cap.release()
    if not frames:
        raise IngestionError(f"no decodable frames in {path}")
    return frames


def write_video(path, frames, fps=10):
    """Write RGB uint8 frames as an MJPG AVI (used for fixtures and synthetic replay data)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h, w = frames[0].shape[:2]
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"MJPG"), fps, (w, h))
    try:
        for f in frames:
            f = np.asarray(f, dtype=np.uint8)
            if f.ndim == 2:
                f = np.repeat(f[:, :, None], 3, axis=2)
            writer.write(cv2.cvtColor(f, cv2.COLOR_RGB2BGR))
    finally:
        writer.release()
    return path
