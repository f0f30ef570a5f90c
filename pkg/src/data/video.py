"""Video samples and the crop -> transform -> partition pipeline.

Frames are [L, 3, H, W] float arrays in [0, 1]. Spatial resizing is bilinear
with corner-aligned sampling: output pixel (i, j) of an Ho x Wo image samples
the input at (i * (H-1)/(Ho-1), j * (W-1)/(Wo-1)).
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..models.backbone import CLIP_LENGTHS, CLIP_SIZE
from ..utils.error_handler import ConfigurationError, InputError, ShapeError

WINDOW = 96
END_SLACK = 6
RESIZE_HW = (128, 171)


@dataclass
class VideoSample:
    """One scored performance."""
    frames: np.ndarray
    true_score: float
    difficulty: float
    sample_id: str

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 4 or self.frames.shape[1] != 3:
            raise ShapeError('video_sample', f"frames must be [L,3,H,W], got {list(self.frames.shape)}")
        if self.frames.shape[0] < WINDOW:
            raise InputError(f"{self.sample_id}: needs at least {WINDOW} frames, got {self.frames.shape[0]}")
        if not np.isfinite(self.frames).all():
            raise InputError(f"{self.sample_id}: pixel values must be finite")
        if self.frames.min() < 0.0 or self.frames.max() > 1.0:
            raise InputError(f"{self.sample_id}: pixel values must lie in [0, 1]")
        if self.true_score < 0:
            raise InputError(f"{self.sample_id}: true score must be >= 0, got {self.true_score}")
        if not self.difficulty > 0:
            raise InputError(f"{self.sample_id}: difficulty must be > 0, got {self.difficulty}")

    @property
    def length(self) -> int:
        return self.frames.shape[0]


@dataclass
class ClipBatch:
    """N contiguous, non-overlapping clips [N, 3, n, H, W] of one window."""
    clips: np.ndarray
    n: int

    @property
    def count(self) -> int:
        return self.clips.shape[0]


def temporal_crop(sample: VideoSample, rng: Optional[np.random.Generator], train: bool) -> np.ndarray:
    """96 consecutive frames ending at e.

    Training draws e uniformly from the last min(6, L-95) frames; evaluation
    uses e = L-1.

    Raises:
        InputError: fewer than 96 frames
    """
    length = sample.frames.shape[0]
    if length < WINDOW:
        raise InputError(f"{sample.sample_id}: needs at least {WINDOW} frames, got {length}")
    end = length - 1
    if train:
        slack = min(END_SLACK, length - WINDOW + 1)
        end = int(rng.integers(length - slack, length))
    return sample.frames[end - WINDOW + 1:end + 1]


def resize_bilinear(frames: np.ndarray, height: int, width: int) -> np.ndarray:
    """Corner-aligned bilinear resize of [..., H, W] frames."""
    in_h, in_w = frames.shape[-2:]
    if (in_h, in_w) == (height, width):
        return frames

    def axis_weights(size_in, size_out):
        coords = np.linspace(0.0, size_in - 1, size_out) if size_out > 1 else np.zeros(1)
        low = np.floor(coords).astype(np.int64)
        high = np.minimum(low + 1, size_in - 1)
        return low, high, (coords - low).astype(frames.dtype)

    y0, y1, wy = axis_weights(in_h, height)
    x0, x1, wx = axis_weights(in_w, width)

    rows = frames[..., y0, :] * (1 - wy)[:, None] + frames[..., y1, :] * wy[:, None]
    return rows[..., x0] * (1 - wx) + rows[..., x1] * wx


def center_crop(frames: np.ndarray, size: int = CLIP_SIZE) -> np.ndarray:
    height, width = frames.shape[-2:]
    top = (height - size) // 2
    left = (width - size) // 2
    return frames[..., top:top + size, left:left + size]


def flip_horizontal(frames: np.ndarray) -> np.ndarray:
    return frames[..., ::-1]


def spatial_transform(frames: np.ndarray, rng: Optional[np.random.Generator], train: bool) -> np.ndarray:
    """Resize to 128x171, center crop 112x112, and in training flip the whole window with p=0.5."""
    out = center_crop(resize_bilinear(frames, *RESIZE_HW))
    if train and rng.random() < 0.5:
        out = flip_horizontal(out)
    return np.ascontiguousarray(out)


def partition_clips(frames: np.ndarray, n: int) -> ClipBatch:
    """Split [96,3,H,W] into N = 96/n clips [N,3,n,H,W]; clip i holds frames i*n .. (i+1)*n - 1.

    Raises:
        ConfigurationError: n not in {8, 16, 32}
    """
    if n not in CLIP_LENGTHS:
        raise ConfigurationError(f"clip length must be one of {list(CLIP_LENGTHS)}, got {n}")
    if frames.shape[0] != WINDOW:
        raise ShapeError('partition_clips', f"expects {WINDOW} frames, got {frames.shape[0]}")
    count = WINDOW // n
    clips = frames.reshape(count, n, *frames.shape[1:]).transpose(0, 2, 1, 3, 4)
    return ClipBatch(clips=np.ascontiguousarray(clips), n=n)


def unpartition(batch: ClipBatch) -> np.ndarray:
    """Inverse of partition_clips."""
    clips = batch.clips.transpose(0, 2, 1, 3, 4)
    return np.ascontiguousarray(clips.reshape(-1, *clips.shape[2:]))


def prepare_clips(sample: VideoSample, n: int, rng: Optional[np.random.Generator], train: bool,
                  dtype=np.float64) -> ClipBatch:
    """Full per-video pipeline: temporal crop, spatial transform, partition."""
    window = temporal_crop(sample, rng, train).astype(dtype, copy=False)
    return partition_clips(spatial_transform(window, rng, train), n)
