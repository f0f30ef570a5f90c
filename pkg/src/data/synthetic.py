"""Synthetic scored-dive dataset.

Each video shows a bright square falling along a parabola over a dark
background. Execution quality q in [0, 1] controls per-frame positional
jitter, so quality is visible as motion smoothness and the score
round(100 * q * difficulty / 3.8, 2) is a deterministic function of the
generation parameters.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..utils.error_handler import InputError
from ..utils.logger import Logger
from .video import VideoSample

DIFFICULTY_RANGE = (2.0, 3.8)
REFERENCE_HEIGHT = 128
SQUARE_SIZE = 12
MAX_JITTER = 8.0
BACKGROUND = np.array([0.05, 0.05, 0.08])
FOREGROUND = np.array([1.0, 0.95, 0.85])

logger = Logger.get_logger(__name__)


@dataclass
class SynthParams:
    """Generation parameters.

    Square size and jitter amplitude are given at 128-pixel frame height and
    scale with ``frame_size``. Unset qualities/difficulties are drawn from
    each sample's own generator.
    """
    sample_count: int
    master_seed: int = 0
    frame_size: Tuple[int, int] = (128, 171)
    frames: int = 103
    qualities: Optional[Sequence[float]] = None
    difficulties: Optional[Sequence[float]] = None
    id_prefix: str = 'synth'

    def __post_init__(self):
        if self.sample_count < 1:
            raise InputError(f"sample_count must be >= 1, got {self.sample_count}")
        self.frame_size = tuple(int(v) for v in self.frame_size)
        for name in ('qualities', 'difficulties'):
            values = getattr(self, name)
            if values is not None and len(values) != self.sample_count:
                raise InputError(f"{name} has {len(values)} entries for {self.sample_count} samples")

    @property
    def scale(self) -> float:
        return self.frame_size[0] / REFERENCE_HEIGHT

    @property
    def square(self) -> int:
        return max(1, int(round(SQUARE_SIZE * self.scale)))


def synthetic_score(quality: float, difficulty: float) -> float:
    return round(100.0 * quality * difficulty / DIFFICULTY_RANGE[1], 2)


def trajectory(params: SynthParams) -> np.ndarray:
    """Ideal top-left corner (row, col) per frame: linear across, parabolic down."""
    height, width = params.frame_size
    square = params.square
    t = np.linspace(0.0, 1.0, params.frames)
    rows = (height - square) * t ** 2
    cols = (width - square) * (0.1 + 0.8 * t)
    return np.stack([rows, cols], axis=1)


def render_sample(params: SynthParams, index: int) -> VideoSample:
    """Render sample ``index`` from the sub-generator seeded by (master_seed, index)."""
    rng = np.random.default_rng([params.master_seed, index])
    quality = float(rng.uniform(0.0, 1.0))
    difficulty = float(rng.uniform(*DIFFICULTY_RANGE))
    if params.qualities is not None:
        quality = float(params.qualities[index])
    if params.difficulties is not None:
        difficulty = float(params.difficulties[index])
    if not 0.0 <= quality <= 1.0:
        raise InputError(f"quality must be in [0, 1], got {quality}")

    height, width = params.frame_size
    square = params.square
    if square > min(height, width):
        raise InputError(f"frame size {params.frame_size} is smaller than the {square}px square")

    amplitude = (1.0 - quality) * MAX_JITTER * params.scale
    jitter = rng.uniform(-amplitude, amplitude, size=(params.frames, 2)) if amplitude > 0 else 0.0
    corners = np.rint(trajectory(params) + jitter).astype(np.int64)
    corners[:, 0] = np.clip(corners[:, 0], 0, height - square)
    corners[:, 1] = np.clip(corners[:, 1], 0, width - square)

    frames = np.empty((params.frames, 3, height, width), dtype=np.float32)
    frames[...] = BACKGROUND.reshape(1, 3, 1, 1)
    for f, (row, col) in enumerate(corners):
        frames[f, :, row:row + square, col:col + square] = FOREGROUND.reshape(3, 1, 1)

    return VideoSample(
        frames=frames,
        true_score=synthetic_score(quality, difficulty),
        difficulty=difficulty,
        sample_id=f"{params.id_prefix}-{index:05d}",
    )


def generate_synthetic(params: SynthParams, threads: int = 1) -> List[VideoSample]:
    """Render every sample; output order and content do not depend on ``threads``."""
    indices = range(params.sample_count)
    if threads <= 1:
        samples = [render_sample(params, i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(lambda i: render_sample(params, i), indices))

    scores = [s.true_score for s in samples]
    logger.info(f"Generated {len(samples)} synthetic samples, scores {min(scores):.2f}..{max(scores):.2f}")
    return samples
