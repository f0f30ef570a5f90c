"""AQAD dataset files.

Layout: magic ``AQAD``, u8 version (1), u32 LE sample count, then per sample:
u32 LE id length, UTF-8 id bytes, f64 LE true score, f64 LE difficulty and
the frames as one float32 AQAT record.
"""
import struct
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from ..autodiff.serialization import decode_array, encode_array
from ..utils.error_handler import ClipScoreError, FormatError
from ..utils.logger import Logger
from .video import VideoSample

MAGIC = b'AQAD'
VERSION = 1

logger = Logger.get_logger(__name__)


def encode_dataset(samples: Sequence[VideoSample]) -> bytes:
    chunks = [MAGIC, struct.pack('<BI', VERSION, len(samples))]
    for sample in samples:
        sample_id = sample.sample_id.encode('utf-8')
        chunks.append(struct.pack('<I', len(sample_id)))
        chunks.append(sample_id)
        chunks.append(struct.pack('<dd', sample.true_score, sample.difficulty))
        chunks.append(encode_array(np.asarray(sample.frames, dtype=np.float32)))
    return b''.join(chunks)


def decode_dataset(buffer: bytes) -> List[VideoSample]:
    """Parse an AQAD buffer.

    Raises:
        FormatError: bad magic/version, truncation or invalid sample, with the byte offset
    """
    offset = 0

    def take(count: int) -> bytes:
        nonlocal offset
        if offset + count > len(buffer):
            raise FormatError(f"truncated AQAD file: need {count} bytes", offset)
        chunk = buffer[offset:offset + count]
        offset += count
        return chunk

    if take(4) != MAGIC:
        raise FormatError("bad AQAD magic", 0)
    version, count = struct.unpack('<BI', take(5))
    if version != VERSION:
        raise FormatError(f"unsupported AQAD version {version}", 4)

    samples = []
    for _ in range(count):
        start = offset
        (id_length,) = struct.unpack('<I', take(4))
        try:
            sample_id = take(id_length).decode('utf-8')
        except UnicodeDecodeError as e:
            raise FormatError("sample id is not UTF-8", start + 4) from e
        true_score, difficulty = struct.unpack('<dd', take(16))
        frames, offset = decode_array(buffer, offset)
        try:
            samples.append(VideoSample(frames, true_score, difficulty, sample_id))
        except ClipScoreError as e:
            raise FormatError(f"invalid sample {sample_id!r}: {e}", start) from e

    if offset != len(buffer):
        raise FormatError(f"{len(buffer) - offset} trailing bytes after the last sample", offset)
    return samples


def save_dataset(samples: Sequence[VideoSample], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_dataset(samples))
    logger.info(f"Saved {len(samples)} samples to {path}")
    return path


def load_dataset(path: Union[str, Path]) -> List[VideoSample]:
    samples = decode_dataset(Path(path).read_bytes())
    logger.info(f"Loaded {len(samples)} samples from {path}")
    return samples
