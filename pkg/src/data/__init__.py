"""Video samples, clip pipeline, synthetic data and dataset files."""
from .dataset_io import load_dataset, save_dataset
from .synthetic import SynthParams, generate_synthetic
from .video import (
    ClipBatch,
    VideoSample,
    partition_clips,
    prepare_clips,
    spatial_transform,
    temporal_crop,
    unpartition,
)

__all__ = [
    'load_dataset', 'save_dataset', 'SynthParams', 'generate_synthetic', 'ClipBatch',
    'VideoSample', 'partition_clips', 'prepare_clips', 'spatial_transform', 'temporal_crop',
    'unpartition',
]
