"""Shared fixtures: project root on sys.path, seeded generators, small synthetic data."""
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.autodiff.tensor import set_default_dtype
from src.data.synthetic import SynthParams, generate_synthetic

# Frames small enough that generation and resizing stay cheap
SMALL_FRAMES = (32, 43)


@pytest.fixture(autouse=True)
def float64_default():
    set_default_dtype(64)
    yield
    set_default_dtype(64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_samples():
    """Factory for small synthetic datasets."""
    def make(count, seed=0, prefix='synth', qualities=None, difficulties=None):
        params = SynthParams(sample_count=count, master_seed=seed, frame_size=SMALL_FRAMES,
                             id_prefix=prefix, qualities=qualities, difficulties=difficulties)
        return generate_synthetic(params)
    return make


@pytest.fixture
def config_file(tmp_path):
    """A config.yaml whose registry lives in tmp_path and which logs to the console only."""
    document = {
        'data': {'synth': {'frame_size': list(SMALL_FRAMES), 'frames': 103}, 'output_dir': str(tmp_path / 'datasets')},
        'runtime': {'threads': 1},
        'gradcheck': {'tolerance': 1e-4, 'eps': 1e-5, 'pipeline_coordinates': 4},
        'logging': {'level': 'WARNING', 'file': None, 'progress': False},
        'database': {'path': str(tmp_path / 'runs.db')},
    }
    path = tmp_path / 'config.yaml'
    path.write_text(yaml.safe_dump(document))
    return path
