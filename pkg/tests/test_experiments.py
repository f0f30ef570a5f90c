from types import SimpleNamespace

import pytest

from src.training.experiments import (
    CLIP_LAYOUT,
    DEPTH_LAYOUT,
    FAILED,
    LAYOUTS,
    MATRIX_COLUMNS,
    MatrixResult,
    read_matrix_csv,
    run_experiment_matrix,
    write_matrix_csv,
)
from src.training.trainer import Trainer
from src.utils.error_handler import ConfigurationError
from src.utils.experiment_spec import MatrixRow, TrainConfig


@pytest.fixture
def fake_training(monkeypatch):
    """Replace training with a lookup so that a matrix runs instantly."""
    scores = iter([0.61, 0.72, 0.55, 0.80, 0.5, 0.6])
    calls = []

    def train(self, model, train_set, test_set):
        calls.append(model.aggregation)
        return SimpleNamespace(report=SimpleNamespace(best_spearman=next(scores)))

    monkeypatch.setattr(Trainer, 'train', train)
    return calls


def test_layouts():
    assert len(DEPTH_LAYOUT) == 4
    assert len(CLIP_LAYOUT) == 6
    assert set(LAYOUTS) == {'depth', 'clip'}
    assert {row.clip_len for row in CLIP_LAYOUT} == {8, 16, 32}
    assert {row.aggregation for row in DEPTH_LAYOUT} == {'average', 'weight_decider'}


def test_matrix_produces_one_row_per_entry(fake_training, make_samples, tmp_path):
    results = run_experiment_matrix(DEPTH_LAYOUT, make_samples(1), make_samples(2, seed=1), TrainConfig(epochs=1))

    assert [r.spearman for r in results] == [0.61, 0.72, 0.55, 0.80]
    assert fake_training == ['average', 'weight_decider', 'average', 'weight_decider']
    assert all(isinstance(r.params, int) and r.params > 0 for r in results)
    # Weight-Decider rows carry the extra aggregation parameters
    assert results[1].params > results[0].params

    path = write_matrix_csv(results, tmp_path / 'matrix.csv')
    lines = path.read_text().splitlines()
    assert lines[0] == ','.join(MATRIX_COLUMNS)
    assert lines[1].startswith('tiny,conv3d,8,average,0.61,')
    assert len(lines) == 5


def test_invalid_row_is_marked_failed(fake_training, make_samples):
    rows = [MatrixRow('tiny', 'conv3d', 8, 'average'), MatrixRow('tiny', 'conv3d', 12, 'average')]
    results = run_experiment_matrix(rows, make_samples(1), make_samples(2, seed=1), TrainConfig(epochs=1))
    assert not results[0].failed
    assert results[1].failed
    assert results[1].spearman == FAILED
    assert results[1].params == FAILED
    assert 'clip_len' in results[1].error


def test_undefined_correlation_is_failed(monkeypatch, make_samples):
    monkeypatch.setattr(Trainer, 'train', lambda self, model, a, b: SimpleNamespace(
        report=SimpleNamespace(best_spearman=float('nan'))))
    results = run_experiment_matrix(DEPTH_LAYOUT[:1], make_samples(1), make_samples(2), TrainConfig(epochs=1))
    assert results[0].spearman == FAILED
    assert isinstance(results[0].params, int)


def test_empty_matrix(make_samples):
    with pytest.raises(ConfigurationError):
        run_experiment_matrix([], make_samples(1), make_samples(2), TrainConfig(epochs=1))


def test_csv_read_write_is_stable(tmp_path):
    results = [
        MatrixResult('tiny', 'conv3d', 8, 'average', 0.8125, 10440),
        MatrixResult('tiny', 'conv3d', 8, 'weight_decider', FAILED, FAILED, 'boom'),
        MatrixResult('34', 'conv2plus1d', 16, 'average', -0.25, 63000000),
    ]
    first = write_matrix_csv(results, tmp_path / 'a.csv')
    parsed = read_matrix_csv(first)
    second = write_matrix_csv(parsed, tmp_path / 'b.csv')

    assert first.read_bytes() == second.read_bytes()
    assert parsed[0].spearman == 0.8125
    assert parsed[1].failed
    assert parsed[2].params == 63000000


def test_csv_missing_columns(tmp_path):
    path = tmp_path / 'bad.csv'
    path.write_text('depth,conv_type\ntiny,conv3d\n')
    with pytest.raises(ConfigurationError):
        read_matrix_csv(path)
