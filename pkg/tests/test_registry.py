import pytest

from src.database.repository import Repository
from src.training.experiments import FAILED, MatrixResult
from src.training.trainer import EpochRecord


@pytest.fixture
def repository(tmp_path):
    return Repository(str(tmp_path / 'registry' / 'runs.db'))


def test_run_lifecycle(repository):
    run = repository.start_run('train', 'smoke', seed=4)
    assert run.status == 'running'

    repository.record_epochs(run.id, [EpochRecord(1, 9.0, 8.0, float('nan')), EpochRecord(2, 7.0, 6.5, 0.4)])
    repository.finish_run(run.id, 'success', best_spearman=0.4, best_epoch=2,
                          final_spearman=float('nan'), checkpoint_path='runs/x.aqackpt')

    [stored] = repository.list_runs()
    assert stored.status == 'success'
    assert stored.best_spearman == 0.4
    assert stored.best_epoch == 2
    assert stored.final_spearman is None
    assert stored.duration_seconds >= 0

    epochs = repository.get_epochs(run.id)
    assert [e.epoch for e in epochs] == [1, 2]
    assert epochs[0].test_spearman is None

    summary = repository.run_summary(stored)
    assert summary['command'] == 'train'
    assert summary['experiment'] == 'smoke'


def test_failed_run_keeps_message(repository):
    run = repository.start_run('eval', 'broken')
    repository.finish_run(run.id, 'failed', 'checkpoint clip_len mismatch')
    [stored] = repository.list_runs()
    assert stored.status == 'failed'
    assert stored.error_message == 'checkpoint clip_len mismatch'


def test_matrix_rows(repository):
    run = repository.start_run('matrix', 'depth')
    repository.record_matrix(run.id, [
        MatrixResult('tiny', 'conv3d', 8, 'average', 0.7, 1000),
        MatrixResult('tiny', 'conv3d', 8, 'weight_decider', FAILED, FAILED, 'boom'),
    ])
    rows = repository.get_matrix(run.id)
    assert [r.status for r in rows] == ['success', 'failed']
    assert rows[0].spearman == 0.7
    assert rows[1].spearman is None
    assert rows[1].params is None


def test_list_runs_newest_first(repository):
    ids = [repository.start_run('train', f"run{i}").id for i in range(3)]
    assert [r.id for r in repository.list_runs(limit=2)] == ids[::-1][:2]
