import logging

import pytest

from src.reporting.report_generator import ReportGenerator
from src.training.experiments import FAILED, MatrixResult
from src.training.trainer import EpochRecord, EvalReport
from src.utils.experiment_spec import load_experiment_spec


@pytest.fixture
def generator():
    return ReportGenerator(config=None, logger=logging.getLogger('test.reporting'))


def test_matrix_report_groups_rows(generator):
    rows = [
        MatrixResult('tiny', 'conv3d', 8, 'average', 0.7, 1000),
        MatrixResult('tiny', 'conv3d', 8, 'weight_decider', 0.75, 1200),
        MatrixResult('tiny', 'conv2plus1d', 16, 'average', FAILED, FAILED, 'boom'),
    ]
    report = generator.render_matrix_report(rows, title='Depth study')
    lines = report.splitlines()

    assert lines[0] == '# Depth study'
    assert '3 runs, 1 failed.' in report
    assert '| tiny | 3D | 8 | 0.7000 | 0.7500 | +0.0500 | 1000 / 1200 |' in lines
    assert '| tiny | (2+1)D | 16 | failed | - | - | failed |' in lines


def test_matrix_report_is_deterministic(generator):
    rows = [MatrixResult('34', 'conv3d', 8, 'average', 0.5, 10)]
    assert generator.render_matrix_report(rows) == generator.render_matrix_report(rows)


def test_training_report(generator):
    report = EvalReport(
        predictions=[1.0, 2.0], truths=[1.0, 3.0], spearman=1.0, mean_loss=1.0,
        per_epoch_history=[EpochRecord(1, 12.0, 10.0, float('nan')), EpochRecord(2, 8.0, 6.0, 1.0)],
        best_spearman=1.0, best_epoch=2, final_spearman=1.0,
    )
    text = generator.render_training_report(report, load_experiment_spec(None))

    assert text.startswith('# Training report: default')
    assert '| Best | 1.0000 | 2 |' in text
    assert '| 1 | 12.0000 | 10.0000 | undefined |' in text
    assert '| 2 | 8.0000 | 6.0000 | 1.0000 |' in text
    assert '3D convolutions, 8-frame clips' in text
