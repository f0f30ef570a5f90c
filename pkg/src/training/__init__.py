"""Optimization, evaluation metrics, training loop and experiment matrices."""
from .experiments import run_experiment_matrix, write_matrix_csv
from .metrics import spearman
from .optimizer import Adam, AdamState, adam_step
from .trainer import EvalReport, Trainer, evaluate, train

__all__ = [
    'run_experiment_matrix', 'write_matrix_csv', 'spearman', 'Adam', 'AdamState', 'adam_step',
    'EvalReport', 'Trainer', 'evaluate', 'train',
]
