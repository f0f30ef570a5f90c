#!/usr/bin/env python3
"""clipscore command-line entry point.

Sub-commands: synth, gradcheck, train, eval, predict, matrix, report, runs.
Exit codes: 0 success, 1 check failure, 2 usage/input error, 3 numerical failure.
"""
import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import pandas as pd
from sqlalchemy.exc import SQLAlchemyError

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.autodiff.tensor import precision
from src.data.dataset_io import load_dataset, save_dataset
from src.data.synthetic import SynthParams, generate_synthetic
from src.data.video import VideoSample
from src.database.repository import Repository
from src.models.backbone import BackboneConfig, load_config
from src.models.bundle import build_model, check_compatible, load_checkpoint, save_checkpoint
from src.reporting.report_generator import ReportGenerator
from src.training.experiments import LAYOUTS, read_matrix_csv, run_experiment_matrix, write_matrix_csv
from src.training.gradcheck_suite import RECORDED_OPS, GradientChecker, raise_on_failure
from src.training.trainer import Trainer, write_metrics_csv
from src.utils.config_loader import ConfigLoader
from src.utils.error_handler import (
    ConfigurationError,
    ErrorType,
    InputError,
    classify_error,
    exit_code_for,
)
from src.utils.experiment_spec import ExperimentSpec, load_experiment_spec
from src.utils.logger import Logger

CHECKPOINT_NAME = 'checkpoint.aqackpt'
METRICS_NAME = 'metrics.csv'
TRAINING_REPORT_NAME = 'training_report.md'
MATRIX_NAME = 'matrix.csv'
MATRIX_REPORT_NAME = 'matrix_report.md'


class ClipScoreApp:
    """Runs one CLI command against the ambient configuration and run registry."""

    def __init__(self, config_path: str = None, log_level: str = None):
        """Initialize the application.

        Args:
            config_path: Path to config.yaml (defaults to $CONFIG_PATH or config/config.yaml)
            log_level: Overrides logging.level from the config
        """
        self.config = ConfigLoader(config_path)

        level = log_level or self.config.get('logging.level', 'INFO')
        Logger.configure(self.config.get_log_path(), level)
        self.logger = Logger.get_logger(__name__)

        self.threads = self.config.get_threads()
        self.progress = bool(self.config.get('logging.progress', True))
        self.reports = ReportGenerator(self.config, self.logger)
        self._repository = None

    # Run registry; failures here never fail a command

    def _registry(self) -> Optional[Repository]:
        if self._repository is None:
            try:
                self._repository = Repository(str(self.config.get_database_path()))
            except (SQLAlchemyError, OSError) as e:
                self.logger.warning(f"Run registry unavailable: {e}")
                return None
        return self._repository

    def _start_run(self, command: str, spec: ExperimentSpec) -> Optional[int]:
        repository = self._registry()
        if repository is None:
            return None
        try:
            return repository.start_run(command, spec.name, spec.train.seed).id
        except SQLAlchemyError as e:
            self.logger.warning(f"Could not record {command} run: {e}")
            return None

    def _finish_run(self, run_id: Optional[int], status: str, error: Exception = None,
                    history: Sequence = (), matrix: Sequence = (), **summary):
        if run_id is None:
            return
        try:
            repository = self._registry()
            if history:
                repository.record_epochs(run_id, history)
            if matrix:
                repository.record_matrix(run_id, matrix)
            repository.finish_run(run_id, status, error_message=str(error) if error else None, **summary)
        except SQLAlchemyError as e:
            self.logger.warning(f"Could not close run {run_id}: {e}")

    # Shared plumbing

    def _datasets(self, spec: ExperimentSpec) -> Tuple[List[VideoSample], List[VideoSample]]:
        """Train and test splits from AQAD files or the synth block."""
        data = spec.data
        if data.uses_files:
            return load_dataset(data.train_path), load_dataset(data.test_path)

        synth = data.synth
        # Disjoint seed streams per split
        train_params = SynthParams(sample_count=synth.train_count, master_seed=2 * synth.seed,
                                   frame_size=synth.frame_size, frames=synth.frames, id_prefix='train')
        test_params = SynthParams(sample_count=synth.test_count, master_seed=2 * synth.seed + 1,
                                  frame_size=synth.frame_size, frames=synth.frames, id_prefix='test')
        return (generate_synthetic(train_params, self.threads),
                generate_synthetic(test_params, self.threads))

    def _trainer(self, spec: ExperimentSpec) -> Trainer:
        return Trainer(spec.train, logger=self.logger, progress=self.progress, threads=self.threads)

    def _load_model(self, spec: ExperimentSpec, checkpoint: str):
        model, manifest = load_checkpoint(checkpoint)
        check_compatible(manifest, backbone_config(spec), spec.aggregation.kind)
        return model

    # Commands

    def cmd_synth(self, args) -> int:
        height, width = args.frame_size or self.config.get('data.synth.frame_size', [128, 171])
        frames = args.frames or self.config.get('data.synth.frames', 103)
        params = SynthParams(sample_count=args.count, master_seed=args.seed,
                             frame_size=(height, width), frames=frames, id_prefix=args.id_prefix)
        samples = generate_synthetic(params, self.threads)
        try:
            save_dataset(samples, args.out)
        except OSError as e:
            raise InputError(f"cannot write {args.out}: {e}") from e

        scores = [s.true_score for s in samples]
        print(f"{len(samples)} samples, scores {min(scores):.2f}..{max(scores):.2f} -> {args.out}")
        return 0

    def cmd_gradcheck(self, args) -> int:
        spec = load_experiment_spec(args.spec)
        tolerance = args.tolerance if args.tolerance is not None else self.config.get('gradcheck.tolerance', 1e-4)
        checker = GradientChecker(
            tolerance=tolerance,
            eps=self.config.get('gradcheck.eps', 1e-5),
            seed=spec.train.seed,
            pipeline_coordinates=self.config.get('gradcheck.pipeline_coordinates', 12),
            atol=self.config.get('gradcheck.atol', 1e-7),
            logger=self.logger,
        )
        results = checker.run(include_pipeline=not args.no_pipeline, fault=args.inject_fault)

        width = max(len(r.name) for r in results)
        for r in results:
            print(f"{r.name:<{width}}  {r.rel_error:.3e}  {r.abs_error:.3e}  {'pass' if r.passed else 'FAIL'}")
        raise_on_failure(results)
        print(f"all {len(results)} checks passed (tolerance {tolerance:.1e})")
        return 0

    def cmd_train(self, args) -> int:
        spec = load_experiment_spec(args.spec)
        output = Path(spec.output.directory)
        train_set, test_set = self._datasets(spec)

        run_id = self._start_run('train', spec)
        try:
            with precision(spec.train.precision):
                model = build_model(backbone_config(spec), spec.aggregation.kind, seed=spec.train.seed,
                                    wd_init=spec.aggregation.wd_init)
            result = self._trainer(spec).train(model, train_set, test_set)
            report = result.report

            checkpoint = output / CHECKPOINT_NAME
            save_checkpoint(result.model, checkpoint)
            write_metrics_csv(report.per_epoch_history, output / METRICS_NAME)
            (output / TRAINING_REPORT_NAME).write_text(self.reports.render_training_report(report, spec))
        except Exception as e:
            self._finish_run(run_id, 'failed', error=e)
            raise

        self._finish_run(run_id, 'success', history=report.per_epoch_history,
                         best_spearman=report.best_spearman, best_epoch=report.best_epoch,
                         final_spearman=report.final_spearman, checkpoint_path=str(checkpoint))
        self.logger.info(f"Training artifacts written to {output}")
        print(json.dumps(report.to_dict(), indent=2))
        return 0

    def cmd_eval(self, args) -> int:
        spec = load_experiment_spec(args.spec)
        model = self._load_model(spec, args.checkpoint)
        _, test_set = self._datasets(spec)

        run_id = self._start_run('eval', spec)
        try:
            report = self._trainer(spec).evaluate(model, test_set)
        except Exception as e:
            self._finish_run(run_id, 'failed', error=e)
            raise

        self._finish_run(run_id, 'success', final_spearman=report.spearman, checkpoint_path=args.checkpoint)
        print(json.dumps(report.to_dict(), indent=2))
        return 0

    def cmd_predict(self, args) -> int:
        spec = load_experiment_spec(args.spec)
        model = self._load_model(spec, args.checkpoint)
        _, test_set = self._datasets(spec)
        if args.limit is not None:
            test_set = test_set[:args.limit]

        predictions = self._trainer(spec).predict(model, test_set)
        frame = pd.DataFrame({
            'sample_id': [s.sample_id for s in test_set],
            'true_score': [s.true_score for s in test_set],
            'difficulty': [s.difficulty for s in test_set],
            'predicted_score': predictions,
        })
        frame.to_csv(sys.stdout, index=False, float_format='%.6f')
        return 0

    def cmd_matrix(self, args) -> int:
        spec = load_experiment_spec(args.spec)
        if args.layout is not None:
            rows = LAYOUTS[args.layout]
        elif spec.data.matrix:
            rows = spec.data.matrix
        else:
            raise ConfigurationError("no matrix rows: give data.matrix in the experiment spec or --layout")
        output = Path(spec.output.directory)
        train_set, test_set = self._datasets(spec)

        run_id = self._start_run('matrix', spec)
        try:
            results = run_experiment_matrix(rows, train_set, test_set, spec.train, logger=self.logger,
                                            progress=self.progress, threads=self.threads,
                                            wd_init=spec.aggregation.wd_init)
            path = write_matrix_csv(results, output / MATRIX_NAME)
            title = f"Experiment matrix: {spec.name}"
            (output / MATRIX_REPORT_NAME).write_text(self.reports.render_matrix_report(results, title))
        except Exception as e:
            self._finish_run(run_id, 'failed', error=e)
            raise

        failed = sum(1 for r in results if r.failed)
        self._finish_run(run_id, 'success', matrix=results)
        print(f"{len(results)} rows ({failed} failed) -> {path}")
        return 0

    def cmd_report(self, args) -> int:
        results = read_matrix_csv(args.matrix)
        markdown = self.reports.render_matrix_report(results, args.title)
        if args.out is None:
            sys.stdout.write(markdown)
        else:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            Path(args.out).write_text(markdown)
            self.logger.info(f"Report saved to file: {args.out}")
        return 0

    def cmd_runs(self, args) -> int:
        repository = self._registry()
        if repository is None:
            raise ConfigurationError("run registry is unavailable")
        runs = repository.list_runs(args.limit)
        if not runs:
            print("no runs recorded")
            return 0
        frame = pd.DataFrame([repository.run_summary(run) for run in runs])
        print(frame.to_string(index=False, na_rep='-'))
        return 0


def backbone_config(spec: ExperimentSpec) -> BackboneConfig:
    section = spec.backbone
    return load_config({
        'depth': section.depth,
        'conv_type': section.conv_type,
        'clip_len': section.clip_len,
        'stage_channels': section.stage_channels,
        'block_counts': section.block_counts,
        'head_units': section.head_units,
    })


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {number}")
    return number


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='clipscore',
        description='Action quality assessment: clip features, Weight-Decider aggregation, score regression.',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument('--config', default=None, help='path to config.yaml (default: $CONFIG_PATH or config/config.yaml)')
    parser.add_argument('--log-level', default=None, choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='override logging.level from the config')
    commands = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return commands.add_parser(name, help=help_text, description=help_text,
                                   formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    synth = add('synth', 'generate a synthetic AQAD dataset')
    synth.add_argument('--count', type=int, required=True, help='number of samples (>= 1)')
    synth.add_argument('--seed', type=int, default=0, help='master seed')
    synth.add_argument('--out', required=True, help='output AQAD file')
    synth.add_argument('--frame-size', type=int, nargs=2, metavar=('H', 'W'), default=None,
                       help='frame height and width (default: data.synth.frame_size)')
    synth.add_argument('--frames', type=int, default=None, help='frames per video (default: data.synth.frames)')
    synth.add_argument('--id-prefix', default='synth', help='sample id prefix')

    gradcheck = add('gradcheck', 'compare analytic gradients with central differences')
    gradcheck.add_argument('--spec', default=None, help='experiment spec JSON (seed source)')
    gradcheck.add_argument('--tolerance', type=float, default=None,
                           help='maximum relative error (default: gradcheck.tolerance)')
    gradcheck.add_argument('--inject-fault', default=None, choices=RECORDED_OPS, metavar='OP',
                           help='corrupt the backward rule of OP (harness check)')
    gradcheck.add_argument('--no-pipeline', action='store_true', help='skip the end-to-end tiny pipeline check')

    train = add('train', 'train a model; writes checkpoint, metrics.csv and training_report.md')
    train.add_argument('--spec', default=None, help='experiment spec JSON (default: all defaults)')

    evaluate = add('eval', 'evaluate a checkpoint on the test split; prints JSON')
    evaluate.add_argument('--spec', default=None, help='experiment spec JSON')
    evaluate.add_argument('--checkpoint', required=True, help='checkpoint written by train')

    predict = add('predict', 'per-sample predictions on the test split as CSV')
    predict.add_argument('--spec', default=None, help='experiment spec JSON')
    predict.add_argument('--checkpoint', required=True, help='checkpoint written by train')
    predict.add_argument('--limit', type=_positive_int, default=None, help='first K test samples only')

    matrix = add('matrix', 'train one model per matrix row; writes matrix.csv and matrix_report.md')
    matrix.add_argument('--spec', default=None, help='experiment spec JSON')
    matrix.add_argument('--layout', choices=sorted(LAYOUTS), default=None,
                        help='preset rows instead of data.matrix')

    report = add('report', 'render a saved matrix CSV as Markdown')
    report.add_argument('--matrix', required=True, help='matrix CSV written by matrix')
    report.add_argument('--out', default=None, help='output file (default: stdout)')
    report.add_argument('--title', default='Experiment matrix', help='report heading')

    runs = add('runs', 'list recorded runs, newest first')
    runs.add_argument('--limit', type=_positive_int, default=10, help='maximum rows')

    return parser


def main(argv: Sequence[str] = None) -> int:
    """Main entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)

    try:
        app = ClipScoreApp(args.config, args.log_level)
        return getattr(app, f"cmd_{args.command}")(args)
    except Exception as e:
        error_type = classify_error(e)
        logger = Logger.get_logger(__name__)
        if error_type == ErrorType.INTERNAL:
            logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return exit_code_for(e)


if __name__ == '__main__':
    sys.exit(main())
