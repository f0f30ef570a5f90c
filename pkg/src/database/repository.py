"""Data access layer for the run registry."""
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence
from sqlalchemy.orm import sessionmaker, Session
from .models import TrainingRun, EpochMetric, MatrixRecord, create_tables, get_engine


def _nullable(value: Optional[float]) -> Optional[float]:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    return float(value)


class Repository:
    """Repository pattern for run registry operations."""

    def __init__(self, database_path: str):
        """Initialize repository with database connection, creating tables if needed.

        Args:
            database_path: Path to SQLite database file
        """
        Path(database_path).parent.mkdir(parents=True, exist_ok=True)
        self.engine = get_engine(database_path)
        create_tables(self.engine)
        self.SessionLocal = sessionmaker(bind=self.engine, expire_on_commit=False)

    def get_session(self) -> Session:
        """Get a new database session."""
        return self.SessionLocal()

    # Run operations

    def start_run(self, command: str, experiment: str, seed: Optional[int] = None) -> TrainingRun:
        """Record the start of a command.

        Args:
            command: train, eval or matrix
            experiment: Experiment name from the experiment spec
            seed: Training seed

        Returns:
            The new run, status 'running'
        """
        with self.get_session() as session:
            run = TrainingRun(command=command, experiment=experiment, seed=seed, status='running',
                              started_at=datetime.utcnow())
            session.add(run)
            session.commit()
            session.refresh(run)
            return run

    def finish_run(self, run_id: int, status: str, error_message: str = None, **summary: Any):
        """Close a run.

        Args:
            run_id: Run ID
            status: success or failed
            error_message: Optional error message
            **summary: best_spearman, best_epoch, final_spearman, checkpoint_path
        """
        with self.get_session() as session:
            run = session.query(TrainingRun).filter(TrainingRun.id == run_id).first()
            if run:
                run.status = status
                run.finished_at = datetime.utcnow()
                run.duration_seconds = (run.finished_at - run.started_at).total_seconds()
                if error_message:
                    run.error_message = error_message
                for key in ('best_spearman', 'final_spearman'):
                    if key in summary:
                        setattr(run, key, _nullable(summary[key]))
                for key in ('best_epoch', 'checkpoint_path'):
                    if summary.get(key) is not None:
                        setattr(run, key, summary[key])
                session.commit()

    def record_epochs(self, run_id: int, history: Sequence[Any]):
        """Store per-epoch records (objects with epoch/train_loss/test_loss/test_spearman).

        Args:
            run_id: Run ID
            history: Epoch records in order
        """
        with self.get_session() as session:
            for record in history:
                session.add(EpochMetric(
                    run_id=run_id,
                    epoch=record.epoch,
                    train_loss=record.train_loss,
                    test_loss=record.test_loss,
                    test_spearman=_nullable(record.test_spearman),
                ))
            session.commit()

    def record_matrix(self, run_id: int, rows: Sequence[Any]):
        """Store experiment-matrix rows.

        Args:
            run_id: Run ID
            rows: Matrix results (failed rows carry the string 'failed')
        """
        with self.get_session() as session:
            for row in rows:
                failed = row.failed
                session.add(MatrixRecord(
                    run_id=run_id,
                    depth=row.depth,
                    conv_type=row.conv_type,
                    clip_len=row.clip_len,
                    aggregation=row.aggregation,
                    spearman=None if failed else float(row.spearman),
                    params=row.params if isinstance(row.params, int) else None,
                    status='failed' if failed else 'success',
                ))
            session.commit()

    def list_runs(self, limit: int = 10) -> List[TrainingRun]:
        """Get recent runs, newest first.

        Args:
            limit: Maximum number of runs to return

        Returns:
            List of runs
        """
        with self.get_session() as session:
            return session.query(TrainingRun).order_by(
                TrainingRun.started_at.desc(), TrainingRun.id.desc()
            ).limit(limit).all()

    def get_epochs(self, run_id: int) -> List[EpochMetric]:
        with self.get_session() as session:
            return session.query(EpochMetric).filter(
                EpochMetric.run_id == run_id
            ).order_by(EpochMetric.epoch).all()

    def get_matrix(self, run_id: int) -> List[MatrixRecord]:
        with self.get_session() as session:
            return session.query(MatrixRecord).filter(
                MatrixRecord.run_id == run_id
            ).order_by(MatrixRecord.id).all()

    def run_summary(self, run: TrainingRun) -> Dict[str, Any]:
        """Plain-dict view of a run for tabular display."""
        return {
            'id': run.id,
            'command': run.command,
            'experiment': run.experiment,
            'seed': run.seed,
            'status': run.status,
            'started_at': run.started_at.strftime('%Y-%m-%d %H:%M:%S') if run.started_at else '',
            'duration_s': round(run.duration_seconds, 1) if run.duration_seconds is not None else None,
            'best_spearman': run.best_spearman,
            'final_spearman': run.final_spearman,
        }
