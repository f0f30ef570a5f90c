"""Run registry models."""
from datetime import datetime
from sqlalchemy import create_engine, Column, Integer, String, Text, DateTime, Float, ForeignKey
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class TrainingRun(Base):
    """One invocation of train, eval or matrix."""

    __tablename__ = 'training_runs'

    id = Column(Integer, primary_key=True)
    command = Column(String(20), nullable=False, index=True)  # train, eval, matrix
    experiment = Column(String(200), nullable=False)
    seed = Column(Integer)
    status = Column(String(20), nullable=False, default='running')  # running, success, failed
    started_at = Column(DateTime, default=datetime.utcnow, nullable=False, index=True)
    finished_at = Column(DateTime)
    duration_seconds = Column(Float)
    best_spearman = Column(Float)
    best_epoch = Column(Integer)
    final_spearman = Column(Float)
    checkpoint_path = Column(String(500))
    error_message = Column(Text)

    # Relationships
    epochs = relationship("EpochMetric", back_populates="run", cascade="all, delete-orphan")
    matrix_rows = relationship("MatrixRecord", back_populates="run", cascade="all, delete-orphan")

    def __repr__(self):
        return f"<TrainingRun(id={self.id}, command='{self.command}', status='{self.status}')>"


class EpochMetric(Base):
    """Per-epoch losses and test correlation of a training run."""

    __tablename__ = 'epoch_metrics'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('training_runs.id'), nullable=False, index=True)
    epoch = Column(Integer, nullable=False)
    train_loss = Column(Float, nullable=False)
    test_loss = Column(Float, nullable=False)
    test_spearman = Column(Float)  # NULL when undefined

    run = relationship("TrainingRun", back_populates="epochs")

    def __repr__(self):
        return f"<EpochMetric(run={self.run_id}, epoch={self.epoch}, spearman={self.test_spearman})>"


class MatrixRecord(Base):
    """One row of an experiment matrix."""

    __tablename__ = 'matrix_records'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('training_runs.id'), nullable=False, index=True)
    depth = Column(String(10), nullable=False)
    conv_type = Column(String(20), nullable=False)
    clip_len = Column(Integer, nullable=False)
    aggregation = Column(String(20), nullable=False)
    spearman = Column(Float)  # NULL when the row failed
    params = Column(Integer)
    status = Column(String(20), nullable=False, default='success')  # success, failed

    run = relationship("TrainingRun", back_populates="matrix_rows")

    def __repr__(self):
        return f"<MatrixRecord(run={self.run_id}, {self.depth}/{self.conv_type}/{self.clip_len}/{self.aggregation})>"


def create_tables(engine):
    """Create all tables in the database.

    Args:
        engine: SQLAlchemy engine
    """
    Base.metadata.create_all(engine)


def get_engine(database_path: str):
    """Create and return a database engine.

    Args:
        database_path: Path to SQLite database file

    Returns:
        SQLAlchemy engine
    """
    return create_engine(f'sqlite:///{database_path}', echo=False)
