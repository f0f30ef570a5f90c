import logging
from logging.handlers import RotatingFileHandler

import pytest

from src.utils.logger import Logger


@pytest.fixture
def log_file(tmp_path):
    path = tmp_path / 'logs' / 'clipscore.log'
    Logger.configure(path, 'INFO')
    yield path
    Logger.configure(None, 'INFO')


def file_sinks(logger):
    return [h for h in logger.handlers if isinstance(h, RotatingFileHandler)]


def test_loggers_share_one_file_sink(log_file):
    first = Logger.get_logger('clipscore.tests.first')
    second = Logger.get_logger('clipscore.tests.second')
    assert len(file_sinks(first)) == 1
    assert file_sinks(first)[0] is file_sinks(second)[0]

    first.info('from first')
    second.warning('from second')
    text = log_file.read_text()
    assert 'clipscore.tests.first - INFO - from first' in text
    assert 'clipscore.tests.second - WARNING - from second' in text


def test_configure_relevels_existing_loggers(log_file):
    logger = Logger.get_logger('clipscore.tests.level')
    Logger.configure(log_file, 'ERROR')
    assert logger.level == logging.ERROR
    assert len(file_sinks(logger)) == 1


def test_console_only_without_file():
    Logger.configure(None, 'INFO')
    logger = Logger.get_logger('clipscore.tests.console')
    assert file_sinks(logger) == []
    assert len(logger.handlers) == 1
