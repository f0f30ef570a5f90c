"""Centralized logging configuration."""
import logging
import sys
from pathlib import Path
from logging.handlers import RotatingFileHandler
import colorlog


class Logger:
    """Centralized logger for the application."""

    _loggers = {}
    _file_handlers = {}
    _defaults = {'log_file': None, 'level': 'INFO'}

    @classmethod
    def configure(cls, log_file: Path = None, level: str = 'INFO'):
        """Set the defaults applied to loggers created afterwards.

        Existing loggers are re-levelled so a CLI ``--log-level`` takes effect
        for modules that grabbed their logger at import time.

        Args:
            log_file: Path to log file (None disables the file sink)
            level: Logging level name
        """
        cls._defaults = {'log_file': log_file, 'level': level}
        for handler in cls._file_handlers.values():
            handler.close()
        cls._file_handlers = {}
        for name in list(cls._loggers):
            del cls._loggers[name]
            cls.get_logger(name)

    @classmethod
    def _file_handler(cls, log_file: Path) -> RotatingFileHandler:
        """Rotating sink for ``log_file``, shared by every logger writing to it."""
        log_file = Path(log_file).resolve()
        if log_file in cls._file_handlers:
            return cls._file_handlers[log_file]

        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=10485760,  # 10MB
            backupCount=5
        )
        file_handler.setLevel(logging.DEBUG)  # Always log everything to file
        file_formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        file_handler.setFormatter(file_formatter)
        cls._file_handlers[log_file] = file_handler
        return file_handler

    @classmethod
    def get_logger(cls, name: str, log_file: Path = None, level: str = None) -> logging.Logger:
        """Get or create a logger.

        Args:
            name: Logger name (usually __name__ of the module)
            log_file: Path to log file; falls back to the configured default
            level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)

        Returns:
            Configured logger instance
        """
        if name in cls._loggers:
            return cls._loggers[name]

        level = (level or cls._defaults['level']).upper()
        log_file = log_file or cls._defaults['log_file']

        logger = logging.getLogger(name)
        logger.setLevel(getattr(logging, level))
        logger.propagate = False

        # Remove existing handlers
        logger.handlers = []

        # Console handler with color; stderr keeps stdout free for JSON/CSV output
        console_handler = colorlog.StreamHandler(sys.stderr)
        console_handler.setLevel(getattr(logging, level))
        console_formatter = colorlog.ColoredFormatter(
            '%(log_color)s%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S',
            log_colors={
                'DEBUG': 'cyan',
                'INFO': 'green',
                'WARNING': 'yellow',
                'ERROR': 'red',
                'CRITICAL': 'red,bg_white',
            }
        )
        console_handler.setFormatter(console_formatter)
        logger.addHandler(console_handler)

        # One file handler per path, so rotation is seen by every logger
        if log_file:
            logger.addHandler(cls._file_handler(log_file))

        cls._loggers[name] = logger
        return logger
