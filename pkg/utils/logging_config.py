"""
Root logger setup shared by the CLI commands and the API.

Console output goes to stderr so stdout stays free for command results.
File output, when enabled, rotates a main log and an errors-only log under
the configured log directory.
"""

import logging
import logging.handlers
import sys
from pathlib import Path
from typing import List, Optional

from utils.config import Settings, get_settings

CONSOLE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(funcName)s - %(message)s"

# Libraries that log per request or per figure at INFO
QUIET_LOGGERS = ["uvicorn", "uvicorn.access", "fastapi", "httpx", "httpcore", "matplotlib", "PIL"]


def _rotating_handler(path: Path, level: int, max_bytes: int, backup_count: int) -> logging.Handler:
    handler = logging.handlers.RotatingFileHandler(path, maxBytes=max_bytes, backupCount=backup_count,
                                                   encoding="utf-8")
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt="%Y-%m-%d %H:%M:%S"))
    return handler


def setup_logging(
    log_level: str = "INFO",
    log_file: Optional[str] = None,
    log_dir: str = "logs",
    max_bytes: int = 10 * 1024 * 1024,  # 10MB
    backup_count: int = 5,
    console_output: bool = True
) -> List[Path]:
    """
    Replace the root logger's handlers.

    Args:
        log_level: DEBUG, INFO, WARNING, ERROR or CRITICAL; unknown names fall back to INFO
        log_file: Log file stem, None or empty disables file output
        log_dir: Directory for the log files, created on demand
        max_bytes: Size at which a log file rotates
        backup_count: Rotated files kept per log
        console_output: Also log to stderr

    Returns:
        Paths of the log files written, empty without file output
    """
    level = getattr(logging, log_level.upper(), logging.INFO)
    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)
        handler.close()

    if console_output:
        console = logging.StreamHandler(sys.stderr)
        console.setLevel(level)
        console.setFormatter(logging.Formatter(CONSOLE_FORMAT, datefmt="%H:%M:%S"))
        root_logger.addHandler(console)

    paths: List[Path] = []
    if log_file:
        directory = Path(log_dir)
        directory.mkdir(parents=True, exist_ok=True)
        paths = [directory / f"{log_file}.log", directory / f"{log_file}_errors.log"]
        root_logger.addHandler(_rotating_handler(paths[0], level, max_bytes, backup_count))
        root_logger.addHandler(_rotating_handler(paths[1], logging.ERROR, max_bytes, backup_count))

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    logger = logging.getLogger(__name__)
    logger.debug(f"Logging at {logging.getLevelName(level)}, console={console_output}, files={paths or 'none'}")
    return paths


def system_logging(log_level: Optional[str] = None, settings: Optional[Settings] = None) -> List[Path]:
    """setup_logging from Settings; log_level overrides the configured level."""
    settings = settings or get_settings()
    return setup_logging(
        log_level=log_level or settings.log_level,
        log_file=settings.log_file,
        log_dir=settings.log_dir,
        max_bytes=settings.log_max_bytes,
        backup_count=settings.log_backup_count,
        console_output=settings.log_console_output,
    )
