"""
Logging setup for affectfuse.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path
from typing import Optional

from loguru import logger as _logger

_LOG_INITIALISED = False
LOG_DIR = Path(os.environ.get("AFFECTFUSE_LOG_DIR", str(Path.home() / ".affectfuse" / "logs")))
DEFAULT_LOG_PATH = LOG_DIR / "affectfuse.log"


def configure(log_path: Optional[Path] = None, *, level: str = "INFO", force: bool = False) -> None:
    """
    Configure loguru sinks once per process.

    Console output goes to stderr at ``level``; everything from DEBUG up is
    also written to a rotating file. ``force`` re-applies the sinks, which the
    CLI uses after parsing ``--log-file``.
    """
    global _LOG_INITIALISED
    if _LOG_INITIALISED and not force:
        return
    target = log_path or DEFAULT_LOG_PATH

    _logger.remove()
    if sys.stderr is not None:
        _logger.add(sys.stderr, level=level, enqueue=True)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        _logger.add(
            target,
            level="DEBUG",
            rotation="10 MB",
            retention=5,
            encoding="utf-8",
            enqueue=True,
            backtrace=True,
            diagnose=False,
        )
    except OSError:
        # Read-only home directories still get console logging.
        _logger.warning("Cannot open log file {}; logging to stderr only.", target)
    _LOG_INITIALISED = True


def get_logger():
    """Return the shared logger instance."""
    configure()
    return _logger
