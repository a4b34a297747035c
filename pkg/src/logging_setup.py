"""
Logging configuration for command-line runs
"""

import logging
from typing import Optional

from colorama import Fore, Style, init

from .config import Config

_LEVEL_COLORS = {
    logging.DEBUG: Fore.WHITE,
    logging.INFO: Fore.BLUE,
    logging.WARNING: Fore.YELLOW,
    logging.ERROR: Fore.RED,
    logging.CRITICAL: Fore.RED + Style.BRIGHT,
}


class ColorFormatter(logging.Formatter):
    """Formatter that colours the level name"""

    def format(self, record: logging.LogRecord) -> str:
        color = _LEVEL_COLORS.get(record.levelno, "")
        original = record.levelname
        record.levelname = f"{color}{original}{Style.RESET_ALL}"
        try:
            return super().format(record)
        finally:
            record.levelname = original


def configure_logging(level: Optional[str] = None) -> None:
    """Install a single coloured stream handler on the package logger"""
    init(autoreset=True)
    level_name = (level or ("DEBUG" if Config.DEBUG else Config.LOG_LEVEL)).upper()
    logger = logging.getLogger("src")
    logger.setLevel(level_name)
    if not any(getattr(h, "_mlufl", False) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(ColorFormatter("%(levelname)s %(name)s: %(message)s"))
        handler._mlufl = True  # type: ignore[attr-defined]
        logger.addHandler(handler)
