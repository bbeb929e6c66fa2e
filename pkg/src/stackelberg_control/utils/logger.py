import logging
from typing import Optional, Union

from .config import Settings

ROOT_LOGGER = "stackelberg_control"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def get_logger(name: str) -> logging.Logger:
    """Logger inside the package namespace"""
    if not name.startswith(ROOT_LOGGER):
        name = f"{ROOT_LOGGER}.{name}"
    return logging.getLogger(name)


def setup_logging(level: Optional[Union[str, int]] = None) -> logging.Logger:
    """
    Install a single stream handler on the package logger

    Args:
        level: Logging level name or number; defaults to Settings.LOG_LEVEL
    """
    root = logging.getLogger(ROOT_LOGGER)
    if level is None:
        level = Settings.LOG_LEVEL
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    root.setLevel(level)

    # Repeated CLI calls in one process must not stack handlers
    if not any(getattr(h, "_stackelberg", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._stackelberg = True
        root.addHandler(handler)
    return root
