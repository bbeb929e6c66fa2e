from .config import Settings
from .logger import get_logger, setup_logging

__all__ = ['Settings', 'get_logger', 'setup_logging']
