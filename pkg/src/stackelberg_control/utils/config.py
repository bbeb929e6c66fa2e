import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _int_env(name: str, default: int) -> int:
    value = os.getenv(name)
    try:
        return int(value) if value else default
    except ValueError:
        return default


class Settings:
    """Process-level settings; problem parameters live in the config file"""

    LOG_LEVEL: str = os.getenv("STACKELBERG_LOG_LEVEL", "INFO")
    OUTPUT_DIR: str = os.getenv("STACKELBERG_OUTPUT_DIR", "runs")
    THREADS: int = _int_env("STACKELBERG_THREADS", 1)

    @classmethod
    def default_threads(cls) -> int:
        return max(1, cls.THREADS)
