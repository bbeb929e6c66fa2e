from dataclasses import dataclass

from ..utils.config import Settings


@dataclass(frozen=True)
class StoreConfig:
    """File names and number formatting for run directories"""

    FLOAT_FORMAT: str = ".17g"
    MANIFEST: str = "manifest.csv"
    CONFIG_ECHO: str = "config_echo.txt"
    ERROR_FILE: str = "error.txt"
    ENCODING: str = "utf-8"

    @classmethod
    def default_output_dir(cls) -> str:
        return Settings.OUTPUT_DIR
