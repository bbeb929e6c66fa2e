from .config import StoreConfig
from .records import format_value, read_csv, write_csv
from .run_store import RunContext, open_run, record_failure

__all__ = ['StoreConfig', 'format_value', 'read_csv', 'write_csv', 'RunContext', 'open_run', 'record_failure']
