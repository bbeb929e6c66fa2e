import argparse
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from .config import parse_config
from .errors import ConfigError
from .main import COMMANDS, EXIT_CONFIG, run
from .store.run_store import record_failure
from .utils.config import Settings
from .utils.logger import setup_logging

# Load environment variables
load_dotenv()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stackelberg_control",
        description="Hierarchic (leader / two followers) control of a coupled degenerate parabolic system on a moving interval",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="problem configuration file")
    parser.add_argument("--out", default=Settings.OUTPUT_DIR, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="overrides solver.seed")
    parser.add_argument("--threads", type=int, default=Settings.default_threads(), help="workers for sweep members and convexity directions")
    parser.add_argument("--physical", action="store_true", help="simulate: add the moving-domain coordinate")
    parser.add_argument("--with-nash", action="store_true", help="simulate: apply the Nash follower controls")
    parser.add_argument("--log-level", default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    text = ""
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text)
    except (ConfigError, OSError) as e:
        error = e if isinstance(e, ConfigError) else ConfigError([f"cannot read config: {e}"])
        record_failure(args.out, args.command, error, text, args.seed or 0)
        return EXIT_CONFIG
    return run(
        args.command, cfg, args.out,
        seed=args.seed, threads=max(1, args.threads),
        physical=args.physical, with_nash=args.with_nash,
    )


if __name__ == "__main__":
    sys.exit(main())
