"""
ssf-lab: run spectral shift function experiments from a JSON config.

    ssf-lab <det|xi|scan|check|decompose> --config <path> [--out <dir>] [--threads N] [--verbose]
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from config import load_config
from engine import COMMANDS, run_command
from errors import ConfigError, OutputError

load_dotenv()

# Configure logging
logging.basicConfig(level=logging.INFO, filename=os.getenv("SSF_LAB_LOG_FILE", "ssf_lab.log"), filemode="a", format="%(asctime)s - %(levelname)s - %(message)s", encoding="utf-8")
logger = logging.getLogger(__name__)

EXIT_OK, EXIT_TASK_FAILED, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssf-lab", description="Spectral shift function experiments")
    parser.add_argument("command", choices=COMMANDS, help="What to compute")
    parser.add_argument("--config", required=True, help="Experiment JSON file")
    parser.add_argument("--out", help="Output directory (overrides output_dir in the config)")
    parser.add_argument("--threads", type=int, help="Parallel tasks (overrides threads in the config)")
    parser.add_argument("--verbose", action="store_true", help="DEBUG logging, mirrored to stderr")
    return parser


def _enable_verbose():
    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s - %(levelname)s - %(message)s"))
    root.addHandler(handler)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        _enable_verbose()
    if args.threads is not None and args.threads < 1:
        print("ssf-lab: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, output_dir=args.out)
        status = run_command(args.command, cfg, args.threads)
    except ConfigError as e:
        logger.error(f"[Config] {e}")
        print(f"ssf-lab: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as e:
        logger.error(f"[Report] {e}")
        print(f"ssf-lab: cannot write output: {e}", file=sys.stderr)
        return EXIT_TASK_FAILED
    if status == EXIT_OK:
        print(f"ssf-lab {args.command}: done, outputs in {cfg.output_dir}")
    else:
        print(f"ssf-lab {args.command}: some tasks failed, see {os.path.join(cfg.output_dir, 'errors.json')}",
              file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
