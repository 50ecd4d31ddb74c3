import logging
import sys
import traceback
from typing import List, Optional

from pydantic import ValidationError

from rko_route.cli import build_parser, dispatch
from rko_route.utils.config import load_config

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2

logging.basicConfig(level=logging.INFO, format='%(message)s')


def run(argv: Optional[List[str]] = None) -> int:
    """Parse the command line, configure logging and run one subcommand."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 after --help and 2 on usage errors
        return EXIT_OK if e.code in (0, None) else EXIT_VALIDATION
    config = load_config(workers=args.workers, log_level=args.log_level, seed=args.seed)
    logging.getLogger().setLevel(config['log_level'])
    return dispatch(args, config)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        return run(argv)
    except (ValidationError, FileNotFoundError, ValueError) as e:
        logging.error(f"Invalid input: {e}")
        if logging.getLogger().isEnabledFor(logging.DEBUG):
            traceback.print_exc()
        return EXIT_VALIDATION
    except Exception as e:
        logging.error(f"Error during run: {e}")
        if logging.getLogger().isEnabledFor(logging.DEBUG):
            traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
