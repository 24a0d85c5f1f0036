"""The sparsemf module is callable."""

from __future__ import annotations
import logging
import signal
import sys
import typing
import warnings

from . import DEBUG, sigint_handler

if typing.TYPE_CHECKING:
    from typing import List, Optional


def run(argv: Optional[List[str]] = None) -> int:
    """Run a subcommand and return the exit status.

    Args:
        argv: the command line arguments, :attr:`sys.argv` if None.
    Returns:
        0 on success, 2 on infinite results or failed checks, 1 on errors.
    """
    logging.basicConfig(
        level=logging.DEBUG if DEBUG else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s')
    from . import args, error
    try:
        func = args.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        status = func()
    except error.SmfError as err:
        if DEBUG:
            raise
        errtype = type(err).__name__
        print('Oops! sparsemf encountered the following problem while '
              'processing your request.', 'Please check your input files '
              'and the command line arguments.', '',
              f'{errtype}: {err}', sep='\n', file=sys.stderr)
        return 1
    return status if isinstance(status, int) else 0


def main() -> None:
    """Implement sparsemf entry point."""
    if not DEBUG:
        signal.signal(signal.SIGINT, sigint_handler)
        warnings.simplefilter('ignore')
    sys.exit(run())


if __name__ == '__main__':
    main()
