"""Run the command line interface with ``python . <subcommand> ...``."""

import sys

from apf_poisson.modules.cli import main

if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
