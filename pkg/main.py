"""Run the dissipacert command line from a source checkout."""
import sys

from dissipacert.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
